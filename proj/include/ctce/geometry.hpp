#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "ctce/tensor.hpp"

namespace ctce {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

double wrap_yaw(double theta);  // -> (-pi, pi]

// Rigid transform y = R x + t. Construction validates orthonormality.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Pose() = default;
  Pose(const Mat3& r, const Vec3& t);
  static Pose identity() { return Pose(); }
  static Pose yaw_translation(double yaw, const Vec3& t);

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  Pose inverse() const;
  Pose compose(const Pose& other) const;  // (this o other)(x) = this(other(x))
  double yaw() const;                     // rotation about z, assuming yaw-only rotations
};

struct Box3D {
  Vec3 center = Vec3::Zero();
  Vec3 dims = Vec3::Ones();  // length, width, height
  double yaw = 0.0;
  int class_id = 0;
  double score = 1.0;

  Box3D() = default;
  Box3D(const Vec3& center, const Vec3& dims, double yaw, int class_id, double score);
};

enum class FrameTag : uint8_t { roadside_raw, roadside_temporal, ego, fused, reconstructed };

// One agent's query set at one timestamp. Geometry is stored per query;
// embeddings live in a single N x d tensor so pipeline stages batch naturally.
struct QueryFrame {
  int agent_id = 0;
  uint32_t frame_id = 0;
  double timestamp = 0.0;
  Pose sender_pose;  // sensor -> world
  FrameTag tag = FrameTag::roadside_raw;
  std::vector<Vec3> ref_points;
  std::vector<double> confidences;
  Tensor embeddings;  // N x d; undefined iff the frame is empty

  int count() const { return static_cast<int>(ref_points.size()); }
  int dim() const { return count() == 0 ? 0 : embeddings.cols(); }
  bool empty() const { return ref_points.empty(); }
  void validate() const;  // count/embedding consistency, confidences in [0,1]
};

// Single-query view, mainly for tests and diagnostics.
struct Query {
  Vec3 ref_point;
  double confidence;
  double timestamp;
  std::vector<double> embedding;
};

Query query_at(const QueryFrame& f, int i);

// Maps every ref_point from the sender's world placement into `target_frame`
// (a sensor->world pose); embeddings untouched.
QueryFrame reframe_query_frame(const QueryFrame& f, const Pose& target_frame);

// Fixed-capacity FIFO of query frames with strictly increasing frame_id.
class HistoryBuffer {
 public:
  explicit HistoryBuffer(int capacity);

  void push(QueryFrame f);  // throws on non-monotone frame_id
  void clear() { entries_.clear(); }
  int size() const { return static_cast<int>(entries_.size()); }
  int capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }
  const QueryFrame& at(int i) const { return entries_.at(i); }  // 0 = oldest
  const QueryFrame& newest() const { return entries_.back(); }
  const std::deque<QueryFrame>& entries() const { return entries_; }

 private:
  int capacity_;
  std::deque<QueryFrame> entries_;
};

}  // namespace ctce
