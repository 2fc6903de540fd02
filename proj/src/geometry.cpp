#include "ctce/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace ctce {

double wrap_yaw(double theta) {
  double w = std::fmod(theta, 2.0 * M_PI);
  if (w <= -M_PI) w += 2.0 * M_PI;
  if (w > M_PI) w -= 2.0 * M_PI;
  return w;
}

Pose::Pose(const Mat3& r, const Vec3& t) : rotation(r), translation(t) {
  const double ortho_err = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > 1e-9) throw std::invalid_argument("Pose: rotation not orthonormal");
  if (std::fabs(r.determinant() - 1.0) > 1e-9)
    throw std::invalid_argument("Pose: rotation determinant is not +1");
}

Pose Pose::yaw_translation(double yaw, const Vec3& t) {
  Mat3 r;
  const double c = std::cos(yaw), s = std::sin(yaw);
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return Pose(r, t);
}

Pose Pose::inverse() const {
  Pose out;
  out.rotation = rotation.transpose();
  out.translation = -(rotation.transpose() * translation);
  return out;
}

Pose Pose::compose(const Pose& other) const {
  Pose out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

double Pose::yaw() const { return std::atan2(rotation(1, 0), rotation(0, 0)); }

Box3D::Box3D(const Vec3& center_, const Vec3& dims_, double yaw_, int class_id_, double score_)
    : center(center_), dims(dims_), yaw(wrap_yaw(yaw_)), class_id(class_id_), score(score_) {
  if (!(dims.x() > 0 && dims.y() > 0 && dims.z() > 0))
    throw std::invalid_argument("Box3D: dims must be positive");
  if (score < 0.0 || score > 1.0) throw std::invalid_argument("Box3D: score outside [0,1]");
}

void QueryFrame::validate() const {
  if (confidences.size() != ref_points.size())
    throw std::invalid_argument("QueryFrame: confidence/ref_point count mismatch");
  if (!ref_points.empty()) {
    if (!embeddings.defined() || embeddings.rows() != count())
      throw std::invalid_argument("QueryFrame: embedding rows do not match query count");
  }
  for (double c : confidences)
    if (c < 0.0 || c > 1.0) throw std::invalid_argument("QueryFrame: confidence outside [0,1]");
}

Query query_at(const QueryFrame& f, int i) {
  Query q;
  q.ref_point = f.ref_points.at(static_cast<size_t>(i));
  q.confidence = f.confidences.at(static_cast<size_t>(i));
  q.timestamp = f.timestamp;
  q.embedding = f.embeddings.row_values(i);
  return q;
}

QueryFrame reframe_query_frame(const QueryFrame& f, const Pose& target_frame) {
  QueryFrame out = f;
  const Pose to_target = target_frame.inverse().compose(f.sender_pose);
  for (auto& p : out.ref_points) p = to_target.apply(p);
  out.sender_pose = target_frame;
  return out;
}

HistoryBuffer::HistoryBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 0) throw std::invalid_argument("HistoryBuffer: negative capacity");
}

void HistoryBuffer::push(QueryFrame f) {
  if (capacity_ == 0) return;
  if (!entries_.empty() && f.frame_id <= entries_.back().frame_id)
    throw std::invalid_argument("HistoryBuffer: frame_id must be strictly increasing");
  entries_.push_back(std::move(f));
  if (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
}

}  // namespace ctce
