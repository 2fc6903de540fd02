#pragma once

#include <deque>
#include <optional>

#include "ctce/model.hpp"
#include "ctce/geometry.hpp"

namespace ctce {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

// Constant-velocity filter noise. q scales the discretized white-acceleration
// process noise; r is the per-axis position measurement variance.
struct KalmanConfig {
  double q = 1.0;
  double r = 0.25;
  double init_vel_var = 25.0;

  void validate() const;
};

struct TrackerConfig {
  double gate = 2.0;       // association gate, metres
  int min_hits = 2;        // updates before a track counts as confirmed
  int max_misses = 3;      // consecutive misses before deletion
  double conf_decay = 0.9; // confidence decay per missed frame

  void validate() const;
};

// One tracked roadside query: kinematic state [x,y,z,vx,vy,vz], covariance,
// and the recent embedding history used for prediction.
struct TrackState {
  Vec6 state = Vec6::Zero();
  Mat6 cov = Mat6::Identity();
  std::deque<std::vector<double>> embeddings;  // oldest first, capped at k2
  std::deque<double> embed_times;
  double last_confidence = 0.0;
  uint32_t last_frame_id = 0;
  int hits = 0;
  int misses = 0;
  int track_id = 0;

  Vec3 position() const { return state.head<3>(); }
  Vec3 velocity() const { return state.tail<3>(); }
};

Mat6 cv_transition(double dt);
Mat6 cv_process_noise(double dt, double q);

// Propagates the state dt seconds with the constant-velocity model.
TrackState kf_predict(const TrackState& t, double dt, const KalmanConfig& cfg);

// Position-only measurement update (H = [I 0]), Joseph-form covariance.
// Throws std::runtime_error if the covariance is beyond repair.
TrackState kf_update(const TrackState& t, const Vec3& z, const KalmanConfig& cfg);

struct Association {
  std::vector<std::pair<int, int>> pairs;  // (track index, query index)
  std::vector<int> unmatched_tracks;
  std::vector<int> unmatched_queries;
};

// Min-cost one-to-one assignment of predicted track positions to query
// ref_points; pairs beyond the gate are demoted to unmatched.
Association associate(const std::vector<TrackState>& tracks, const QueryFrame& frame, double gate);

// Attention forecast of a track's embedding at target_time from its stored
// (embedding, time) history. Keys/values are embedding + time encoding of the
// lag to target_time; the query row encodes lag zero.
// Returns a 1 x d tensor attached to the graph so the predictor can be
// trained against observed embeddings.
Tensor predict_embedding(const TrackState& track, double target_time, const ModelConfig& cfg,
                         const ParameterSet& params);

// Roadside-query tracker with reconstruction of dropped frames.
class MarTracker {
 public:
  MarTracker(const ModelConfig& cfg, const ParameterSet* params, KalmanConfig kalman = {},
             TrackerConfig tracker = {});

  // Consumes a delivered roadside frame (sender coordinates).
  void update(const QueryFrame& frame);

  // Builds a stand-in frame for a dropped transmission: one query per
  // confirmed track, motion-predicted ref_point, attention-predicted
  // embedding, decayed confidence. nullopt when no track is confirmed.
  std::optional<QueryFrame> reconstruct(uint32_t target_frame_id);

  const std::vector<TrackState>& tracks() const { return tracks_; }
  int confirmed_count() const;
  void reset();

 private:
  ModelConfig cfg_;
  const ParameterSet* params_;
  KalmanConfig kalman_;
  TrackerConfig tracker_;
  std::vector<TrackState> tracks_;
  Pose sender_pose_;
  double last_time_ = 0.0;
  bool has_time_ = false;
  int next_id_ = 0;
};

}  // namespace ctce
