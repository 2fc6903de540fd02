#include "ctce/mar.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctce/assignment.hpp"
#include "ctce/scenario.hpp"

namespace ctce {

void KalmanConfig::validate() const {
  if (q <= 0.0 || r <= 0.0 || init_vel_var <= 0.0)
    throw std::invalid_argument("KalmanConfig: q, r, init_vel_var must be > 0");
}

void TrackerConfig::validate() const {
  if (gate <= 0.0 || min_hits <= 0 || max_misses <= 0 || conf_decay <= 0.0)
    throw std::invalid_argument("TrackerConfig: all fields must be positive");
}

Mat6 cv_transition(double dt) {
  Mat6 f = Mat6::Identity();
  for (int i = 0; i < 3; ++i) f(i, i + 3) = dt;
  return f;
}

Mat6 cv_process_noise(double dt, double q) {
  // discretized white-acceleration noise, per axis:
  // [dt^3/3, dt^2/2; dt^2/2, dt] * q
  Mat6 noise = Mat6::Zero();
  const double a = dt * dt * dt / 3.0 * q;
  const double b = dt * dt / 2.0 * q;
  const double c = dt * q;
  for (int i = 0; i < 3; ++i) {
    noise(i, i) = a;
    noise(i, i + 3) = b;
    noise(i + 3, i) = b;
    noise(i + 3, i + 3) = c;
  }
  return noise;
}

TrackState kf_predict(const TrackState& t, double dt, const KalmanConfig& cfg) {
  if (dt <= 0.0) throw std::invalid_argument("kf_predict: dt must be > 0");
  const Mat6 f = cv_transition(dt);
  TrackState out = t;
  out.state = f * t.state;
  out.cov = f * t.cov * f.transpose() + cv_process_noise(dt, cfg.q);
  return out;
}

TrackState kf_update(const TrackState& t, const Vec3& z, const KalmanConfig& cfg) {
  using Mat36 = Eigen::Matrix<double, 3, 6>;
  Mat36 h = Mat36::Zero();
  h.leftCols<3>() = Mat3::Identity();
  const Mat3 r_mat = cfg.r * Mat3::Identity();

  const Mat3 s = h * t.cov * h.transpose() + r_mat;
  const Eigen::Matrix<double, 6, 3> gain = t.cov * h.transpose() * s.inverse();

  TrackState out = t;
  out.state = t.state + gain * (z - h * t.state);
  const Mat6 ikh = Mat6::Identity() - gain * h;
  Mat6 cov = ikh * t.cov * ikh.transpose() + gain * r_mat * gain.transpose();
  cov = 0.5 * (cov + cov.transpose());  // recondition by symmetrization
  if (Eigen::LLT<Mat6>(cov).info() != Eigen::Success)
    throw std::runtime_error("kf_update: covariance lost positive-definiteness");
  out.cov = cov;
  return out;
}

Association associate(const std::vector<TrackState>& tracks, const QueryFrame& frame,
                      double gate) {
  if (gate <= 0.0) throw std::invalid_argument("associate: gate must be > 0");
  Association a;
  const int n = static_cast<int>(tracks.size());
  const int m = frame.count();
  std::vector<bool> t_used(n, false), q_used(m, false);
  if (n > 0 && m > 0) {
    std::vector<double> cost(static_cast<size_t>(n) * m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        cost[static_cast<size_t>(i) * m + j] = (tracks[i].position() - frame.ref_points[j]).norm();
    std::vector<int> row_to_col = min_cost_assignment(cost, n, m);
    for (int i = 0; i < n; ++i) {
      const int j = row_to_col[i];
      if (j >= 0 && cost[static_cast<size_t>(i) * m + j] <= gate) {
        a.pairs.emplace_back(i, j);
        t_used[i] = true;
        q_used[j] = true;
      }
    }
  }
  for (int i = 0; i < n; ++i)
    if (!t_used[i]) a.unmatched_tracks.push_back(i);
  for (int j = 0; j < m; ++j)
    if (!q_used[j]) a.unmatched_queries.push_back(j);
  return a;
}

namespace {

// Lag encoding added to embeddings: te_dim sinusoidal features zero-padded to
// width d, so the time signal occupies a small fixed subspace instead of
// perturbing every embedding dimension. The lag is measured in frames, not
// seconds; at 10 Hz a seconds-scale encoding barely distinguishes adjacent
// history entries and the attention cannot tell old evidence from fresh.
Tensor padded_time_encoding(double dt, const ModelConfig& cfg) {
  Tensor te = sinusoidal_encode(dt / kFramePeriod, cfg.te_dim, cfg.enc_base);
  if (cfg.te_dim >= cfg.d) return te;
  return concat_cols(te, Tensor::zeros(1, cfg.d - cfg.te_dim));
}

}  // namespace

Tensor predict_embedding(const TrackState& track, double target_time, const ModelConfig& cfg,
                         const ParameterSet& params) {
  if (track.embeddings.empty())
    throw std::runtime_error("predict_embedding: track has no embedding history");

  // The lag signal lives in the keys only: keys carry embedding + time
  // encoding so the attention can tell old evidence from fresh, while the
  // values stay raw embeddings so the time signal never leaks into the
  // output, which is an embedding and contains no time component.
  std::vector<Tensor> key_rows, value_rows;
  key_rows.reserve(track.embeddings.size());
  value_rows.reserve(track.embeddings.size());
  for (size_t i = 0; i < track.embeddings.size(); ++i) {
    Tensor e = Tensor::row(track.embeddings[i]);
    key_rows.push_back(add(e, padded_time_encoding(target_time - track.embed_times[i], cfg)));
    value_rows.push_back(e);
  }
  Tensor keys = concat_rows(key_rows);
  Tensor values = concat_rows(value_rows);
  Tensor query = padded_time_encoding(0.0, cfg);
  // Residual around the newest embedding: the attention predicts the change
  // since the last observation, not the embedding itself. With the output
  // projection initialized at zero the untrained predictor already matches
  // the persistence baseline, and training moves it strictly downhill from
  // there instead of having to rediscover the identity map.
  Tensor last = Tensor::row(track.embeddings.back());
  return add(last, mha_cross_attention(query, keys, values, cfg.heads, params, "mar"));
}

MarTracker::MarTracker(const ModelConfig& cfg, const ParameterSet* params, KalmanConfig kalman,
                       TrackerConfig tracker)
    : cfg_(cfg), params_(params), kalman_(kalman), tracker_(tracker) {
  kalman_.validate();
  tracker_.validate();
}

void MarTracker::reset() {
  tracks_.clear();
  has_time_ = false;
  next_id_ = 0;
}

int MarTracker::confirmed_count() const {
  int n = 0;
  for (const TrackState& t : tracks_)
    if (t.hits >= tracker_.min_hits) ++n;
  return n;
}

void MarTracker::update(const QueryFrame& frame) {
  const double t = frame.timestamp;
  if (has_time_) {
    const double dt = t - last_time_;
    if (dt < 0.0) throw std::invalid_argument("MarTracker: frames must arrive in time order");
    if (dt > 0.0)
      for (TrackState& tr : tracks_) tr = kf_predict(tr, dt, kalman_);
  }
  last_time_ = t;
  has_time_ = true;
  sender_pose_ = frame.sender_pose;

  Association a = associate(tracks_, frame, tracker_.gate);

  for (const auto& [ti, qi] : a.pairs) {
    TrackState& tr = tracks_[ti];
    tr = kf_update(tr, frame.ref_points[qi], kalman_);
    tr.embeddings.push_back(frame.embeddings.row_values(qi));
    tr.embed_times.push_back(t);
    while (static_cast<int>(tr.embeddings.size()) > cfg_.k2) {
      tr.embeddings.pop_front();
      tr.embed_times.pop_front();
    }
    tr.last_confidence = frame.confidences[qi];
    tr.last_frame_id = frame.frame_id;
    tr.hits += 1;
    tr.misses = 0;
  }
  for (int ti : a.unmatched_tracks) tracks_[ti].misses += 1;
  tracks_.erase(std::remove_if(tracks_.begin(), tracks_.end(),
                               [&](const TrackState& tr) { return tr.misses > tracker_.max_misses; }),
                tracks_.end());

  // spawn order fixed by geometry so the tracker is insensitive to the
  // ordering of queries within a frame
  std::vector<int> births = a.unmatched_queries;
  std::sort(births.begin(), births.end(), [&](int x, int y) {
    const Vec3& px = frame.ref_points[x];
    const Vec3& py = frame.ref_points[y];
    if (px.x() != py.x()) return px.x() < py.x();
    if (px.y() != py.y()) return px.y() < py.y();
    return px.z() < py.z();
  });
  for (int qi : births) {
    TrackState tr;
    tr.state.head<3>() = frame.ref_points[qi];
    tr.cov = Mat6::Zero();
    tr.cov.topLeftCorner<3, 3>() = kalman_.r * Mat3::Identity();
    tr.cov.bottomRightCorner<3, 3>() = kalman_.init_vel_var * Mat3::Identity();
    tr.embeddings.push_back(frame.embeddings.row_values(qi));
    tr.embed_times.push_back(t);
    tr.last_confidence = frame.confidences[qi];
    tr.last_frame_id = frame.frame_id;
    tr.hits = 1;
    tr.track_id = next_id_++;
    tracks_.push_back(tr);
  }
}

std::optional<QueryFrame> MarTracker::reconstruct(uint32_t target_frame_id) {
  if (!has_time_ || confirmed_count() == 0) return std::nullopt;
  const double target_time = target_frame_id * kFramePeriod;
  const double dt = target_time - last_time_;
  if (dt <= 0.0) return std::nullopt;

  QueryFrame out;
  out.agent_id = 0;
  out.frame_id = target_frame_id;
  out.timestamp = target_time;
  out.sender_pose = sender_pose_;
  out.tag = FrameTag::reconstructed;

  std::vector<Tensor> rows;
  for (const TrackState& tr : tracks_) {
    if (tr.hits < tracker_.min_hits) continue;
    TrackState pred = kf_predict(tr, dt, kalman_);
    out.ref_points.push_back(pred.position());
    const double missed = static_cast<double>(target_frame_id - tr.last_frame_id);
    out.confidences.push_back(tr.last_confidence * std::pow(tracker_.conf_decay, missed));
    rows.push_back(predict_embedding(tr, target_time, cfg_, *params_));
  }
  out.embeddings = concat_rows(rows).detach();
  return out;
}

}  // namespace ctce
