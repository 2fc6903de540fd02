#include "ctce/roadside.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ctce {

QueryFrame generate_queries(const std::vector<Observation>& obs, const Pose& sensor_pose,
                            int agent_id, uint32_t frame_id, const ModelConfig& cfg,
                            const ParameterSet& params, const std::string& generator_prefix,
                            FrameTag tag) {
  QueryFrame f;
  f.agent_id = agent_id;
  f.frame_id = frame_id;
  f.timestamp = frame_id * kFramePeriod;
  f.sender_pose = sensor_pose;
  f.tag = tag;
  if (obs.empty()) return f;

  const int n = static_cast<int>(obs.size());
  std::vector<double> features(static_cast<size_t>(n) * ModelConfig::obs_features);
  for (int i = 0; i < n; ++i) {
    const Box3D& b = obs[i].box;
    double* row = features.data() + static_cast<size_t>(i) * ModelConfig::obs_features;
    row[0] = b.center.x();
    row[1] = b.center.y();
    row[2] = b.center.z();
    row[3] = b.dims.x();
    row[4] = b.dims.y();
    row[5] = b.dims.z();
    row[6] = std::sin(b.yaw);
    row[7] = std::cos(b.yaw);
    row[8] = obs[i].confidence;
    f.ref_points.push_back(b.center);
    f.confidences.push_back(obs[i].confidence);
  }
  Tensor x(n, ModelConfig::obs_features, std::move(features));
  f.embeddings = mlp_forward(x, cfg.generator_spec(), params, generator_prefix);
  return f;
}

QueryFrame tca(const QueryFrame& current, const HistoryBuffer& history, const ModelConfig& cfg,
               const ParameterSet& params) {
  QueryFrame out = current;
  out.tag = FrameTag::roadside_temporal;
  if (current.empty() || history.empty()) return out;

  std::vector<Tensor> hist_embeddings;
  for (const auto& frame : history.entries())
    if (!frame.empty()) hist_embeddings.push_back(frame.embeddings);
  if (hist_embeddings.empty()) return out;

  Tensor context = concat_rows(hist_embeddings);
  Tensor refined =
      mha_cross_attention(current.embeddings, context, context, cfg.heads, params, "tca");
  out.embeddings = add(current.embeddings, refined);
  return out;
}

QueryFrame select_top(const QueryFrame& f, int n_tx) {
  if (n_tx < 0) throw std::invalid_argument("select_top: negative n_tx");
  std::vector<int> order(f.count());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (f.confidences[a] != f.confidences[b]) return f.confidences[a] > f.confidences[b];
    const Vec3& pa = f.ref_points[a];
    const Vec3& pb = f.ref_points[b];
    if (pa.x() != pb.x()) return pa.x() < pb.x();
    if (pa.y() != pb.y()) return pa.y() < pb.y();
    if (pa.z() != pb.z()) return pa.z() < pb.z();
    return a < b;
  });
  const int keep = std::min<int>(n_tx, f.count());
  order.resize(keep);

  QueryFrame out;
  out.agent_id = f.agent_id;
  out.frame_id = f.frame_id;
  out.timestamp = f.timestamp;
  out.sender_pose = f.sender_pose;
  out.tag = f.tag;
  for (int idx : order) {
    out.ref_points.push_back(f.ref_points[idx]);
    out.confidences.push_back(f.confidences[idx]);
  }
  if (keep > 0) out.embeddings = gather_rows(f.embeddings, order);
  return out;
}

QueryFrame RoadsidePipeline::step(const std::vector<Observation>& obs, const Pose& sensor_pose,
                                  uint32_t frame_id) {
  QueryFrame raw = generate_queries(obs, sensor_pose, 0, frame_id, cfg_, *params_, "rsu_gen",
                                    FrameTag::roadside_raw);
  QueryFrame temporal = tca_enabled_ ? tca(raw, history_, cfg_, *params_) : raw;
  if (!tca_enabled_) temporal.tag = FrameTag::roadside_temporal;

  // history keeps the pre-TCA queries, detached from the frame's graph
  QueryFrame stored = raw;
  if (!stored.empty()) stored.embeddings = stored.embeddings.detach();
  history_.push(std::move(stored));

  return select_top(temporal, cfg_.n_tx);
}

}  // namespace ctce
