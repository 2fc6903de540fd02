#include "ctce/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctce/assignment.hpp"

namespace ctce {

GuideSource guide_source_from_string(const std::string& s) {
  if (s == "roadside") return GuideSource::roadside;
  if (s == "ego") return GuideSource::ego;
  if (s == "fused") return GuideSource::fused;
  if (s == "none") return GuideSource::none;
  throw std::invalid_argument("unknown guide source: " + s);
}

std::string to_string(GuideSource s) {
  switch (s) {
    case GuideSource::roadside: return "roadside";
    case GuideSource::ego: return "ego";
    case GuideSource::fused: return "fused";
    case GuideSource::none: return "none";
  }
  throw std::logic_error("bad GuideSource");
}

QueryFrame align(const QueryFrame& f, const Pose& ev_pose, const ModelConfig& cfg,
                 const ParameterSet& params) {
  QueryFrame out = reframe_query_frame(f, ev_pose);
  if (out.empty()) return out;

  std::vector<Tensor> pe_rows;
  pe_rows.reserve(out.ref_points.size());
  for (const Vec3& p : out.ref_points)
    pe_rows.push_back(sinusoidal_encode_point(p.x(), p.y(), p.z(), cfg.pe_dim, cfg.enc_base));
  Tensor pe = concat_rows(pe_rows);
  out.embeddings =
      mlp_forward(concat_cols(out.embeddings, pe), cfg.unifier_spec(), params, "align");
  return out;
}

MatchResult match_queries(const QueryFrame& ego, const QueryFrame& rsu, double gate_radius) {
  if (gate_radius <= 0.0) throw std::invalid_argument("match_queries: gate_radius must be > 0");
  MatchResult r;
  const int n = ego.count();
  const int m = rsu.count();
  std::vector<bool> ego_used(n, false), rsu_used(m, false);
  if (n > 0 && m > 0) {
    std::vector<double> cost(static_cast<size_t>(n) * m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        cost[static_cast<size_t>(i) * m + j] = (ego.ref_points[i] - rsu.ref_points[j]).norm();
    std::vector<int> row_to_col = min_cost_assignment(cost, n, m);
    for (int i = 0; i < n; ++i) {
      const int j = row_to_col[i];
      if (j >= 0 && cost[static_cast<size_t>(i) * m + j] <= gate_radius) {
        r.pairs.emplace_back(i, j);
        ego_used[i] = true;
        rsu_used[j] = true;
      }
    }
  }
  for (int i = 0; i < n; ++i)
    if (!ego_used[i]) r.unmatched_ego.push_back(i);
  for (int j = 0; j < m; ++j)
    if (!rsu_used[j]) r.unmatched_rsu.push_back(j);
  return r;
}

QueryFrame fuse_pairs(const QueryFrame& ego, const QueryFrame& rsu, const MatchResult& m,
                      const ModelConfig& cfg, const ParameterSet& params) {
  QueryFrame out;
  out.agent_id = ego.agent_id;
  out.frame_id = ego.frame_id;
  out.timestamp = ego.timestamp;
  out.sender_pose = ego.sender_pose;
  out.tag = FrameTag::fused;

  std::vector<Tensor> rows;
  for (const auto& [i, j] : m.pairs) {
    const double ce = ego.confidences[i];
    const double cr = rsu.confidences[j];
    const double w = ce + cr > 0.0 ? ce / (ce + cr) : 0.5;
    out.ref_points.push_back(w * ego.ref_points[i] + (1.0 - w) * rsu.ref_points[j]);
    out.confidences.push_back(std::max(ce, cr));
    Tensor pair_in = concat_cols(gather_rows(ego.embeddings, {i}), gather_rows(rsu.embeddings, {j}));
    rows.push_back(mlp_forward(pair_in, cfg.pair_spec(), params, "pair"));
  }
  for (int i : m.unmatched_ego) {
    out.ref_points.push_back(ego.ref_points[i]);
    out.confidences.push_back(ego.confidences[i]);
    rows.push_back(gather_rows(ego.embeddings, {i}));
  }
  for (int j : m.unmatched_rsu) {
    out.ref_points.push_back(rsu.ref_points[j]);
    out.confidences.push_back(rsu.confidences[j]);
    rows.push_back(gather_rows(rsu.embeddings, {j}));
  }
  if (!rows.empty()) out.embeddings = concat_rows(rows);
  return out;
}

QueryFrame motion_encode(const QueryFrame& f, const Pose& pose_now, const Pose& pose_then,
                         double dt, const ModelConfig& cfg, const ParameterSet& params) {
  QueryFrame out = f;
  if (f.empty()) return out;

  const Pose rel = pose_now.inverse().compose(pose_then);
  std::vector<double> pose_feats(12);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) pose_feats[static_cast<size_t>(r) * 3 + c] = rel.rotation(r, c);
  for (int r = 0; r < 3; ++r) pose_feats[9 + r] = rel.translation(r);

  const int n = f.count();
  Tensor te = sinusoidal_encode(dt, cfg.te_dim, cfg.enc_base);
  std::vector<Tensor> rows;
  rows.reserve(n);
  Tensor pose_row = Tensor::row(pose_feats);
  for (int i = 0; i < n; ++i)
    rows.push_back(concat_cols(concat_cols(gather_rows(f.embeddings, {i}), te), pose_row));
  Tensor delta = mlp_forward(concat_rows(rows), cfg.motion_spec(), params, "motion");
  out.embeddings = add(f.embeddings, delta);
  return out;
}

QueryFrame temporal_guide(const QueryFrame& coarse, const std::vector<QueryFrame>& history,
                          GuideSource mode, const ModelConfig& cfg, const ParameterSet& params) {
  if (mode == GuideSource::none || coarse.empty()) return coarse;
  std::vector<Tensor> ctx;
  for (const QueryFrame& h : history)
    if (!h.empty()) ctx.push_back(h.embeddings);
  if (ctx.empty()) return coarse;

  QueryFrame out = coarse;
  Tensor context = concat_rows(ctx);
  Tensor refined =
      mha_cross_attention(coarse.embeddings, context, context, cfg.heads, params, "tgf");
  out.embeddings = add(coarse.embeddings, refined);
  return out;
}

DetectionOutput detect(const QueryFrame& f, const ModelConfig& cfg, const ParameterSet& params) {
  DetectionOutput out;
  if (f.empty()) return out;

  out.logits = mlp_forward(f.embeddings, cfg.cls_spec(), params, "head_cls");
  out.reg = mlp_forward(f.embeddings, cfg.reg_spec(), params, "head_reg");

  const int n = f.count();
  for (int i = 0; i < n; ++i) {
    int cls = 0;
    for (int c = 1; c < cfg.num_classes; ++c)
      if (out.logits.at(i, c) > out.logits.at(i, cls)) cls = c;
    const double score = 1.0 / (1.0 + std::exp(-out.logits.at(i, cls)));
    Vec3 center = f.ref_points[i] +
                  Vec3(out.reg.at(i, 0), out.reg.at(i, 1), out.reg.at(i, 2));
    Vec3 dims(std::exp(out.reg.at(i, 3)), std::exp(out.reg.at(i, 4)), std::exp(out.reg.at(i, 5)));
    const double yaw = wrap_yaw(std::atan2(out.reg.at(i, 6), out.reg.at(i, 7)));
    out.boxes.emplace_back(center, dims, yaw, cls, score);
  }
  return out;
}

DetectionOutput individual_step(const std::vector<Observation>& obs, const Pose& ego_pose,
                                uint32_t frame_id, const ModelConfig& cfg,
                                const ParameterSet& params) {
  QueryFrame raw =
      generate_queries(obs, ego_pose, 1, frame_id, cfg, params, "ego_gen", FrameTag::ego);
  return detect(align(raw, ego_pose, cfg, params), cfg, params);
}

void EvPipeline::reset() {
  rsu_hist_.clear();
  ego_hist_.clear();
  fused_hist_.clear();
}

const HistoryBuffer& EvPipeline::history_for_mode() const {
  switch (mode_) {
    case GuideSource::ego: return ego_hist_;
    case GuideSource::fused: return fused_hist_;
    default: return rsu_hist_;
  }
}

namespace {
QueryFrame detached(QueryFrame f) {
  if (!f.empty()) f.embeddings = f.embeddings.detach();
  return f;
}
}  // namespace

EvStepResult EvPipeline::step(const std::vector<Observation>& ego_obs, const Pose& ego_pose,
                              const std::optional<QueryFrame>& received, uint32_t frame_id) {
  EvStepResult r;
  QueryFrame ego_raw =
      generate_queries(ego_obs, ego_pose, 1, frame_id, cfg_, *params_, "ego_gen", FrameTag::ego);
  QueryFrame ego_al = align(ego_raw, ego_pose, cfg_, *params_);

  QueryFrame coarse = ego_al;
  std::optional<QueryFrame> rsu_al;
  if (received) {
    rsu_al = align(*received, ego_pose, cfg_, *params_);
    if (!rsu_al->empty()) {
      MatchResult m = match_queries(ego_al, *rsu_al, cfg_.gate_radius);
      coarse = fuse_pairs(ego_al, *rsu_al, m, cfg_, *params_);
      r.cooperative = true;
    }
  }

  QueryFrame guided = coarse;
  if (mode_ != GuideSource::none) {
    const double now = frame_id * kFramePeriod;
    std::vector<QueryFrame> ctx;
    for (const QueryFrame& h : history_for_mode().entries()) {
      if (h.empty()) continue;
      ctx.push_back(motion_encode(h, ego_pose, h.sender_pose, now - h.timestamp, cfg_, *params_));
    }
    guided = temporal_guide(coarse, ctx, mode_, cfg_, *params_);
  }
  r.detections = detect(guided, cfg_, *params_);
  r.fused = guided;

  // Histories hold detached, EV-frame snapshots; a dropped roadside frame
  // leaves a gap rather than an empty entry.
  if (rsu_al && (push_reconstructed_ || received->tag != FrameTag::reconstructed))
    rsu_hist_.push(detached(*rsu_al));
  if (mode_ == GuideSource::ego) ego_hist_.push(detached(ego_al));
  if (mode_ == GuideSource::fused) fused_hist_.push(detached(guided));
  return r;
}

}  // namespace ctce
