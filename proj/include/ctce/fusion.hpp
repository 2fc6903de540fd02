#pragma once

#include <optional>

#include "ctce/roadside.hpp"

namespace ctce {

// Which history feeds the temporal-guided refinement.
enum class GuideSource { roadside, ego, fused, none };

GuideSource guide_source_from_string(const std::string& s);
std::string to_string(GuideSource s);

// One-to-one matching between two query frames. Pairs are (ego index,
// roadside index); indices absent from pairs appear in exactly one of the
// unmatched lists.
struct MatchResult {
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> unmatched_ego;
  std::vector<int> unmatched_rsu;
};

// Per-frame detection head output. `logits` (N x C) and `reg` (N x 8:
// center offset, log-dims, sin yaw, cos yaw) stay attached to the graph so
// losses can backpropagate through the whole step.
struct DetectionOutput {
  std::vector<Box3D> boxes;
  Tensor logits;
  Tensor reg;
};

// Reframes the geometry into the EV sensor frame and replaces each embedding
// by unifier(concat(embedding, position encoding of the reframed ref_point)).
QueryFrame align(const QueryFrame& f, const Pose& ev_pose, const ModelConfig& cfg,
                 const ParameterSet& params);

// Minimum-total-distance assignment on ref_point distances; assigned pairs
// farther apart than gate_radius are demoted to unmatched.
MatchResult match_queries(const QueryFrame& ego, const QueryFrame& rsu, double gate_radius);

// Coarse fusion: pair -> pairMLP(concat) embedding, confidence-weighted mean
// ref_point, max confidence; unmatched queries pass through unchanged.
QueryFrame fuse_pairs(const QueryFrame& ego, const QueryFrame& rsu, const MatchResult& m,
                      const ModelConfig& cfg, const ParameterSet& params);

// Residual embedding update from an MLP over concat(embedding, time encoding
// of dt, flattened relative pose now^-1 o then). Geometry untouched.
QueryFrame motion_encode(const QueryFrame& f, const Pose& pose_now, const Pose& pose_then,
                         double dt, const ModelConfig& cfg, const ParameterSet& params);

// Residual cross-attention of the coarse queries over the concatenated
// embeddings of already motion-encoded history frames. Identity when the
// mode is none or the history holds no queries.
QueryFrame temporal_guide(const QueryFrame& coarse, const std::vector<QueryFrame>& history,
                          GuideSource mode, const ModelConfig& cfg, const ParameterSet& params);

// Decodes boxes: class argmax, sigmoid score, center = ref + offset,
// dims = exp(log-dims), yaw = atan2(sin, cos).
DetectionOutput detect(const QueryFrame& f, const ModelConfig& cfg, const ParameterSet& params);

// Ego-only baseline: generate -> align -> detect.
DetectionOutput individual_step(const std::vector<Observation>& obs, const Pose& ego_pose,
                                uint32_t frame_id, const ModelConfig& cfg,
                                const ParameterSet& params);

struct EvStepResult {
  QueryFrame fused;  // final refined frame, EV coordinates
  DetectionOutput detections;
  bool cooperative = false;  // a non-empty roadside frame was consumed
};

// Vehicle-side stack. The caller owns reception (and any reconstruction of
// dropped frames) and passes the roadside frame in when one is available.
class EvPipeline {
 public:
  EvPipeline(const ModelConfig& cfg, const ParameterSet* params,
             GuideSource mode = GuideSource::roadside)
      : cfg_(cfg),
        params_(params),
        mode_(mode),
        rsu_hist_(cfg.k2),
        ego_hist_(cfg.k2),
        fused_hist_(cfg.k2) {}

  EvStepResult step(const std::vector<Observation>& ego_obs, const Pose& ego_pose,
                    const std::optional<QueryFrame>& received, uint32_t frame_id);

  void reset();
  GuideSource mode() const { return mode_; }
  const HistoryBuffer& roadside_history() const { return rsu_hist_; }

  // Whether reconstructed stand-in frames enter the roadside history like
  // real receptions (default) or are consumed for fusion only.
  void set_push_reconstructed(bool v) { push_reconstructed_ = v; }

 private:
  const HistoryBuffer& history_for_mode() const;

  ModelConfig cfg_;
  const ParameterSet* params_;
  GuideSource mode_;
  bool push_reconstructed_ = true;
  HistoryBuffer rsu_hist_;
  HistoryBuffer ego_hist_;
  HistoryBuffer fused_hist_;
};

}  // namespace ctce
