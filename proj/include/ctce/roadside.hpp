#pragma once

#include "ctce/geometry.hpp"
#include "ctce/model.hpp"
#include "ctce/scenario.hpp"

namespace ctce {

// Query generation shared by both agents: one query per observation,
// embedding = generator MLP over (center, dims, yaw sin/cos, confidence).
QueryFrame generate_queries(const std::vector<Observation>& obs, const Pose& sensor_pose,
                            int agent_id, uint32_t frame_id, const ModelConfig& cfg,
                            const ParameterSet& params, const std::string& generator_prefix,
                            FrameTag tag);

// Temporal contexts aggregation: residual cross-attention of the current
// queries against the concatenated raw queries of the past k1 frames.
// Geometry and confidences pass through untouched; empty history is identity.
QueryFrame tca(const QueryFrame& current, const HistoryBuffer& history, const ModelConfig& cfg,
               const ParameterSet& params);

// Keeps the min(n_tx, count) most confident queries, sorted by confidence
// descending; ties broken by ref_point x, then y, then z, then input index.
QueryFrame select_top(const QueryFrame& f, int n_tx);

// Roadside stack: generate -> TCA -> push raw history -> top-N selection.
class RoadsidePipeline {
 public:
  RoadsidePipeline(const ModelConfig& cfg, const ParameterSet* params, bool tca_enabled = true)
      : cfg_(cfg), params_(params), tca_enabled_(tca_enabled), history_(cfg.k1) {}

  QueryFrame step(const std::vector<Observation>& obs, const Pose& sensor_pose,
                  uint32_t frame_id);
  void reset() { history_.clear(); }
  const HistoryBuffer& history() const { return history_; }

 private:
  ModelConfig cfg_;
  const ParameterSet* params_;
  bool tca_enabled_;
  HistoryBuffer history_;
};

}  // namespace ctce
