#pragma once

#include "ctce/losses.hpp"
#include "ctce/mar.hpp"
#include "ctce/optim.hpp"
#include "ctce/scenario.hpp"

namespace ctce {

struct TrainConfig {
  int epochs = 10;
  AdamW::Config optim;  // lr 2e-4, weight decay 0.01, cosine over the run
  Stage1LossConfig loss;
  bool tca_enabled = true;
  GuideSource source_mode = GuideSource::roadside;
  // Stage 2 only: fraction of frames withheld from the tracker so the
  // predictor also learns multi-frame forecasts, as needed after real drops.
  double stage2_drop_rate = 0.3;
  // Stage 2 only: per-element squared embedding change above which a
  // track/query pair is treated as an identity switch and excluded from the
  // forecast objective.
  double stage2_continuity_gate = 0.05;
};

struct TrainReport {
  std::vector<double> epoch_losses;  // mean per epoch
  bool diverged = false;
  std::string message;
};

// Ground truth for the cooperative task at one frame: every object visible to
// at least one agent, expressed in the EV sensor frame.
std::vector<Box3D> cooperative_ground_truth(const Scenario& scene, uint32_t frame_id,
                                            const Pose& ego_pose);

// Objects visible to the ego agent only, in the EV sensor frame.
std::vector<Box3D> individual_ground_truth(const Scenario& scene, uint32_t frame_id,
                                           const Pose& ego_pose);

// Stage 1: end-to-end detection training under ideal communication (the
// roadside frame is handed to the vehicle without serialization or drops, so
// gradients reach the roadside parameters). Updates every non-MAR parameter.
TrainReport train_stage1(ParameterSet& params, const std::vector<Scenario>& scenes,
                         const ModelConfig& cfg, const TrainConfig& tcfg);

// Stage 2: self-supervised embedding forecasting. Only "mar/..." parameters
// are updated; everything else is bit-identical before and after.
TrainReport train_stage2(ParameterSet& params, const std::vector<Scenario>& scenes,
                         const ModelConfig& cfg, const TrainConfig& tcfg);

}  // namespace ctce
