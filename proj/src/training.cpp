#include "ctce/training.hpp"

#include <cmath>

namespace ctce {

namespace {

Box3D to_ev_frame(const Box3D& world_box, const Pose& ego_pose) {
  Box3D out = world_box;
  out.center = ego_pose.inverse().apply(world_box.center);
  out.yaw = wrap_yaw(world_box.yaw - ego_pose.yaw());
  return out;
}

std::vector<Box3D> gather_visible(const Scenario& scene, uint32_t frame_id, const Pose& ego_pose,
                                  bool include_roadside) {
  const std::vector<Box3D> world = ground_truth_at(scene.tracks, frame_id);
  std::vector<bool> keep(world.size(), false);
  for (int i : visible_objects(scene.ego(), world, frame_id)) keep[i] = true;
  if (include_roadside)
    for (int i : visible_objects(scene.roadside(), world, frame_id)) keep[i] = true;
  std::vector<Box3D> out;
  for (size_t i = 0; i < world.size(); ++i)
    if (keep[i]) out.push_back(to_ev_frame(world[i], ego_pose));
  return out;
}

int total_frames(const std::vector<Scenario>& scenes) {
  int n = 0;
  for (const Scenario& s : scenes) n += static_cast<int>(s.config.frames);
  return n;
}

}  // namespace

std::vector<Box3D> cooperative_ground_truth(const Scenario& scene, uint32_t frame_id,
                                            const Pose& ego_pose) {
  return gather_visible(scene, frame_id, ego_pose, true);
}

std::vector<Box3D> individual_ground_truth(const Scenario& scene, uint32_t frame_id,
                                           const Pose& ego_pose) {
  return gather_visible(scene, frame_id, ego_pose, false);
}

TrainReport train_stage1(ParameterSet& params, const std::vector<Scenario>& scenes,
                         const ModelConfig& cfg, const TrainConfig& tcfg) {
  TrainReport report;
  AdamW::Config ocfg = tcfg.optim;
  if (ocfg.cosine_total_steps == 0)
    ocfg.cosine_total_steps = tcfg.epochs * total_frames(scenes);
  AdamW opt(ocfg);

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    int steps = 0;
    for (const Scenario& scene : scenes) {
      RoadsidePipeline rsu(cfg, &params, tcfg.tca_enabled);
      EvPipeline ev(cfg, &params, tcfg.source_mode);
      for (uint32_t f = 0; f < scene.config.frames; ++f) {
        const Pose& rsu_pose = scene.roadside().pose_at(f);
        const Pose& ego_pose = scene.ego().pose_at(f);
        QueryFrame sent = rsu.step(observe(scene, scene.roadside(), f), rsu_pose, f);
        EvStepResult r = ev.step(observe(scene, scene.ego(), f), ego_pose, sent, f);
        if (r.fused.empty()) continue;

        std::vector<Box3D> gts = cooperative_ground_truth(scene, f, ego_pose);
        Tensor loss = stage1_loss(r.detections, r.fused, gts, tcfg.loss);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          report.diverged = true;
          report.message = "stage-1 loss is not finite";
          return report;
        }
        epoch_loss += value;
        ++steps;
        if (loss.requires_grad()) {
          params.zero_grad();
          backward(loss);
          opt.step(params);
        }
      }
    }
    report.epoch_losses.push_back(steps > 0 ? epoch_loss / steps : 0.0);
  }
  return report;
}

TrainReport train_stage2(ParameterSet& params, const std::vector<Scenario>& scenes,
                         const ModelConfig& cfg, const TrainConfig& tcfg) {
  TrainReport report;

  // the optimizer only ever sees the MAR parameters (shared handles), so the
  // stage-1 weights cannot move
  ParameterSet mar_params;
  for (auto& [path, tensor] : params)
    if (cfg.is_mar_path(path)) mar_params.add(path, tensor);

  AdamW::Config ocfg = tcfg.optim;
  if (ocfg.cosine_total_steps == 0)
    ocfg.cosine_total_steps = tcfg.epochs * total_frames(scenes);
  AdamW opt(ocfg);

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    int steps = 0;
    for (const Scenario& scene : scenes) {
      RoadsidePipeline rsu(cfg, &params, tcfg.tca_enabled);
      MarTracker tracker(cfg, &params);
      std::mt19937_64 drop_rng(scene.config.seed ^ 0x9e3779b97f4a7c15ull);
      std::bernoulli_distribution drop(tcfg.stage2_drop_rate);
      for (uint32_t f = 0; f < scene.config.frames; ++f) {
        const Pose& rsu_pose = scene.roadside().pose_at(f);
        QueryFrame sent = rsu.step(observe(scene, scene.roadside(), f), rsu_pose, f);
        if (!sent.empty()) sent.embeddings = sent.embeddings.detach();

        // forecast each existing track to the new frame, score it against
        // the embedding the track actually receives, then let the tracker
        // consume the frame
        if (!tracker.tracks().empty() && !sent.empty()) {
          Association assoc = associate(tracker.tracks(), sent, cfg.tracker_gate);
          std::vector<Tensor> losses;
          for (const auto& [ti, qi] : assoc.pairs) {
            const TrackState& track = tracker.tracks()[ti];
            // Identity switches and re-entries produce embedding jumps orders
            // of magnitude above the per-frame drift; their gradients swamp
            // the forecast signal, so pairs without embedding continuity are
            // left out of the objective.
            const std::vector<double>& last = track.embeddings.back();
            const std::vector<double> now = sent.embeddings.row_values(qi);
            double gap = 0.0;
            for (size_t k = 0; k < now.size(); ++k)
              gap += (last[k] - now[k]) * (last[k] - now[k]);
            if (gap / static_cast<double>(now.size()) > tcfg.stage2_continuity_gate) continue;
            Tensor predicted = predict_embedding(track, sent.timestamp, cfg, params);
            Tensor observed = Tensor::row(now);
            losses.push_back(stage2_loss(predicted, observed));
          }
          if (!losses.empty()) {
            Tensor loss = mean(concat_rows(losses));
            const double value = loss.item();
            if (!std::isfinite(value)) {
              report.diverged = true;
              report.message = "stage-2 loss is not finite";
              return report;
            }
            epoch_loss += value;
            ++steps;
            params.zero_grad();
            backward(loss);
            opt.step(mar_params);
          }
        }
        // withheld frames still produce a forecast loss above but leave the
        // tracker stale, so later frames train longer-range predictions
        if (!drop(drop_rng)) tracker.update(sent);
      }
    }
    report.epoch_losses.push_back(steps > 0 ? epoch_loss / steps : 0.0);
  }
  return report;
}

}  // namespace ctce
