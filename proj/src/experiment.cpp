#include "ctce/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ctce {

// ---- RunConfig -----------------------------------------------------------

RunConfig RunConfig::from_kv(const KeyValueFile& kv) {
  RunConfig c;

  KeyValueFile scen;
  for (const auto& [key, value] : kv.entries())
    if (key.rfind("scenario_", 0) == 0) scen.set(key.substr(9), value);
  c.scenario = ScenarioConfig::from_kv(scen);

  c.model.d = static_cast<int>(kv.get_int("d", c.model.d));
  c.model.heads = static_cast<int>(kv.get_int("heads", c.model.heads));
  c.model.k1 = static_cast<int>(kv.get_int("k1", c.model.k1));
  c.model.k2 = static_cast<int>(kv.get_int("k2", c.model.k2));
  c.model.n_tx = static_cast<int>(kv.get_int("n_tx", c.model.n_tx));
  c.model.num_classes = static_cast<int>(kv.get_int("classes", c.model.num_classes));
  c.model.hidden = static_cast<int>(kv.get_int("hidden", c.model.hidden));

  c.seed = static_cast<uint64_t>(kv.get_int("seed", 1));
  c.train_scenes = static_cast<int>(kv.get_int("train_scenes", c.train_scenes));
  c.eval_scenes = static_cast<int>(kv.get_int("eval_scenes", c.eval_scenes));
  c.stage1_epochs = static_cast<int>(kv.get_int("stage1_epochs", c.stage1_epochs));
  c.stage2_epochs = static_cast<int>(kv.get_int("stage2_epochs", c.stage2_epochs));
  c.lr = kv.get_double("lr", c.lr);
  c.weight_decay = kv.get_double("weight_decay", c.weight_decay);
  c.tca_enabled = kv.get_bool("tca", true);
  c.source_mode = guide_source_from_string(kv.get_string("source_mode", "roadside"));
  c.mar_enabled = kv.get_bool("mar", true);
  c.push_reconstructed = kv.get_bool("push_reconstructed", true);
  c.pdr = kv.get_double("pdr", 0.0);
  c.pdr_list = kv.get_double_list("pdr_list", {});
  c.variant = kv.get_string("variant", "ctce");
  c.out_dir = kv.get_string("out_dir", "out");
  c.checkpoint = kv.get_string("checkpoint", "");
  c.validate();
  return c;
}

KeyValueFile RunConfig::to_kv() const {
  KeyValueFile kv;
  const KeyValueFile scen = scenario.to_kv();
  for (const auto& [key, value] : scen.entries()) kv.set("scenario_" + key, value);
  kv.set("d", static_cast<int64_t>(model.d));
  kv.set("heads", static_cast<int64_t>(model.heads));
  kv.set("k1", static_cast<int64_t>(model.k1));
  kv.set("k2", static_cast<int64_t>(model.k2));
  kv.set("n_tx", static_cast<int64_t>(model.n_tx));
  kv.set("classes", static_cast<int64_t>(model.num_classes));
  kv.set("hidden", static_cast<int64_t>(model.hidden));
  kv.set("seed", static_cast<int64_t>(seed));
  kv.set("train_scenes", static_cast<int64_t>(train_scenes));
  kv.set("eval_scenes", static_cast<int64_t>(eval_scenes));
  kv.set("stage1_epochs", static_cast<int64_t>(stage1_epochs));
  kv.set("stage2_epochs", static_cast<int64_t>(stage2_epochs));
  kv.set("lr", lr);
  kv.set("weight_decay", weight_decay);
  kv.set("tca", tca_enabled);
  kv.set("source_mode", to_string(source_mode));
  kv.set("mar", mar_enabled);
  kv.set("push_reconstructed", push_reconstructed);
  kv.set("pdr", pdr);
  std::string list;
  for (size_t i = 0; i < pdr_list.size(); ++i) {
    if (i) list += ",";
    list += std::to_string(pdr_list[i]);
  }
  kv.set("pdr_list", list);
  kv.set("variant", variant);
  kv.set("out_dir", out_dir);
  kv.set("checkpoint", checkpoint);
  return kv;
}

void RunConfig::validate() const {
  scenario.validate();
  if (model.d <= 0 || model.d % 2 != 0 || model.d % model.heads != 0)
    throw std::invalid_argument("RunConfig: d must be even and divisible by heads");
  if (train_scenes <= 0 || eval_scenes <= 0 || stage1_epochs < 0 || stage2_epochs < 0)
    throw std::invalid_argument("RunConfig: scene and epoch counts must be positive");
  if (lr < 0.0 || weight_decay < 0.0) throw std::invalid_argument("RunConfig: negative lr/decay");
  if (pdr < 0.0 || pdr > 1.0) throw std::invalid_argument("RunConfig: pdr outside [0, 1]");
  for (double p : pdr_list)
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("RunConfig: pdr_list outside [0, 1]");
  if (variant != "ctce" && variant != "no_mar" && variant != "no_coop")
    throw std::invalid_argument("RunConfig: unknown variant " + variant);
  if (out_dir.empty()) throw std::invalid_argument("RunConfig: out_dir required");
}

std::string RunConfig::hash() const { return config_hash(to_kv().dump()); }

std::string RunConfig::checkpoint_path() const {
  return checkpoint.empty() ? out_dir + "/model.ckpt" : checkpoint;
}

VariantSpec VariantSpec::named(const std::string& name, const RunConfig& cfg) {
  VariantSpec v;
  v.tca = cfg.tca_enabled;
  v.mode = cfg.source_mode;
  v.push_reconstructed = cfg.push_reconstructed;
  if (name == "ctce") {
    v.mar = cfg.mar_enabled;
  } else if (name == "no_mar") {
    v.mar = false;
  } else if (name == "no_coop") {
    v.cooperative = false;
    v.mar = false;
  } else {
    throw std::invalid_argument("unknown variant: " + name);
  }
  return v;
}

// ---- scene construction --------------------------------------------------

namespace {

Scenario scene_with_seed(const RunConfig& cfg, uint64_t seed) {
  ScenarioConfig sc = cfg.scenario;
  sc.seed = seed;
  return generate_scenario(sc);
}

json box_to_json(const Box3D& b) {
  return json{{"center", {b.center.x(), b.center.y(), b.center.z()}},
              {"dims", {b.dims.x(), b.dims.y(), b.dims.z()}},
              {"yaw", b.yaw},
              {"class", b.class_id},
              {"score", b.score}};
}

int env_thread_cap() {
  if (const char* v = std::getenv("CTCE_THREADS")) {
    const int n = std::atoi(v);
    if (n > 0) return n;
  }
  return 1;
}

bool write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) return false;
  out << text;
  return static_cast<bool>(out);
}

}  // namespace

std::vector<Scenario> make_train_scenes(const RunConfig& cfg) {
  std::vector<Scenario> scenes;
  for (int i = 0; i < cfg.train_scenes; ++i)
    scenes.push_back(scene_with_seed(cfg, cfg.seed * 1000003 + i));
  return scenes;
}

std::vector<Scenario> make_eval_scenes(const RunConfig& cfg) {
  std::vector<Scenario> scenes;
  for (int i = 0; i < cfg.eval_scenes; ++i)
    scenes.push_back(scene_with_seed(cfg, cfg.seed * 1000003 + 700001 + i));
  return scenes;
}

// ---- evaluation ----------------------------------------------------------

Metrics evaluate_variant(const ParameterSet& params, const std::vector<Scenario>& scenes,
                         const ModelConfig& cfg, const VariantSpec& variant, double pdr,
                         uint64_t channel_seed, std::vector<std::string>* detections_jsonl) {
  std::vector<std::vector<Box3D>> all_dets, all_gts;

  for (size_t si = 0; si < scenes.size(); ++si) {
    const Scenario& scene = scenes[si];
    const ChannelConfig channel{pdr, channel_seed + si};

    RoadsidePipeline rsu(cfg, &params, variant.tca);
    EvPipeline ev(cfg, &params, variant.cooperative ? variant.mode : GuideSource::none);
    ev.set_push_reconstructed(variant.push_reconstructed);
    // generous miss tolerance: reconstruction has to survive drop bursts
    MarTracker tracker(cfg, &params, {}, {cfg.tracker_gate, 2, 8, 0.9});

    for (uint32_t f = 0; f < scene.config.frames; ++f) {
      const Pose& ego_pose = scene.ego().pose_at(f);
      std::vector<Box3D> dets;

      if (!variant.cooperative) {
        dets = individual_step(observe(scene, scene.ego(), f), ego_pose, f, cfg, params).boxes;
      } else {
        const Pose& rsu_pose = scene.roadside().pose_at(f);
        QueryFrame sent = rsu.step(observe(scene, scene.roadside(), f), rsu_pose, f);
        std::optional<QueryFrame> received;
        if (std::optional<QueryPacket> wire = transmit(serialize(sent), channel, f)) {
          received = deserialize(*wire);
          if (variant.mar) tracker.update(*received);
        } else if (variant.mar) {
          received = tracker.reconstruct(f);
        }
        dets = ev.step(observe(scene, scene.ego(), f), ego_pose, received, f).detections.boxes;
      }

      std::vector<Box3D> gts = cooperative_ground_truth(scene, f, ego_pose);
      if (detections_jsonl) {
        json line{{"scene", si}, {"frame_id", f}, {"boxes", json::array()}};
        for (const Box3D& b : dets) line["boxes"].push_back(box_to_json(b));
        detections_jsonl->push_back(line.dump());
      }
      all_dets.push_back(std::move(dets));
      all_gts.push_back(std::move(gts));
    }
  }

  EvalConfig ec;
  ec.num_classes = cfg.num_classes;
  return evaluate(all_dets, all_gts, ec);
}

// ---- subcommands ---------------------------------------------------------

namespace {

json metrics_to_json(const Metrics& m) {
  json per_class = json::object();
  for (const auto& [cls, ap] : m.ap_per_class) per_class[std::to_string(cls)] = ap;
  return json{{"mAP", m.map},
              {"mATE", m.mate},
              {"mASE", m.mase},
              {"mAOE", m.maoe},
              {"ap_per_class", per_class}};
}

TrainConfig train_config_for(const RunConfig& cfg, int epochs) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.optim.lr = cfg.lr;
  tc.optim.weight_decay = cfg.weight_decay;
  tc.tca_enabled = cfg.tca_enabled;
  tc.source_mode = cfg.source_mode;
  return tc;
}

// Trains both stages for a given toggle combination; reused by run_ablation.
int train_to(const RunConfig& cfg, ParameterSet& params, json* log) {
  std::vector<Scenario> scenes = make_train_scenes(cfg);
  std::mt19937_64 rng(cfg.seed);
  cfg.model.init_all(params, rng);

  TrainReport r1 = train_stage1(params, scenes, cfg.model, train_config_for(cfg, cfg.stage1_epochs));
  if (log) (*log)["stage1_epoch_losses"] = r1.epoch_losses;
  if (r1.diverged) {
    if (log) (*log)["error"] = r1.message;
    return kExitDiverged;
  }
  TrainReport r2 = train_stage2(params, scenes, cfg.model, train_config_for(cfg, cfg.stage2_epochs));
  if (log) (*log)["stage2_epoch_losses"] = r2.epoch_losses;
  if (r2.diverged) {
    if (log) (*log)["error"] = r2.message;
    return kExitDiverged;
  }
  return kExitOk;
}

struct DivergedError : std::exception {
  const char* what() const noexcept override { return "training diverged"; }
};

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const std::invalid_argument&) {
    return kExitConfigError;
  } catch (const DivergedError&) {
    return kExitDiverged;
  } catch (const fs::filesystem_error&) {
    return kExitIoError;
  } catch (const std::ios_base::failure&) {
    return kExitIoError;
  }
}

bool prepare_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  return !ec;
}

json run_stamp(const RunConfig& cfg) {
  return json{{"config", cfg.to_kv().dump()},
              {"config_hash", cfg.hash()},
              {"seed", cfg.seed}};
}

}  // namespace

int run_train(const RunConfig& cfg) {
  return guarded([&]() -> int {
    cfg.validate();
    if (!prepare_out_dir(cfg)) return kExitIoError;

    ParameterSet params;
    json log = run_stamp(cfg);
    const int rc = train_to(cfg, params, &log);
    if (rc == kExitOk) {
      params.save(cfg.out_dir + "/stage1.ckpt");  // stage-1 weights ride along
      params.save(cfg.checkpoint_path());
    }
    if (!write_text(cfg.out_dir + "/train_log.json", log.dump(2) + "\n")) return kExitIoError;
    return rc;
  });
}

int run_eval(const RunConfig& cfg) {
  return guarded([&]() -> int {
    cfg.validate();
    if (!prepare_out_dir(cfg)) return kExitIoError;
    if (!fs::exists(cfg.checkpoint_path())) return kExitIoError;

    ParameterSet params = ParameterSet::load(cfg.checkpoint_path());
    std::vector<Scenario> scenes = make_eval_scenes(cfg);
    std::vector<std::string> lines;
    Metrics m = evaluate_variant(params, scenes, cfg.model, VariantSpec::named(cfg.variant, cfg),
                                 cfg.pdr, cfg.seed, &lines);

    json out = run_stamp(cfg);
    out["pdr"] = cfg.pdr;
    out["variant"] = cfg.variant;
    out["metrics"] = metrics_to_json(m);
    if (!write_text(cfg.out_dir + "/metrics.json", out.dump(2) + "\n")) return kExitIoError;

    std::string dets;
    for (const std::string& l : lines) dets += l + "\n";
    if (!write_text(cfg.out_dir + "/detections.jsonl", dets)) return kExitIoError;
    return kExitOk;
  });
}

int run_sweep(const RunConfig& cfg) {
  return guarded([&]() -> int {
    cfg.validate();
    if (!prepare_out_dir(cfg)) return kExitIoError;
    if (!fs::exists(cfg.checkpoint_path())) return kExitIoError;

    ParameterSet params = ParameterSet::load(cfg.checkpoint_path());
    std::vector<Scenario> scenes = make_eval_scenes(cfg);
    std::vector<double> pdrs = cfg.pdr_list.empty() ? std::vector<double>{cfg.pdr} : cfg.pdr_list;
    const std::vector<std::string> variants = {"ctce", "no_mar", "no_coop"};

    struct Task {
      double pdr;
      std::string variant;
      Metrics metrics;
    };
    std::vector<Task> tasks;
    for (double p : pdrs)
      for (const std::string& v : variants) tasks.push_back({p, v, {}});

    // the channel seed depends only on the run seed, so every variant and
    // every pdr sees the same underlying drop draws
    std::atomic<size_t> next{0};
    auto worker = [&]() {
      for (size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
        tasks[i].metrics = evaluate_variant(params, scenes, cfg.model,
                                            VariantSpec::named(tasks[i].variant, cfg),
                                            tasks[i].pdr, cfg.seed);
    };
    const int n_threads = std::min<int>(env_thread_cap(), static_cast<int>(tasks.size()));
    if (n_threads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
      for (std::thread& t : pool) t.join();
    }

    std::sort(tasks.begin(), tasks.end(), [](const Task& a, const Task& b) {
      if (a.pdr != b.pdr) return a.pdr < b.pdr;
      return a.variant < b.variant;
    });
    std::string csv = "pdr,variant,mAP,mATE,mASE,mAOE\n";
    char row[160];
    for (const Task& t : tasks) {
      std::snprintf(row, sizeof(row), "%.3f,%s,%.6f,%.6f,%.6f,%.6f\n", t.pdr, t.variant.c_str(),
                    t.metrics.map, t.metrics.mate, t.metrics.mase, t.metrics.maoe);
      csv += row;
    }
    if (!write_text(cfg.out_dir + "/sweep.csv", csv)) return kExitIoError;
    if (!write_text(cfg.out_dir + "/sweep_run.json", run_stamp(cfg).dump(2) + "\n"))
      return kExitIoError;
    return kExitOk;
  });
}

int run_ablation(const RunConfig& cfg) {
  return guarded([&]() -> int {
    cfg.validate();
    if (!prepare_out_dir(cfg)) return kExitIoError;
    std::vector<Scenario> scenes = make_eval_scenes(cfg);

    auto trained = [&](bool tca, GuideSource mode) -> std::pair<ParameterSet, RunConfig> {
      RunConfig sub = cfg;
      sub.tca_enabled = tca;
      sub.source_mode = mode;
      ParameterSet params;
      if (train_to(sub, params, nullptr) != kExitOk) throw DivergedError{};
      return {std::move(params), sub};
    };

    auto score = [&](const ParameterSet& params, const RunConfig& sub, int k2) {
      ModelConfig model = sub.model;
      model.k2 = k2;
      VariantSpec v = VariantSpec::named("ctce", sub);
      return evaluate_variant(params, scenes, model, v, sub.pdr, sub.seed);
    };

    std::string csv = "tca,tgf,k2,mAP,mATE,mASE,mAOE,config_hash\n";
    char row[200];
    auto add_row = [&](bool tca, bool tgf, int k2, const Metrics& m, const std::string& hash) {
      std::snprintf(row, sizeof(row), "%d,%d,%d,%.6f,%.6f,%.6f,%.6f,%s\n", tca ? 1 : 0,
                    tgf ? 1 : 0, k2, m.map, m.mate, m.mase, m.maoe, hash.c_str());
      csv += row;
    };

    auto [p00, c00] = trained(false, GuideSource::none);
    add_row(false, false, cfg.model.k2, score(p00, c00, cfg.model.k2), c00.hash());
    auto [p10, c10] = trained(true, GuideSource::none);
    add_row(true, false, cfg.model.k2, score(p10, c10, cfg.model.k2), c10.hash());
    auto [p01, c01] = trained(false, cfg.source_mode);
    add_row(false, true, cfg.model.k2, score(p01, c01, cfg.model.k2), c01.hash());
    auto [p11, c11] = trained(true, cfg.source_mode);
    add_row(true, true, cfg.model.k2, score(p11, c11, cfg.model.k2), c11.hash());
    for (int k2 : {1, 2, 4})
      if (k2 != cfg.model.k2) add_row(true, true, k2, score(p11, c11, k2), c11.hash());
    if (!write_text(cfg.out_dir + "/ablation.csv", csv)) return kExitIoError;

    std::string modes_csv = "source_mode,mAP,mATE,mASE,mAOE,config_hash\n";
    auto add_mode = [&](const std::string& name, const Metrics& m, const std::string& hash) {
      std::snprintf(row, sizeof(row), "%s,%.6f,%.6f,%.6f,%.6f,%s\n", name.c_str(), m.map, m.mate,
                    m.mase, m.maoe, hash.c_str());
      modes_csv += row;
    };
    add_mode("none", score(p10, c10, cfg.model.k2), c10.hash());
    add_mode(to_string(cfg.source_mode), score(p11, c11, cfg.model.k2), c11.hash());
    for (GuideSource mode : {GuideSource::ego, GuideSource::fused}) {
      if (mode == cfg.source_mode) continue;
      auto [pm, cm] = trained(true, mode);
      add_mode(to_string(mode), score(pm, cm, cfg.model.k2), cm.hash());
    }
    if (!write_text(cfg.out_dir + "/source_mode.csv", modes_csv)) return kExitIoError;
    if (!write_text(cfg.out_dir + "/ablation_run.json", run_stamp(cfg).dump(2) + "\n"))
      return kExitIoError;
    return kExitOk;
  });
}

int run_gen_scenario(const RunConfig& cfg) {
  return guarded([&]() -> int {
    cfg.validate();
    if (!prepare_out_dir(cfg)) return kExitIoError;

    ScenarioConfig sc = cfg.scenario;
    sc.seed = cfg.seed;
    Scenario scene = generate_scenario(sc);
    if (!write_text(cfg.out_dir + "/scenario.txt", sc.to_kv().dump())) return kExitIoError;

    std::string rsu_lines, ego_lines, gt_lines;
    for (uint32_t f = 0; f < sc.frames; ++f) {
      rsu_lines += observations_to_json_line(f, observe(scene, scene.roadside(), f)) + "\n";
      ego_lines += observations_to_json_line(f, observe(scene, scene.ego(), f)) + "\n";
      json gt{{"frame_id", f}, {"boxes", json::array()}};
      for (const Box3D& b : ground_truth_at(scene.tracks, f)) gt["boxes"].push_back(box_to_json(b));
      gt_lines += gt.dump() + "\n";
    }
    if (!write_text(cfg.out_dir + "/roadside_obs.jsonl", rsu_lines)) return kExitIoError;
    if (!write_text(cfg.out_dir + "/ego_obs.jsonl", ego_lines)) return kExitIoError;
    if (!write_text(cfg.out_dir + "/ground_truth.jsonl", gt_lines)) return kExitIoError;
    return kExitOk;
  });
}

}  // namespace ctce
