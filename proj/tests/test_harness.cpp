#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ctce/experiment.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace ctce;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_run(const std::string& out_dir) {
  RunConfig cfg;
  cfg.scenario.frames = 8;
  cfg.scenario.num_objects = 4;
  cfg.scenario.region = 25.0;
  cfg.model.d = 8;
  cfg.model.heads = 2;
  cfg.model.hidden = 16;
  cfg.model.k1 = 2;
  cfg.model.k2 = 2;
  cfg.model.n_tx = 12;
  cfg.seed = 5;
  cfg.train_scenes = 2;
  cfg.eval_scenes = 2;
  cfg.stage1_epochs = 2;
  cfg.stage2_epochs = 2;
  cfg.out_dir = out_dir;
  return cfg;
}

std::string fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ctce_harness_" + name);
  fs::remove_all(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("run config round-trips through key-value form") {
  RunConfig cfg = tiny_run("/tmp/nowhere");
  cfg.pdr = 0.25;
  cfg.pdr_list = {0.0, 0.5};
  cfg.variant = "no_mar";
  cfg.tca_enabled = false;
  cfg.source_mode = GuideSource::fused;

  RunConfig back = RunConfig::from_kv(cfg.to_kv());
  CHECK(back.hash() == cfg.hash());
  CHECK(back.pdr == cfg.pdr);
  CHECK(back.pdr_list == cfg.pdr_list);
  CHECK(back.variant == "no_mar");
  CHECK_FALSE(back.tca_enabled);
  CHECK(back.source_mode == GuideSource::fused);
  CHECK(back.model.d == 8);
  CHECK(back.scenario.frames == 8);
}

TEST_CASE("invalid configurations are rejected with the config exit code") {
  RunConfig bad = tiny_run(fresh_dir("bad"));
  bad.variant = "sideways";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK(run_train(bad) == kExitConfigError);

  RunConfig odd = tiny_run(fresh_dir("odd"));
  odd.model.d = 7;  // not divisible by heads, not even
  CHECK(run_train(odd) == kExitConfigError);

  RunConfig drop = tiny_run(fresh_dir("drop"));
  drop.pdr = 1.5;
  CHECK(run_eval(drop) == kExitConfigError);
}

TEST_CASE("eval and sweep require an existing checkpoint") {
  RunConfig cfg = tiny_run(fresh_dir("nockpt"));
  CHECK(run_eval(cfg) == kExitIoError);
  CHECK(run_sweep(cfg) == kExitIoError);
}

TEST_CASE("train, eval, and sweep produce consistent reproducible artifacts") {
  RunConfig cfg = tiny_run(fresh_dir("full"));
  REQUIRE(run_train(cfg) == kExitOk);
  CHECK(fs::exists(cfg.out_dir + "/model.ckpt"));
  CHECK(fs::exists(cfg.out_dir + "/stage1.ckpt"));
  CHECK(fs::exists(cfg.out_dir + "/train_log.json"));

  // training is deterministic: a second run writes identical weights
  RunConfig rerun = cfg;
  rerun.out_dir = fresh_dir("full_rerun");
  REQUIRE(run_train(rerun) == kExitOk);
  CHECK(slurp(cfg.out_dir + "/model.ckpt") == slurp(rerun.out_dir + "/model.ckpt"));

  REQUIRE(run_eval(cfg) == kExitOk);
  const std::string metrics1 = slurp(cfg.out_dir + "/metrics.json");
  REQUIRE(run_eval(cfg) == kExitOk);
  CHECK(slurp(cfg.out_dir + "/metrics.json") == metrics1);
  CHECK(count_lines(slurp(cfg.out_dir + "/detections.jsonl")) ==
        cfg.eval_scenes * static_cast<int>(cfg.scenario.frames));

  // one sweep row per (pdr, variant)
  RunConfig sweep = cfg;
  sweep.pdr_list = {0.0, 0.3, 0.6};
  REQUIRE(run_sweep(sweep) == kExitOk);
  const std::string csv = slurp(cfg.out_dir + "/sweep.csv");
  CHECK(count_lines(csv) == 1 + 3 * 3);
  CHECK(csv.rfind("pdr,variant,mAP,mATE,mASE,mAOE\n", 0) == 0);

  // the pdr=0 ctce sweep row reproduces run_eval's metrics at pdr 0
  std::istringstream rows(csv);
  std::string line;
  std::getline(rows, line);  // header
  std::getline(rows, line);  // 0.000,ctce,...
  REQUIRE(line.rfind("0.000,ctce,", 0) == 0);
  const double csv_map = std::stod(line.substr(11));
  const double eval_map = nlohmann::json::parse(metrics1)["metrics"]["mAP"].get<double>();
  CHECK(std::abs(csv_map - eval_map) < 5e-7);  // csv rounds to six decimals
}

TEST_CASE("sweep results do not depend on the worker count") {
  RunConfig cfg = tiny_run(fresh_dir("threads1"));
  REQUIRE(run_train(cfg) == kExitOk);
  cfg.pdr_list = {0.0, 0.5};
  REQUIRE(run_sweep(cfg) == kExitOk);
  const std::string serial = slurp(cfg.out_dir + "/sweep.csv");

  RunConfig par = cfg;
  par.out_dir = fresh_dir("threads4");
  par.checkpoint = cfg.out_dir + "/model.ckpt";
  setenv("CTCE_THREADS", "4", 1);
  REQUIRE(run_sweep(par) == kExitOk);
  unsetenv("CTCE_THREADS");
  CHECK(slurp(par.out_dir + "/sweep.csv") == serial);
}

TEST_CASE("gen-scenario dumps observations and ground truth") {
  RunConfig cfg = tiny_run(fresh_dir("gen"));
  REQUIRE(run_gen_scenario(cfg) == kExitOk);
  for (const char* name : {"scenario.txt", "roadside_obs.jsonl", "ego_obs.jsonl",
                           "ground_truth.jsonl"})
    CHECK(fs::exists(cfg.out_dir + "/" + name));
  CHECK(count_lines(slurp(cfg.out_dir + "/ground_truth.jsonl")) ==
        static_cast<int>(cfg.scenario.frames));
}

TEST_CASE("ablation table covers the toggle grid and history depths") {
  RunConfig cfg = tiny_run(fresh_dir("ablate"));
  cfg.stage1_epochs = 1;
  cfg.stage2_epochs = 1;
  REQUIRE(run_ablation(cfg) == kExitOk);

  const std::string csv = slurp(cfg.out_dir + "/ablation.csv");
  CHECK(csv.rfind("tca,tgf,k2,mAP,mATE,mASE,mAOE,config_hash\n", 0) == 0);
  for (const char* prefix : {"\n0,0,2,", "\n1,0,2,", "\n0,1,2,", "\n1,1,2,", "\n1,1,1,", "\n1,1,4,"})
    CHECK(csv.find(prefix) != std::string::npos);

  const std::string modes = slurp(cfg.out_dir + "/source_mode.csv");
  for (const char* prefix : {"\nnone,", "\nroadside,", "\nego,", "\nfused,"})
    CHECK(modes.find(prefix) != std::string::npos);

  // every row's config hash is reproducible from the embedded toggles
  RunConfig sub = cfg;
  sub.tca_enabled = true;
  sub.source_mode = GuideSource::roadside;
  CHECK(csv.find(sub.hash()) != std::string::npos);
  sub.tca_enabled = false;
  sub.source_mode = GuideSource::none;
  CHECK(csv.find(sub.hash()) != std::string::npos);
}

TEST_CASE("variants share the channel's drop pattern per seed") {
  RunConfig cfg = tiny_run(fresh_dir("shared"));
  // identical seeds produce identical drop decisions regardless of variant
  for (uint32_t f = 0; f < 50; ++f) {
    const double draw = channel_draw(cfg.seed, f);
    CHECK(channel_drops({0.4, cfg.seed}, f) == (draw < 0.4));
    CHECK(channel_drops({0.7, cfg.seed}, f) == (draw < 0.7));
  }
}
