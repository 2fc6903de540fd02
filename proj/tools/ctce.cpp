#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "ctce/experiment.hpp"

using namespace ctce;

namespace {

struct CliOverrides {
  std::string config_path;
  std::string out_dir;
  std::string checkpoint;
  std::string variant;
  std::string pdr_list;
  int64_t seed = -1;
  double pdr = -1.0;
};

void add_common_flags(CLI::App* cmd, CliOverrides& o) {
  cmd->add_option("--config", o.config_path, "run configuration file (key = value)");
  cmd->add_option("--seed", o.seed, "override the run seed");
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--checkpoint", o.checkpoint, "parameter checkpoint path");
  cmd->add_option("--pdr", o.pdr, "packet drop rate");
  cmd->add_option("--pdr-list", o.pdr_list, "comma-separated packet drop rates");
  cmd->add_option("--variant", o.variant, "pipeline variant: ctce | no_mar | no_coop");
}

int load_config(const CliOverrides& o, RunConfig& cfg) {
  try {
    KeyValueFile kv;
    if (!o.config_path.empty()) kv = KeyValueFile::parse_file(o.config_path);
    if (o.seed >= 0) kv.set("seed", o.seed);
    if (!o.out_dir.empty()) kv.set("out_dir", o.out_dir);
    if (!o.checkpoint.empty()) kv.set("checkpoint", o.checkpoint);
    if (o.pdr >= 0.0) kv.set("pdr", o.pdr);
    if (!o.pdr_list.empty()) kv.set("pdr_list", o.pdr_list);
    if (!o.variant.empty()) kv.set("variant", o.variant);
    cfg = RunConfig::from_kv(kv);
    return kExitOk;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  }
}

int dispatch(const std::string& name, const RunConfig& cfg) {
  if (name == "train") return run_train(cfg);
  if (name == "eval") return run_eval(cfg);
  if (name == "sweep") return run_sweep(cfg);
  if (name == "ablate") return run_ablation(cfg);
  if (name == "gen-scenario") return run_gen_scenario(cfg);
  return kExitConfigError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cooperative detection pipeline harness"};
  app.require_subcommand(1);

  CliOverrides overrides;
  const char* names[] = {"train", "eval", "sweep", "ablate", "gen-scenario"};
  const char* descriptions[] = {
      "two-stage training, writes checkpoints and a training log",
      "evaluate a checkpoint, writes metrics.json and detections.jsonl",
      "pdr x variant sweep, writes sweep.csv",
      "module toggle and history-depth ablations, writes ablation.csv",
      "dump a synthetic scenario's observations and ground truth",
  };
  for (size_t i = 0; i < std::size(names); ++i)
    add_common_flags(app.add_subcommand(names[i], descriptions[i]), overrides);

  CLI11_PARSE(app, argc, argv);

  RunConfig cfg;
  const int rc = load_config(overrides, cfg);
  if (rc != kExitOk) return rc;

  const int result = dispatch(app.get_subcommands().front()->get_name(), cfg);
  if (result == kExitConfigError) std::fprintf(stderr, "invalid configuration\n");
  if (result == kExitDiverged) std::fprintf(stderr, "training diverged\n");
  if (result == kExitIoError) std::fprintf(stderr, "i/o failure\n");
  return result;
}
