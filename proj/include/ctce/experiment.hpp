#pragma once

#include "ctce/channel.hpp"
#include "ctce/metrics.hpp"
#include "ctce/training.hpp"

namespace ctce {

// Exit codes shared by the library entry points and the CLI.
constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitIoError = 4;

// Full experiment description. Everything that influences results lives here
// and is dumped (with its hash and seed) next to every output artifact.
struct RunConfig {
  ScenarioConfig scenario;   // template; per-scene seeds are derived from `seed`
  ModelConfig model;
  uint64_t seed = 1;
  int train_scenes = 40;
  int eval_scenes = 10;
  int stage1_epochs = 4;
  int stage2_epochs = 4;
  double lr = 2e-4;
  double weight_decay = 0.01;
  bool tca_enabled = true;
  GuideSource source_mode = GuideSource::roadside;
  bool mar_enabled = true;
  bool push_reconstructed = true;
  double pdr = 0.0;
  std::vector<double> pdr_list;
  std::string variant = "ctce";  // ctce | no_mar | no_coop
  std::string out_dir = "out";
  std::string checkpoint;        // defaults to <out_dir>/model.ckpt

  static RunConfig from_kv(const KeyValueFile& kv);
  KeyValueFile to_kv() const;
  void validate() const;
  std::string hash() const;  // over the resolved dump
  std::string checkpoint_path() const;
};

// How one evaluation run is wired.
struct VariantSpec {
  bool cooperative = true;
  bool mar = true;
  bool tca = true;
  GuideSource mode = GuideSource::roadside;
  bool push_reconstructed = true;

  static VariantSpec named(const std::string& name, const RunConfig& cfg);
};

// Runs the deployed pipeline (wire format + lossy channel + optional MAR)
// over `scenes` and scores it against union-visibility ground truth in the
// EV frame. `detections_jsonl`, when given, receives one line per frame.
Metrics evaluate_variant(const ParameterSet& params, const std::vector<Scenario>& scenes,
                         const ModelConfig& cfg, const VariantSpec& variant, double pdr,
                         uint64_t channel_seed, std::vector<std::string>* detections_jsonl = nullptr);

std::vector<Scenario> make_train_scenes(const RunConfig& cfg);
std::vector<Scenario> make_eval_scenes(const RunConfig& cfg);

// Subcommand entry points; each writes its artifacts under cfg.out_dir and
// returns one of the exit codes above.
int run_train(const RunConfig& cfg);
int run_eval(const RunConfig& cfg);
int run_sweep(const RunConfig& cfg);
int run_ablation(const RunConfig& cfg);
int run_gen_scenario(const RunConfig& cfg);

}  // namespace ctce
