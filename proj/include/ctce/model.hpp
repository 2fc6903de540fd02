#pragma once

#include <random>

#include "ctce/nn.hpp"

namespace ctce {

// Widths and hyperparameters shared by every learned block in the pipeline.
// The paper-level history depths k1/k2 and the transmit cap live here too so
// one struct fully determines the parameter shapes.
struct ModelConfig {
  int d = 32;            // query embedding width
  int heads = 4;
  int k1 = 4;            // roadside history depth
  int k2 = 4;            // vehicle-side roadside history depth
  int n_tx = 256;        // transmitted query cap
  int num_classes = 3;
  int hidden = 64;
  int pe_dim = 8;        // sinusoidal width per axis for position embeddings
  int te_dim = 8;        // sinusoidal width for time embeddings
  double enc_base = 10000.0;
  double gate_radius = 2.0;      // fusion match gate, metres
  double tracker_gate = 2.0;     // MAR association gate, metres

  static constexpr int obs_features = 9;  // center 3, dims 3, yaw sin/cos, confidence

  MlpSpec generator_spec() const { return {{obs_features, hidden, d}, Activation::relu}; }
  MlpSpec unifier_spec() const { return {{d + 3 * pe_dim, hidden, d}, Activation::relu}; }
  MlpSpec pair_spec() const { return {{2 * d, hidden, d}, Activation::relu}; }
  MlpSpec motion_spec() const { return {{d + te_dim + 12, hidden, d}, Activation::relu}; }
  MlpSpec cls_spec() const { return {{d, hidden, num_classes}, Activation::relu}; }
  MlpSpec reg_spec() const { return {{d, hidden, 8}, Activation::relu}; }

  // Stage-1 parameters (everything except the MAR predictor).
  void init_stage1(ParameterSet& params, std::mt19937_64& rng) const;
  // Stage-2 parameters: the MAR embedding-prediction attention.
  void init_mar(ParameterSet& params, std::mt19937_64& rng) const;
  void init_all(ParameterSet& params, std::mt19937_64& rng) const;

  bool is_mar_path(const std::string& param_path) const;
};

}  // namespace ctce
