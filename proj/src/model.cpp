#include "ctce/model.hpp"

namespace ctce {

void ModelConfig::init_stage1(ParameterSet& params, std::mt19937_64& rng) const {
  init_mlp(params, "rsu_gen", generator_spec(), rng);
  init_mlp(params, "ego_gen", generator_spec(), rng);
  init_attention(params, "tca", d, rng);
  init_mlp(params, "align", unifier_spec(), rng);
  init_mlp(params, "pair", pair_spec(), rng);
  init_mlp(params, "motion", motion_spec(), rng);
  init_attention(params, "tgf", d, rng);
  init_mlp(params, "head_cls", cls_spec(), rng);
  init_mlp(params, "head_reg", reg_spec(), rng);
}

void ModelConfig::init_mar(ParameterSet& params, std::mt19937_64& rng) const {
  init_attention(params, "mar", d, rng);
  // The forecaster is residual around the newest stored embedding; a zero
  // output projection makes the fresh model start exactly at the persistence
  // baseline.
  for (double& v : params.at("mar/wo").mutable_values()) v = 0.0;
}

void ModelConfig::init_all(ParameterSet& params, std::mt19937_64& rng) const {
  init_stage1(params, rng);
  init_mar(params, rng);
}

bool ModelConfig::is_mar_path(const std::string& param_path) const {
  return param_path.rfind("mar/", 0) == 0;
}

}  // namespace ctce
