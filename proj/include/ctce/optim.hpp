#pragma once

#include <map>
#include <string>
#include <vector>

#include "ctce/nn.hpp"

namespace ctce {

// AdamW with decoupled weight decay and optional cosine-annealed learning rate.
class AdamW {
 public:
  struct Config {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    int cosine_total_steps = 0;  // 0 disables the schedule
  };

  explicit AdamW(Config cfg) : cfg_(cfg) {}

  // Applies one step using the gradients currently stored on the parameters.
  void step(ParameterSet& params);

  double current_lr() const;
  int steps_taken() const { return t_; }

 private:
  Config cfg_;
  int t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

}  // namespace ctce
