#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ctce/tensor.hpp"

namespace ctce {

enum class Activation { relu, gelu, none };

// Layer widths include input and output, e.g. {9, 64, 32} is one hidden layer.
// The activation applies after every layer except the last.
struct MlpSpec {
  std::vector<int> widths;
  Activation act = Activation::relu;

  int in_width() const { return widths.front(); }
  int out_width() const { return widths.back(); }
};

// Named map of trainable tensors with deterministic iteration order.
class ParameterSet {
 public:
  Tensor& add(const std::string& path, Tensor t);
  Tensor& at(const std::string& path);
  const Tensor& at(const std::string& path) const;
  bool has(const std::string& path) const { return items_.count(path) > 0; }

  void zero_grad();
  size_t size() const { return items_.size(); }
  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  // Deep copy (values only, fresh tensors, requires_grad preserved).
  ParameterSet clone() const;

  void save(const std::string& path) const;
  static ParameterSet load(const std::string& path);

 private:
  std::map<std::string, Tensor> items_;
};

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init for weights and biases.
void init_mlp(ParameterSet& params, const std::string& prefix, const MlpSpec& spec,
              std::mt19937_64& rng);
void init_attention(ParameterSet& params, const std::string& prefix, int dim,
                    std::mt19937_64& rng);

Tensor mlp_forward(const Tensor& x, const MlpSpec& spec, const ParameterSet& params,
                   const std::string& prefix);

// Scaled dot-product multi-head cross-attention, projections wq/wk/wv/wo (dim x dim).
Tensor mha_cross_attention(const Tensor& queries, const Tensor& keys, const Tensor& values,
                           int heads, const ParameterSet& params, const std::string& prefix);

// Interleaved sin/cos at geometric frequencies base^(-2i/dim); returns 1 x dim.
Tensor sinusoidal_encode(double t, int dim, double base);

// Per-axis sinusoidal encoding of a 3-D point, dim_per_axis each; returns 1 x 3*dim_per_axis.
Tensor sinusoidal_encode_point(double x, double y, double z, int dim_per_axis, double base);

}  // namespace ctce
