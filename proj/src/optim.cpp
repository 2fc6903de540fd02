#include "ctce/optim.hpp"

#include <cmath>

namespace ctce {

double AdamW::current_lr() const {
  if (cfg_.cosine_total_steps <= 0) return cfg_.lr;
  const double frac =
      std::min(1.0, static_cast<double>(t_) / static_cast<double>(cfg_.cosine_total_steps));
  return cfg_.lr * 0.5 * (1.0 + std::cos(M_PI * frac));
}

void AdamW::step(ParameterSet& params) {
  const double lr = current_lr();
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (auto& [path, p] : params) {
    const auto& g = p.grad();
    auto& m = m_[path];
    auto& v = v_[path];
    if (m.size() != g.size()) m.assign(g.size(), 0.0);
    if (v.size() != g.size()) v.assign(g.size(), 0.0);
    auto& w = p.mutable_values();
    for (size_t i = 0; i < g.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w[i]);
    }
  }
}

}  // namespace ctce
