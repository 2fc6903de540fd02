#include "ctce/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace ctce {

namespace {
size_t checked_size(int rows, int cols) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("tensor: negative dimension");
  return static_cast<size_t>(rows) * static_cast<size_t>(cols);
}
}  // namespace

Tensor::Tensor(int rows, int cols, std::vector<double> values, bool requires_grad) {
  if (values.size() != checked_size(rows, cols))
    throw std::invalid_argument("tensor: value count does not match shape");
  impl_ = std::make_shared<TensorImpl>();
  impl_->rows = rows;
  impl_->cols = cols;
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
  return Tensor(rows, cols, std::vector<double>(checked_size(rows, cols), 0.0), requires_grad);
}

Tensor Tensor::full(int rows, int cols, double v, bool requires_grad) {
  return Tensor(rows, cols, std::vector<double>(checked_size(rows, cols), v), requires_grad);
}

Tensor Tensor::identity(int n) {
  Tensor t = zeros(n, n);
  for (int i = 0; i < n; ++i) t.set(i, i, 1.0);
  return t;
}

Tensor Tensor::row(const std::vector<double>& v, bool requires_grad) {
  return Tensor(1, static_cast<int>(v.size()), v, requires_grad);
}

Tensor Tensor::col(const std::vector<double>& v, bool requires_grad) {
  return Tensor(static_cast<int>(v.size()), 1, v, requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return Tensor(1, 1, {v}, requires_grad); }

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("item: tensor is not scalar");
  return impl_->values[0];
}

const std::vector<double>& Tensor::grad() const {
  if (impl_->grad.size() != impl_->values.size())
    impl_->grad.assign(impl_->values.size(), 0.0);
  return impl_->grad;
}

std::vector<double> Tensor::row_values(int r) const {
  auto first = impl_->values.begin() + static_cast<size_t>(r) * impl_->cols;
  return std::vector<double>(first, first + impl_->cols);
}

Tensor Tensor::detach() const { return Tensor(impl_->rows, impl_->cols, impl_->values, false); }

void Tensor::zero_grad() { impl_->grad.assign(impl_->values.size(), 0.0); }

Tensor make_op(int rows, int cols, std::vector<double> values, std::vector<Tensor> parents,
               std::function<void(TensorImpl&)> backward_fn) {
  Tensor out(rows, cols, std::move(values));
  bool rg = false;
  for (const auto& p : parents) {
    rg = rg || p.requires_grad();
    out.impl_->parents.push_back(p.impl());
  }
  out.impl_->requires_grad = rg;
  if (rg) out.impl_->backward_fn = std::move(backward_fn);
  return out;
}

namespace {

std::vector<double>& grad_of(TensorImpl& t) {
  if (t.grad.size() != t.values.size()) t.grad.assign(t.values.size(), 0.0);
  return t.grad;
}

void topo_collect(TensorImpl* node, std::unordered_set<TensorImpl*>& seen,
                  std::vector<TensorImpl*>& order) {
  if (!node->requires_grad || seen.count(node)) return;
  seen.insert(node);
  for (auto& p : node->parents) topo_collect(p.get(), seen, order);
  order.push_back(node);
}

}  // namespace

void backward(const Tensor& scalar_loss) {
  if (scalar_loss.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
  if (!scalar_loss.requires_grad()) return;
  std::unordered_set<TensorImpl*> seen;
  std::vector<TensorImpl*> order;
  topo_collect(scalar_loss.impl().get(), seen, order);
  grad_of(*scalar_loss.impl()) = {1.0};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

// --- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions disagree");
  const int r = a.rows(), k = a.cols(), c = b.cols();
  std::vector<double> out(static_cast<size_t>(r) * c, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (int i = 0; i < r; ++i)
    for (int p = 0; p < k; ++p) {
      const double aip = av[static_cast<size_t>(i) * k + p];
      if (aip == 0.0) continue;
      for (int j = 0; j < c; ++j)
        out[static_cast<size_t>(i) * c + j] += aip * bv[static_cast<size_t>(p) * c + j];
    }
  return make_op(r, c, std::move(out), {a, b}, [r, k, c](TensorImpl& o) {
    auto& pa = *o.parents[0];
    auto& pb = *o.parents[1];
    const auto& go = o.grad;
    if (pa.requires_grad) {
      auto& ga = grad_of(pa);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) {
          const double g = go[static_cast<size_t>(i) * c + j];
          if (g == 0.0) continue;
          for (int p = 0; p < k; ++p)
            ga[static_cast<size_t>(i) * k + p] += g * pb.values[static_cast<size_t>(p) * c + j];
        }
    }
    if (pb.requires_grad) {
      auto& gb = grad_of(pb);
      for (int i = 0; i < r; ++i)
        for (int p = 0; p < k; ++p) {
          const double av_ = pa.values[static_cast<size_t>(i) * k + p];
          if (av_ == 0.0) continue;
          for (int j = 0; j < c; ++j)
            gb[static_cast<size_t>(p) * c + j] += av_ * o.grad[static_cast<size_t>(i) * c + j];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  const int r = a.rows(), c = a.cols();
  std::vector<double> out(static_cast<size_t>(r) * c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[static_cast<size_t>(j) * r + i] = a.at(i, j);
  return make_op(c, r, std::move(out), {a}, [r, c](TensorImpl& o) {
    auto& p = *o.parents[0];
    if (!p.requires_grad) return;
    auto& g = grad_of(p);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j)
        g[static_cast<size_t>(i) * c + j] += o.grad[static_cast<size_t>(j) * r + i];
  });
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(who) + ": shape mismatch");
}

Tensor binary_elemwise(const Tensor& a, const Tensor& b, const char* who,
                       double (*fwd)(double, double),
                       void (*bwd)(double, double, double, double&, double&)) {
  check_same_shape(a, b, who);
  std::vector<double> out(a.values().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.values()[i], b.values()[i]);
  return make_op(a.rows(), a.cols(), std::move(out), {a, b}, [bwd](TensorImpl& o) {
    auto& pa = *o.parents[0];
    auto& pb = *o.parents[1];
    for (size_t i = 0; i < o.values.size(); ++i) {
      double da = 0.0, db = 0.0;
      bwd(pa.values[i], pb.values[i], o.grad[i], da, db);
      if (pa.requires_grad) grad_of(pa)[i] += da;
      if (pb.requires_grad) grad_of(pb)[i] += db;
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elemwise(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elemwise(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elemwise(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g * y;
        db = g * x;
      });
}

namespace {

Tensor unary_elemwise(const Tensor& a, double (*fwd)(double), double (*dfdx)(double)) {
  std::vector<double> out(a.values().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.values()[i]);
  return make_op(a.rows(), a.cols(), std::move(out), {a}, [dfdx](TensorImpl& o) {
    auto& p = *o.parents[0];
    if (!p.requires_grad) return;
    auto& g = grad_of(p);
    for (size_t i = 0; i < o.values.size(); ++i) g[i] += o.grad[i] * dfdx(p.values[i]);
  });
}

}  // namespace

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.values().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
  return make_op(a.rows(), a.cols(), std::move(out), {a}, [c](TensorImpl& o) {
    auto& p = *o.parents[0];
    if (!p.requires_grad) return;
    auto& g = grad_of(p);
    for (size_t i = 0; i < o.values.size(); ++i) g[i] += o.grad[i] * c;
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.values().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + c;
  return make_op(a.rows(), a.cols(), std::move(out), {a}, [](TensorImpl& o) {
    auto& p = *o.parents[0];
    if (!p.requires_grad) return;
    auto& g = grad_of(p);
    for (size_t i = 0; i < o.values.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
  if (v.rows() != 1 || v.cols() != a.cols())
    throw std::invalid_argument("add_rowvec: vector must be 1 x cols");
  const int r = a.rows(), c = a.cols();
  std::vector<double> out(a.values().size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<size_t>(i) * c + j] = a.at(i, j) + v.at(0, j);
  return make_op(r, c, std::move(out), {a, v}, [r, c](TensorImpl& o) {
    auto& pa = *o.parents[0];
    auto& pv = *o.parents[1];
    if (pa.requires_grad) {
      auto& g = grad_of(pa);
      for (size_t i = 0; i < o.values.size(); ++i) g[i] += o.grad[i];
    }
    if (pv.requires_grad) {
      auto& g = grad_of(pv);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) g[j] += o.grad[static_cast<size_t>(i) * c + j];
    }
  });
}

Tensor relu(const Tensor& a) {
  return unary_elemwise(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
  // exact (erf-based) form
  return unary_elemwise(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); },
      [](double x) {
        const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
        return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) + x * phi;
      });
}

Tensor sigmoid(const Tensor& a) {
  return unary_elemwise(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double x) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 - s);
      });
}

Tensor softplus(const Tensor& a) {
  return unary_elemwise(
      a,
      [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
      [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor exp_elem(const Tensor& a) {
  return unary_elemwise(a, [](double x) { return std::exp(x); },
                        [](double x) { return std::exp(x); });
}

Tensor log_elem(const Tensor& a) {
  return unary_elemwise(a, [](double x) { return std::log(x); },
                        [](double x) { return 1.0 / x; });
}

Tensor pow_elem(const Tensor& a, double p) {
  std::vector<double> out(a.values().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::pow(a.values()[i], p);
  return make_op(a.rows(), a.cols(), std::move(out), {a}, [p](TensorImpl& o) {
    auto& pa = *o.parents[0];
    if (!pa.requires_grad) return;
    auto& g = grad_of(pa);
    for (size_t i = 0; i < o.values.size(); ++i)
      g[i] += o.grad[i] * p * std::pow(pa.values[i], p - 1.0);
  });
}

Tensor abs_elem(const Tensor& a) {
  return unary_elemwise(
      a, [](double x) { return std::fabs(x); },
      [](double x) { return x >= 0.0 ? 1.0 : -1.0; });
}

Tensor huber_elem(const Tensor& a, double delta) {
  if (delta <= 0.0) throw std::invalid_argument("huber_elem: delta must be > 0");
  std::vector<double> out(a.values().size());
  for (size_t i = 0; i < out.size(); ++i) {
    const double x = a.values()[i];
    const double ax = std::fabs(x);
    out[i] = ax <= delta ? 0.5 * x * x / delta : ax - 0.5 * delta;
  }
  return make_op(a.rows(), a.cols(), std::move(out), {a}, [delta](TensorImpl& o) {
    auto& pa = *o.parents[0];
    if (!pa.requires_grad) return;
    auto& g = grad_of(pa);
    for (size_t i = 0; i < o.values.size(); ++i) {
      const double x = pa.values[i];
      const double d = std::fabs(x) <= delta ? x / delta : (x >= 0.0 ? 1.0 : -1.0);
      g[i] += o.grad[i] * d;
    }
  });
}

Tensor softmax_rows(const Tensor& a) {
  const int r = a.rows(), c = a.cols();
  std::vector<double> out(a.values().size());
  for (int i = 0; i < r; ++i) {
    double mx = a.at(i, 0);
    for (int j = 1; j < c; ++j) mx = std::max(mx, a.at(i, j));
    double s = 0.0;
    for (int j = 0; j < c; ++j) {
      const double e = std::exp(a.at(i, j) - mx);
      out[static_cast<size_t>(i) * c + j] = e;
      s += e;
    }
    for (int j = 0; j < c; ++j) out[static_cast<size_t>(i) * c + j] /= s;
  }
  return make_op(r, c, std::move(out), {a}, [r, c](TensorImpl& o) {
    auto& p = *o.parents[0];
    if (!p.requires_grad) return;
    auto& g = grad_of(p);
    for (int i = 0; i < r; ++i) {
      double dot = 0.0;
      for (int j = 0; j < c; ++j)
        dot += o.grad[static_cast<size_t>(i) * c + j] * o.values[static_cast<size_t>(i) * c + j];
      for (int j = 0; j < c; ++j) {
        const size_t idx = static_cast<size_t>(i) * c + j;
        g[idx] += o.values[idx] * (o.grad[idx] - dot);
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_op(1, 1, {s}, {a}, [](TensorImpl& o) {
    auto& p = *o.parents[0];
    if (!p.requires_grad) return;
    auto& g = grad_of(p);
    for (size_t i = 0; i < g.size(); ++i) g[i] += o.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.numel());
  return scale(sum(a), 1.0 / n);
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
  const int c = parts[0].cols();
  int r = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) throw std::invalid_argument("concat_rows: column mismatch");
    r += p.rows();
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(r) * c);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  std::vector<int> part_rows;
  for (const auto& p : parts) part_rows.push_back(p.rows());
  return make_op(r, c, std::move(out), parts, [part_rows, c](TensorImpl& o) {
    size_t off = 0;
    for (size_t k = 0; k < o.parents.size(); ++k) {
      auto& p = *o.parents[k];
      const size_t n = static_cast<size_t>(part_rows[k]) * c;
      if (p.requires_grad) {
        auto& g = grad_of(p);
        for (size_t i = 0; i < n; ++i) g[i] += o.grad[off + i];
      }
      off += n;
    }
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: row mismatch");
  const int r = a.rows(), ca = a.cols(), cb = b.cols();
  std::vector<double> out(static_cast<size_t>(r) * (ca + cb));
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < ca; ++j) out[static_cast<size_t>(i) * (ca + cb) + j] = a.at(i, j);
    for (int j = 0; j < cb; ++j) out[static_cast<size_t>(i) * (ca + cb) + ca + j] = b.at(i, j);
  }
  return make_op(r, ca + cb, std::move(out), {a, b}, [r, ca, cb](TensorImpl& o) {
    auto& pa = *o.parents[0];
    auto& pb = *o.parents[1];
    for (int i = 0; i < r; ++i) {
      if (pa.requires_grad) {
        auto& g = grad_of(pa);
        for (int j = 0; j < ca; ++j)
          g[static_cast<size_t>(i) * ca + j] += o.grad[static_cast<size_t>(i) * (ca + cb) + j];
      }
      if (pb.requires_grad) {
        auto& g = grad_of(pb);
        for (int j = 0; j < cb; ++j)
          g[static_cast<size_t>(i) * cb + j] +=
              o.grad[static_cast<size_t>(i) * (ca + cb) + ca + j];
      }
    }
  });
}

Tensor slice_cols(const Tensor& a, int from, int len) {
  if (from < 0 || len <= 0 || from + len > a.cols())
    throw std::invalid_argument("slice_cols: bad range");
  const int r = a.rows(), c = a.cols();
  std::vector<double> out(static_cast<size_t>(r) * len);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < len; ++j)
      out[static_cast<size_t>(i) * len + j] = a.at(i, from + j);
  return make_op(r, len, std::move(out), {a}, [r, c, from, len](TensorImpl& o) {
    auto& p = *o.parents[0];
    if (!p.requires_grad) return;
    auto& g = grad_of(p);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < len; ++j)
        g[static_cast<size_t>(i) * c + from + j] += o.grad[static_cast<size_t>(i) * len + j];
  });
}

Tensor slice_rows(const Tensor& a, int from, int len) {
  if (from < 0 || len <= 0 || from + len > a.rows())
    throw std::invalid_argument("slice_rows: bad range");
  const int c = a.cols();
  std::vector<double> out(a.values().begin() + static_cast<size_t>(from) * c,
                          a.values().begin() + static_cast<size_t>(from + len) * c);
  return make_op(len, c, std::move(out), {a}, [from, len, c](TensorImpl& o) {
    auto& p = *o.parents[0];
    if (!p.requires_grad) return;
    auto& g = grad_of(p);
    for (size_t i = 0; i < static_cast<size_t>(len) * c; ++i)
      g[static_cast<size_t>(from) * c + i] += o.grad[i];
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& indices) {
  const int c = a.cols();
  std::vector<double> out;
  out.reserve(indices.size() * static_cast<size_t>(c));
  for (int idx : indices) {
    if (idx < 0 || idx >= a.rows()) throw std::invalid_argument("gather_rows: index out of range");
    auto first = a.values().begin() + static_cast<size_t>(idx) * c;
    out.insert(out.end(), first, first + c);
  }
  return make_op(static_cast<int>(indices.size()), c, std::move(out), {a},
                 [indices, c](TensorImpl& o) {
                   auto& p = *o.parents[0];
                   if (!p.requires_grad) return;
                   auto& g = grad_of(p);
                   for (size_t k = 0; k < indices.size(); ++k)
                     for (int j = 0; j < c; ++j)
                       g[static_cast<size_t>(indices[k]) * c + j] += o.grad[k * c + j];
                 });
}

}  // namespace ctce
