#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace ctce {

// Dense row-major 2-D tensor of doubles with reverse-mode autodiff.
// A Tensor is a cheap handle onto a shared node; the graph is built by the
// free-function ops below and unwound by backward().
struct TensorImpl {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(int rows, int cols, bool requires_grad = false);
  static Tensor full(int rows, int cols, double v, bool requires_grad = false);
  static Tensor identity(int n);
  static Tensor row(const std::vector<double>& v, bool requires_grad = false);
  static Tensor col(const std::vector<double>& v, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  int rows() const { return impl_->rows; }
  int cols() const { return impl_->cols; }
  int numel() const { return impl_->rows * impl_->cols; }
  bool requires_grad() const { return impl_->requires_grad; }

  double at(int r, int c) const { return impl_->values[static_cast<size_t>(r) * impl_->cols + c]; }
  void set(int r, int c, double v) { impl_->values[static_cast<size_t>(r) * impl_->cols + c] = v; }
  double item() const;

  const std::vector<double>& values() const { return impl_->values; }
  std::vector<double>& mutable_values() { return impl_->values; }
  const std::vector<double>& grad() const;
  std::vector<double> row_values(int r) const;

  // Detached copy: same values, no graph, no grad requirement.
  Tensor detach() const;

  void zero_grad();
  void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

  std::shared_ptr<TensorImpl> impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;

  friend Tensor make_op(int rows, int cols, std::vector<double> values,
                        std::vector<Tensor> parents,
                        std::function<void(TensorImpl&)> backward_fn);
};

// Runs reverse-mode accumulation from a scalar loss. Gradients accumulate
// into every reachable requires_grad tensor; call zero_grad first.
void backward(const Tensor& scalar_loss);

// --- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor add_rowvec(const Tensor& a, const Tensor& v);  // v is 1 x cols, broadcast over rows

Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp_elem(const Tensor& a);
Tensor log_elem(const Tensor& a);
Tensor pow_elem(const Tensor& a, double p);
Tensor abs_elem(const Tensor& a);
Tensor huber_elem(const Tensor& a, double delta);  // quadratic below delta, linear above

Tensor softmax_rows(const Tensor& a);
Tensor sum(const Tensor& a);   // -> 1x1
Tensor mean(const Tensor& a);  // -> 1x1

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, int from, int len);
Tensor slice_rows(const Tensor& a, int from, int len);
Tensor gather_rows(const Tensor& a, const std::vector<int>& indices);

}  // namespace ctce
