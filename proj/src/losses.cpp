#include "ctce/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "ctce/assignment.hpp"

namespace ctce {

void Stage1LossConfig::validate() const {
  if (alpha <= 0.0 || beta <= 0.0 || focal_gamma < 0.0 || focal_balance <= 0.0 ||
      focal_balance >= 1.0 || smooth_l1_delta <= 0.0)
    throw std::invalid_argument("Stage1LossConfig: invalid weights");
}

std::vector<int> assign_targets(const std::vector<Box3D>& pred_boxes, const Tensor& logits,
                                const std::vector<Box3D>& gts, double lambda_cls,
                                double lambda_box) {
  const int n = static_cast<int>(pred_boxes.size());
  const int m = static_cast<int>(gts.size());
  std::vector<int> pred_to_gt(n, -1);
  if (n == 0 || m == 0) return pred_to_gt;

  std::vector<double> cost(static_cast<size_t>(n) * m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double p = 1.0 / (1.0 + std::exp(-logits.at(i, gts[j].class_id)));
      const double l1 = (pred_boxes[i].center - gts[j].center).cwiseAbs().sum();
      cost[static_cast<size_t>(i) * m + j] = lambda_cls * (1.0 - p) + lambda_box * l1;
    }
  }
  std::vector<int> row_to_col = min_cost_assignment(cost, n, m);
  for (int i = 0; i < n; ++i) pred_to_gt[i] = row_to_col[i];
  return pred_to_gt;
}

Tensor focal_loss(const Tensor& logits, const std::vector<int>& targets, double gamma,
                  double balance) {
  const int n = logits.rows();
  const int c = logits.cols();
  if (static_cast<int>(targets.size()) != n)
    throw std::invalid_argument("focal_loss: one target per row required");

  std::vector<double> pos_vals(static_cast<size_t>(n) * c, 0.0);
  std::vector<double> neg_vals(static_cast<size_t>(n) * c, 1.0);
  for (int i = 0; i < n; ++i) {
    const int t = targets[i];
    if (t < 0) continue;
    if (t >= c) throw std::invalid_argument("focal_loss: target class out of range");
    pos_vals[static_cast<size_t>(i) * c + t] = 1.0;
    neg_vals[static_cast<size_t>(i) * c + t] = 0.0;
  }
  Tensor pos_mask(n, c, std::move(pos_vals));
  Tensor neg_mask(n, c, std::move(neg_vals));

  // stable pieces: log p = -softplus(-l), log(1-p) = -softplus(l)
  Tensor p = sigmoid(logits);
  Tensor one_minus_p = add_scalar(neg(p), 1.0);
  Tensor pos_term = mul(pow_elem(one_minus_p, gamma), softplus(neg(logits)));
  Tensor neg_term = mul(pow_elem(p, gamma), softplus(logits));
  Tensor weighted = add(scale(mul(pos_mask, pos_term), balance),
                        scale(mul(neg_mask, neg_term), 1.0 - balance));
  return scale(sum(weighted), 1.0 / n);
}

Tensor smooth_l1(const Tensor& pred, const Tensor& target, double delta) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("smooth_l1: shape mismatch");
  return mean(huber_elem(sub(pred, target), delta));
}

Tensor mse(const Tensor& pred, const Tensor& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("mse: shape mismatch");
  Tensor e = sub(pred, target);
  return mean(mul(e, e));
}

std::vector<double> regression_target(const Box3D& gt, const Vec3& ref_point) {
  const Vec3 off = gt.center - ref_point;
  return {off.x(),
          off.y(),
          off.z(),
          std::log(gt.dims.x()),
          std::log(gt.dims.y()),
          std::log(gt.dims.z()),
          std::sin(gt.yaw),
          std::cos(gt.yaw)};
}

Tensor stage1_loss(const DetectionOutput& det, const QueryFrame& frame,
                   const std::vector<Box3D>& gts, const Stage1LossConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(det.boxes.size());
  if (n == 0) return Tensor::scalar(0.0);

  std::vector<int> pred_to_gt =
      assign_targets(det.boxes, det.logits, gts, cfg.lambda_cls, cfg.lambda_box);

  std::vector<int> cls_targets(n, -1);
  std::vector<int> matched_rows;
  std::vector<double> reg_targets;
  for (int i = 0; i < n; ++i) {
    const int j = pred_to_gt[i];
    if (j < 0) continue;
    cls_targets[i] = gts[j].class_id;
    matched_rows.push_back(i);
    for (double v : regression_target(gts[j], frame.ref_points[i])) reg_targets.push_back(v);
  }

  Tensor loss = scale(focal_loss(det.logits, cls_targets, cfg.focal_gamma, cfg.focal_balance),
                      cfg.alpha);
  if (!matched_rows.empty()) {
    Tensor pred = gather_rows(det.reg, matched_rows);
    Tensor target(static_cast<int>(matched_rows.size()), 8, std::move(reg_targets));
    loss = add(loss, scale(smooth_l1(pred, target, cfg.smooth_l1_delta), cfg.beta));
  }
  return loss;
}

Tensor stage2_loss(const Tensor& predicted, const Tensor& observed) {
  return mse(predicted, observed);
}

}  // namespace ctce
