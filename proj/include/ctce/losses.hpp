#pragma once

#include "ctce/fusion.hpp"

namespace ctce {

struct Stage1LossConfig {
  double alpha = 2.0;          // classification term weight
  double beta = 0.25;          // regression term weight
  double focal_gamma = 2.0;
  double focal_balance = 0.25; // weight on positive examples
  double smooth_l1_delta = 1.0;
  double lambda_cls = 1.0;     // assignment cost: class-probability term
  double lambda_box = 1.0;     // assignment cost: center L1 term

  void validate() const;
};

// One-to-one prediction-to-ground-truth assignment minimising
// lambda_cls * (1 - p_gt_class) + lambda_box * center L1.
// Returns, per prediction, the ground-truth index or -1.
std::vector<int> assign_targets(const std::vector<Box3D>& pred_boxes, const Tensor& logits,
                                const std::vector<Box3D>& gts, double lambda_cls = 1.0,
                                double lambda_box = 1.0);

// Sigmoid focal loss over an N x C logit matrix. targets[i] is the positive
// class of row i, or -1 for an all-negative row. Mean over rows.
Tensor focal_loss(const Tensor& logits, const std::vector<int>& targets, double gamma,
                  double balance);

// Mean elementwise Huber distance between two equal-shape tensors.
Tensor smooth_l1(const Tensor& pred, const Tensor& target, double delta);

// Mean squared error between two equal-shape tensors.
Tensor mse(const Tensor& pred, const Tensor& target);

// Regression target row for a matched ground-truth box: center offset from
// the query ref_point, log dims, sin yaw, cos yaw.
std::vector<double> regression_target(const Box3D& gt, const Vec3& ref_point);

// Detection loss: alpha * focal over all queries + beta * smooth-L1 over
// matched pairs. `frame` supplies the ref_points of the predictions.
Tensor stage1_loss(const DetectionOutput& det, const QueryFrame& frame,
                   const std::vector<Box3D>& gts, const Stage1LossConfig& cfg);

// Embedding reconstruction loss (mean squared error).
Tensor stage2_loss(const Tensor& predicted, const Tensor& observed);

}  // namespace ctce
