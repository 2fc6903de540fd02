#pragma once

#include <map>

#include "ctce/geometry.hpp"

namespace ctce {

struct EvalConfig {
  std::vector<double> ap_thresholds = {0.5, 1.0, 2.0, 4.0};  // metres, ascending
  double tp_threshold = 2.0;                                 // metres
  int num_classes = 3;

  void validate() const;
};

struct Metrics {
  double map = 0.0;   // mean AP over classes (with ground truth) and thresholds
  double mate = 0.0;  // mean translation error of TPs, metres
  double mase = 0.0;  // 1 - aligned-box IoU of TPs
  double maoe = 0.0;  // mean absolute yaw error of TPs, radians
  std::map<int, double> ap_per_class;
};

// nuScenes-style evaluation: per class, detections pooled over frames and
// sorted by score; greedy center-distance matching (xy plane), each ground
// truth matched at most once. AP is averaged over ap_thresholds; the TP
// metrics use the matches at tp_threshold.
Metrics evaluate(const std::vector<std::vector<Box3D>>& detections,
                 const std::vector<std::vector<Box3D>>& ground_truth, const EvalConfig& cfg);

// Intersection-over-union of two boxes aligned at a common center and yaw.
double aligned_iou(const Vec3& dims_a, const Vec3& dims_b);

}  // namespace ctce
