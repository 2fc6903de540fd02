#include "ctce/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ctce {

void EvalConfig::validate() const {
  if (ap_thresholds.empty() || tp_threshold <= 0.0 || num_classes <= 0)
    throw std::invalid_argument("EvalConfig: thresholds and class count must be positive");
  for (size_t i = 0; i < ap_thresholds.size(); ++i) {
    if (ap_thresholds[i] <= 0.0) throw std::invalid_argument("EvalConfig: thresholds must be > 0");
    if (i > 0 && ap_thresholds[i] <= ap_thresholds[i - 1])
      throw std::invalid_argument("EvalConfig: thresholds must be ascending");
  }
}

double aligned_iou(const Vec3& dims_a, const Vec3& dims_b) {
  const double inter = std::min(dims_a.x(), dims_b.x()) * std::min(dims_a.y(), dims_b.y()) *
                       std::min(dims_a.z(), dims_b.z());
  const double va = dims_a.prod();
  const double vb = dims_b.prod();
  return inter / (va + vb - inter);
}

namespace {

struct PooledDet {
  int frame;
  const Box3D* box;
};

double xy_dist(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  return std::sqrt(dx * dx + dy * dy);
}

// Greedy score-ordered matching at one distance threshold. Returns the
// matched (detection, gt) pairs in detection order plus per-rank TP flags.
struct MatchOutcome {
  std::vector<bool> tp;                       // per pooled detection
  std::vector<std::pair<const Box3D*, const Box3D*>> pairs;
};

MatchOutcome greedy_match(const std::vector<PooledDet>& dets,
                          const std::vector<std::vector<Box3D>>& ground_truth, int class_id,
                          double threshold) {
  MatchOutcome out;
  out.tp.assign(dets.size(), false);
  std::vector<std::vector<bool>> used(ground_truth.size());
  for (size_t f = 0; f < ground_truth.size(); ++f)
    used[f].assign(ground_truth[f].size(), false);

  for (size_t k = 0; k < dets.size(); ++k) {
    const auto& d = dets[k];
    const auto& gts = ground_truth[d.frame];
    int best = -1;
    double best_dist = threshold;
    for (size_t j = 0; j < gts.size(); ++j) {
      if (used[d.frame][j] || gts[j].class_id != class_id) continue;
      const double dist = xy_dist(d.box->center, gts[j].center);
      if (dist < best_dist) {
        best_dist = dist;
        best = static_cast<int>(j);
      }
    }
    if (best >= 0) {
      used[d.frame][best] = true;
      out.tp[k] = true;
      out.pairs.emplace_back(d.box, &gts[best]);
    }
  }
  return out;
}

double average_precision(const std::vector<bool>& tp, int n_gt) {
  double ap = 0.0;
  int hits = 0;
  for (size_t k = 0; k < tp.size(); ++k) {
    if (!tp[k]) continue;
    ++hits;
    ap += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return ap / n_gt;
}

}  // namespace

Metrics evaluate(const std::vector<std::vector<Box3D>>& detections,
                 const std::vector<std::vector<Box3D>>& ground_truth, const EvalConfig& cfg) {
  cfg.validate();
  if (detections.size() != ground_truth.size())
    throw std::invalid_argument("evaluate: frame count mismatch");

  Metrics m;
  double tp_err_t = 0.0, tp_err_s = 0.0, tp_err_o = 0.0;
  int tp_count = 0;
  int classes_with_gt = 0;

  for (int c = 0; c < cfg.num_classes; ++c) {
    int n_gt = 0;
    for (const auto& gts : ground_truth)
      for (const Box3D& g : gts)
        if (g.class_id == c) ++n_gt;

    std::vector<PooledDet> dets;
    for (size_t f = 0; f < detections.size(); ++f)
      for (const Box3D& d : detections[f])
        if (d.class_id == c) dets.push_back({static_cast<int>(f), &d});
    std::sort(dets.begin(), dets.end(), [](const PooledDet& a, const PooledDet& b) {
      if (a.box->score != b.box->score) return a.box->score > b.box->score;
      if (a.box->center.x() != b.box->center.x()) return a.box->center.x() < b.box->center.x();
      if (a.box->center.y() != b.box->center.y()) return a.box->center.y() < b.box->center.y();
      return a.box->center.z() < b.box->center.z();
    });

    if (n_gt > 0) {
      ++classes_with_gt;
      double class_ap = 0.0;
      for (double threshold : cfg.ap_thresholds)
        class_ap += average_precision(greedy_match(dets, ground_truth, c, threshold).tp, n_gt);
      class_ap /= cfg.ap_thresholds.size();
      m.ap_per_class[c] = class_ap;
      m.map += class_ap;
    }

    MatchOutcome tp_matches = greedy_match(dets, ground_truth, c, cfg.tp_threshold);
    for (const auto& [det, gt] : tp_matches.pairs) {
      tp_err_t += xy_dist(det->center, gt->center);
      tp_err_s += 1.0 - aligned_iou(det->dims, gt->dims);
      tp_err_o += std::fabs(wrap_yaw(det->yaw - gt->yaw));
      ++tp_count;
    }
  }

  if (classes_with_gt > 0) m.map /= classes_with_gt;
  if (tp_count > 0) {
    m.mate = tp_err_t / tp_count;
    m.mase = tp_err_s / tp_count;
    m.maoe = tp_err_o / tp_count;
  } else {
    // no true positives anywhere: report the worst-case convention
    m.mate = 1.0;
    m.mase = 1.0;
    m.maoe = 1.0;
  }
  return m;
}

}  // namespace ctce
