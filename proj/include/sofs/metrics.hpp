#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "sofs/netpbm.hpp"

namespace sofs {

// Intersection over union of binary masks. Both empty counts as a perfect
// match (1); exactly one empty scores 0.
double iou(const MaskU8& pred, const MaskU8& gt);

struct ClassAccumulator {
  long long intersection = 0;
  long long union_count = 0;
  int episodes = 0;
};

// Per-class pooled counts (PASCAL convention): intersections and unions are
// summed over a class's episodes before dividing.
class MiouAccumulator {
 public:
  void add(int class_id, const MaskU8& pred, const MaskU8& gt);
  void merge(const MiouAccumulator& other);

  // Unweighted mean of per-class pooled IoU. Classes without episodes are
  // skipped and counted in `skipped_classes`.
  double miou() const;
  // Mean of per-episode IoUs per class, then mean over classes (sensitivity
  // variant).
  double miou_episode_mean() const;

  std::map<int, double> per_class() const;
  const std::map<int, ClassAccumulator>& accumulators() const { return acc_; }
  int skipped_classes() const { return skipped_; }
  void note_skipped_class() { ++skipped_; }

 private:
  std::map<int, ClassAccumulator> acc_;
  std::map<int, std::vector<double>> episode_ious_;
  int skipped_ = 0;
};

// Mann-Whitney AUROC with midrank tie handling, O(n log n). Requires both
// label values to be present.
double auroc(const std::vector<float>& scores, const std::vector<uint8_t>& labels);

// Maximum F1 over thresholds drawn from the distinct score values
// (prediction = score >= threshold). Requires at least one positive.
double f1_max(const std::vector<float>& scores, const std::vector<uint8_t>& labels);

}  // namespace sofs
