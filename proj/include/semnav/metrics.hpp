#pragma once

#include <cstdint>
#include <map>

#include "semnav/raster.hpp"

namespace semnav {

struct Metrics {
  double overall_accuracy = 0.0;
  std::map<std::uint8_t, double> per_class_iou;  // classes present in the ground truth
  double mean_iou = 0.0;
};

/// Scores over labeled truth pixels only. Predictions at unlabeled truth
/// pixels are ignored; IoU unions count only labeled pixels.
Metrics compute_metrics(const SemanticRaster& pred, const SparseLabelRaster& truth);

/// Pools several images into one confusion tally before scoring.
class MetricsAccumulator {
public:
  void add(const SemanticRaster& pred, const SparseLabelRaster& truth);
  Metrics finish() const;

private:
  std::size_t labeled_ = 0;
  std::size_t correct_ = 0;
  std::map<std::uint8_t, std::size_t> intersection_;
  std::map<std::uint8_t, std::size_t> union_;
  std::map<std::uint8_t, bool> present_;
};

/// Binary IoU of two masks; 1 when both are empty.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

}  // namespace semnav
