#include "semnav/metrics.hpp"

#include "semnav/error.hpp"

namespace semnav {

void MetricsAccumulator::add(const SemanticRaster& pred, const SparseLabelRaster& truth) {
  if (pred.width != truth.width || pred.height != truth.height)
    fail(ErrorKind::DimensionMismatch, "prediction and truth dimensions differ");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = truth.data[i];
    if (t == kUnlabeled) continue;
    const auto p = pred.data[i];
    ++labeled_;
    present_[t] = true;
    if (p == t) {
      ++correct_;
      ++intersection_[t];
      ++union_[t];
    } else {
      ++union_[t];
      ++union_[p];
    }
  }
}

Metrics MetricsAccumulator::finish() const {
  if (labeled_ == 0) fail(ErrorKind::EmptyGroundTruth, "ground truth has no labeled pixels");
  Metrics m;
  m.overall_accuracy = double(correct_) / double(labeled_);
  double sum = 0.0;
  for (const auto& [cls, _] : present_) {
    const auto inter = intersection_.count(cls) ? intersection_.at(cls) : 0;
    const double iou = double(inter) / double(union_.at(cls));
    m.per_class_iou[cls] = iou;
    sum += iou;
  }
  m.mean_iou = sum / double(present_.size());
  return m;
}

Metrics compute_metrics(const SemanticRaster& pred, const SparseLabelRaster& truth) {
  MetricsAccumulator acc;
  acc.add(pred, truth);
  return acc.finish();
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.width != b.width || a.height != b.height) fail(ErrorKind::DimensionMismatch, "mask dimensions differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a.data[i] != 0, y = b.data[i] != 0;
    inter += (x && y);
    uni += (x || y);
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

}  // namespace semnav
