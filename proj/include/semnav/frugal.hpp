#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "semnav/features.hpp"
#include "semnav/metrics.hpp"
#include "semnav/mlp.hpp"
#include "semnav/raster.hpp"
#include "semnav/rng.hpp"

namespace semnav {

struct SgdConfig {
  double learning_rate = 0.1;
  int epochs = 40;
  int batch_pixels = 1024;
  std::uint64_t seed = 0;
  double l2 = 0.0;

  void validate() const;
};

struct FrugalItem {
  ImageRaster image;
  SparseLabelRaster labels;
};

struct FrugalDataset {
  LabelPalette palette;
  std::vector<FrugalItem> items;

  int channels() const { return items.empty() ? 0 : items.front().image.channels; }
  void validate() const;
};

struct FrugalConfig {
  double pixel_fraction = 0.04;
  SgdConfig sgd;
  std::vector<int> hidden = {64, 64};

  void validate() const;
};

struct SegModel {
  int channels = 3;  // extractor configuration: windows and offsets are fixed
  LabelPalette palette;
  MlpModel head;
};

struct FrugalTrainResult {
  SegModel model;
  std::vector<double> loss_trace;  // mean batch loss per epoch
};

/// min(n, labeled) distinct labeled pixel indices, uniform without
/// replacement: partial Fisher-Yates over the ascending labeled-index list.
std::vector<std::size_t> sample_labeled_pixels(const SparseLabelRaster& labels, std::size_t n, SplitMix64& rng);

std::vector<FeatureVolume> extract_all(const FrugalDataset& dataset);

/// Per epoch, per image in seeded shuffled order: one SGD step on
/// ceil(pixel_fraction * W * H) sampled labeled pixels. Unlabeled pixels
/// never enter the loss.
FrugalTrainResult train(const FrugalDataset& dataset, const FrugalConfig& config);
/// Same, reusing precomputed feature volumes (one per dataset item).
FrugalTrainResult train(const FrugalDataset& dataset, std::span<const FeatureVolume> volumes, const FrugalConfig& config);

SemanticRaster predict(const SegModel& model, const ImageRaster& image);
SemanticRaster predict(const SegModel& model, const FeatureVolume& volume);

Metrics evaluate(const SegModel& model, const FrugalDataset& dataset);
Metrics evaluate(const SegModel& model, const FrugalDataset& dataset, std::span<const FeatureVolume> volumes);

/// Keeps round(fraction * labeled) labeled pixels chosen uniformly at random.
SparseLabelRaster truncate_labels(const SparseLabelRaster& labels, double fraction, SplitMix64& rng);
FrugalDataset truncate_dataset(const FrugalDataset& dataset, double fraction, std::uint64_t seed);

struct CurvePoint {
  double fraction = 0.0;
  double labeled_fraction = 0.0;  // achieved over the truncated training set
  Metrics metrics;
};

/// Trains a fresh model per label fraction and scores it on the held-out set.
std::vector<CurvePoint> label_fraction_curve(const FrugalDataset& train_set, const FrugalDataset& holdout,
                                             const std::vector<double>& fractions, const FrugalConfig& config);

}  // namespace semnav
