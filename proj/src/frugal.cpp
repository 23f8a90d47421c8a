#include "semnav/frugal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semnav/error.hpp"

namespace semnav {

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0)) fail(ErrorKind::InvalidArgument, "learning_rate must be positive");
  if (epochs < 0) fail(ErrorKind::InvalidArgument, "epochs must be nonnegative");
  if (batch_pixels < 1) fail(ErrorKind::InvalidArgument, "batch_pixels must be at least 1");
  if (!(l2 >= 0.0)) fail(ErrorKind::InvalidArgument, "l2 must be nonnegative");
}

void FrugalConfig::validate() const {
  if (!(pixel_fraction > 0.0 && pixel_fraction <= 1.0))
    fail(ErrorKind::InvalidArgument, "pixel_fraction must lie in (0, 1]");
  sgd.validate();
  for (int h : hidden)
    if (h <= 0) fail(ErrorKind::InvalidArgument, "hidden layer sizes must be positive");
}

void FrugalDataset::validate() const {
  if (items.empty()) fail(ErrorKind::InvalidArgument, "dataset is empty");
  std::size_t labeled = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    semnav::validate(item.image);
    if (item.image.width != item.labels.width || item.image.height != item.labels.height)
      fail(ErrorKind::DimensionMismatch, "item " + std::to_string(i) + ": image and labels differ in size");
    if (item.image.channels != items.front().image.channels)
      fail(ErrorKind::DimensionMismatch, "item " + std::to_string(i) + ": channel count differs from item 0");
    semnav::validate(item.labels, palette);
    labeled += item.labels.labeled_count();
  }
  if (labeled == 0) fail(ErrorKind::EmptyLabels, "dataset has no labeled pixels");
}

std::vector<std::size_t> sample_labeled_pixels(const SparseLabelRaster& labels, std::size_t n, SplitMix64& rng) {
  std::vector<std::size_t> pool;
  pool.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels.data[i] != kUnlabeled) pool.push_back(i);
  if (pool.empty()) fail(ErrorKind::EmptyLabels, "label raster has no labeled pixels");
  const std::size_t k = std::min(n, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + std::size_t(rng.uniform_index(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::vector<FeatureVolume> extract_all(const FrugalDataset& dataset) {
  std::vector<FeatureVolume> volumes;
  volumes.reserve(dataset.items.size());
  for (const auto& item : dataset.items) volumes.push_back(extract_volume(item.image));
  return volumes;
}

FrugalTrainResult train(const FrugalDataset& dataset, const FrugalConfig& config) {
  dataset.validate();
  const auto volumes = extract_all(dataset);
  return train(dataset, volumes, config);
}

FrugalTrainResult train(const FrugalDataset& dataset, std::span<const FeatureVolume> volumes, const FrugalConfig& config) {
  dataset.validate();
  config.validate();
  if (volumes.size() != dataset.items.size())
    fail(ErrorKind::DimensionMismatch, "one feature volume per dataset item is required");

  const int dim = feature_dim(dataset.channels());
  std::vector<int> sizes{dim};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(int(dataset.palette.size()));

  FrugalTrainResult result;
  result.model.channels = dataset.channels();
  result.model.palette = dataset.palette;
  result.model.head = MlpModel::he_uniform(sizes, derive_seed(config.sgd.seed, 0));
  auto& head = result.model.head;

  SplitMix64 rng(derive_seed(config.sgd.seed, 1));
  std::vector<std::size_t> order(dataset.items.size());
  MlpModel::Matrix grad_logits;

  for (int epoch = 0; epoch < config.sgd.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, rng);
    double epoch_loss = 0.0;
    int steps = 0;
    for (std::size_t item_index : order) {
      const auto& item = dataset.items[item_index];
      if (item.labels.labeled_count() == 0) continue;
      const auto n = std::size_t(std::ceil(config.pixel_fraction * double(item.labels.size())));
      auto picked = sample_labeled_pixels(item.labels, n, rng);
      std::sort(picked.begin(), picked.end());

      std::vector<int> targets(picked.size());
      std::vector<Eigen::Index> rows(picked.size());
      for (std::size_t i = 0; i < picked.size(); ++i) {
        targets[i] = item.labels.data[picked[i]];
        rows[i] = Eigen::Index(picked[i]);
      }
      const FeatureMatrix batch = volumes[item_index].data(rows, Eigen::all);
      const auto tape = mlp_forward_tape(head, batch);
      const double loss = batch_cross_entropy<double>(tape.output, targets, grad_logits);
      const double batch_size = double(picked.size());
      if (!std::isfinite(loss))
        fail(ErrorKind::Divergence, "non-finite loss at epoch " + std::to_string(epoch + 1) + " with learning_rate " +
                                        std::to_string(config.sgd.learning_rate));
      const auto grads = mlp_backward_tape(head, tape, grad_logits);
      sgd_step(head, grads, config.sgd.learning_rate, config.sgd.l2, batch_size);
      epoch_loss += loss / batch_size;
      ++steps;
    }
    result.loss_trace.push_back(steps > 0 ? epoch_loss / steps : 0.0);
  }
  if (!head.all_finite())
    fail(ErrorKind::Divergence, "non-finite parameters after training with learning_rate " +
                                    std::to_string(config.sgd.learning_rate));
  return result;
}

SemanticRaster predict(const SegModel& model, const FeatureVolume& volume) {
  if (volume.dim() != model.head.input_dim())
    fail(ErrorKind::DimensionMismatch, "feature dimension " + std::to_string(volume.dim()) +
                                           " does not match the model input " + std::to_string(model.head.input_dim()));
  const auto logits = mlp_forward_batch(model.head, volume.data);
  SemanticRaster out(volume.width, volume.height);
  for (Eigen::Index p = 0; p < logits.rows(); ++p) out.data[std::size_t(p)] = std::uint8_t(argmax_first(logits.row(p)));
  return out;
}

SemanticRaster predict(const SegModel& model, const ImageRaster& image) {
  if (image.channels != model.channels)
    fail(ErrorKind::DimensionMismatch, "image has " + std::to_string(image.channels) + " channels, model expects " +
                                           std::to_string(model.channels));
  return predict(model, extract_volume(image));
}

Metrics evaluate(const SegModel& model, const FrugalDataset& dataset, std::span<const FeatureVolume> volumes) {
  MetricsAccumulator acc;
  for (std::size_t i = 0; i < dataset.items.size(); ++i) acc.add(predict(model, volumes[i]), dataset.items[i].labels);
  return acc.finish();
}

Metrics evaluate(const SegModel& model, const FrugalDataset& dataset) {
  const auto volumes = extract_all(dataset);
  return evaluate(model, dataset, volumes);
}

SparseLabelRaster truncate_labels(const SparseLabelRaster& labels, double fraction, SplitMix64& rng) {
  if (!(fraction > 0.0 && fraction <= 1.0)) fail(ErrorKind::InvalidArgument, "label fraction must lie in (0, 1]");
  const std::size_t labeled = labels.labeled_count();
  SparseLabelRaster out(labels.width, labels.height, kUnlabeled);
  if (labeled == 0) return out;
  const auto keep = std::size_t(std::llround(fraction * double(labeled)));
  if (keep == 0) return out;
  for (std::size_t p : sample_labeled_pixels(labels, keep, rng)) out.data[p] = labels.data[p];
  return out;
}

FrugalDataset truncate_dataset(const FrugalDataset& dataset, double fraction, std::uint64_t seed) {
  SplitMix64 rng(derive_seed(seed, 2));
  FrugalDataset out;
  out.palette = dataset.palette;
  std::size_t labeled = 0;
  for (const auto& item : dataset.items) {
    out.items.push_back({item.image, truncate_labels(item.labels, fraction, rng)});
    labeled += out.items.back().labels.labeled_count();
  }
  if (labeled == 0)
    fail(ErrorKind::EmptyLabels, "label fraction " + std::to_string(fraction) + " leaves zero labeled pixels");
  return out;
}

std::vector<CurvePoint> label_fraction_curve(const FrugalDataset& train_set, const FrugalDataset& holdout,
                                             const std::vector<double>& fractions, const FrugalConfig& config) {
  if (!std::is_sorted(fractions.begin(), fractions.end()))
    fail(ErrorKind::InvalidArgument, "fractions must be sorted ascending");
  train_set.validate();
  holdout.validate();
  const auto train_volumes = extract_all(train_set);
  const auto holdout_volumes = extract_all(holdout);
  std::vector<CurvePoint> curve;
  for (double f : fractions) {
    const auto truncated = truncate_dataset(train_set, f, config.sgd.seed);
    std::size_t labeled = 0, total = 0;
    for (const auto& item : truncated.items) {
      labeled += item.labels.labeled_count();
      total += item.labels.size();
    }
    const auto trained = train(truncated, train_volumes, config);
    curve.push_back({f, double(labeled) / double(total), evaluate(trained.model, holdout, holdout_volumes)});
  }
  return curve;
}

}  // namespace semnav
