#include "semnav/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "semnav/error.hpp"
#include "semnav/rng.hpp"

namespace semnav {

void validate(const SupportSet& support) {
  if (support.empty()) fail(ErrorKind::InvalidArgument, "support set must contain at least one example");
  for (std::size_t k = 0; k < support.size(); ++k) {
    const auto& ex = support[k];
    semnav::validate(ex.image);
    if (ex.image.width != ex.mask.width || ex.image.height != ex.mask.height)
      fail(ErrorKind::DimensionMismatch, "support " + std::to_string(k) + ": image and mask differ in size");
    if (ex.image.channels != support.front().image.channels)
      fail(ErrorKind::DimensionMismatch, "support " + std::to_string(k) + ": channel count differs");
    if (ex.mask.foreground_count() == 0)
      fail(ErrorKind::EmptyMask, "support " + std::to_string(k) + ": mask has no foreground pixels");
  }
}

ConditioningMap fusion_module(const FeatureVolume& support_features, const BinaryMask& mask) {
  if (mask.width != support_features.width || mask.height != support_features.height)
    fail(ErrorKind::DimensionMismatch, "mask and feature volume dimensions differ");
  ConditioningMap out;
  out.width = support_features.width;
  out.height = support_features.height;
  out.data = support_features.data;
  for (std::size_t p = 0; p < mask.size(); ++p)
    if (!mask.data[p]) out.data.row(Eigen::Index(p)).setZero();
  return out;
}

double cosine_similarity(const FeatureVector& a, const FeatureVector& b) {
  if (a.size() != b.size()) fail(ErrorKind::DimensionMismatch, "cosine similarity of vectors with different lengths");
  const double na = a.norm(), nb = b.norm();
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

std::vector<double> fusion_weights(const std::vector<FeatureVector>& support_globals, const FeatureVector& query_global,
                                   double temperature) {
  if (support_globals.empty()) fail(ErrorKind::InvalidArgument, "at least one support is required");
  std::vector<double> logits;
  for (const auto& g : support_globals) logits.push_back(cosine_similarity(g, query_global) / temperature);
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (auto& v : logits) total += (v = std::exp(v - peak));
  for (auto& v : logits) v /= total;
  return logits;
}

Fusion fuse_supports(const std::vector<ConditioningMap>& maps, const std::vector<FeatureVector>& support_globals,
                     const FeatureVector& query_global, double temperature) {
  if (maps.empty()) fail(ErrorKind::InvalidArgument, "at least one conditioning map is required");
  if (maps.size() != support_globals.size())
    fail(ErrorKind::DimensionMismatch, "one global feature per conditioning map is required");
  for (const auto& m : maps)
    if (m.width != maps.front().width || m.height != maps.front().height || m.dim() != maps.front().dim())
      fail(ErrorKind::DimensionMismatch, "conditioning maps differ in dimensions");
  Fusion out;
  out.weights = fusion_weights(support_globals, query_global, temperature);
  out.fused.width = maps.front().width;
  out.fused.height = maps.front().height;
  out.fused.data = FeatureMatrix::Zero(maps.front().data.rows(), maps.front().data.cols());
  for (std::size_t k = 0; k < maps.size(); ++k) out.fused.data += out.weights[k] * maps[k].data;
  return out;
}

FeatureVector conditioning_feature(const std::vector<FeatureVector>& support_globals, const std::vector<double>& weights) {
  FeatureVector cond = FeatureVector::Zero(support_globals.front().size());
  for (std::size_t k = 0; k < support_globals.size(); ++k) cond += weights[k] * support_globals[k];
  return cond;
}

FeatureMatrix head_inputs(const FeatureMatrix& query, const FeatureVector& cond) {
  const Eigen::Index d = query.cols();
  if (cond.size() != d) fail(ErrorKind::DimensionMismatch, "conditioning feature dimension differs from query");
  FeatureMatrix x(query.rows(), 2 * d);
  x.leftCols(d) = query;
  x.rightCols(d) = query.rowwise() - cond.transpose();
  return x;
}

PreparedSupport prepare_support(const std::vector<FeatureVolume>& volumes, const std::vector<BinaryMask>& masks) {
  if (volumes.size() != masks.size() || volumes.empty())
    fail(ErrorKind::InvalidArgument, "support volumes and masks must pair up and be nonempty");
  PreparedSupport out;
  for (std::size_t k = 0; k < volumes.size(); ++k) {
    out.maps.push_back(fusion_module(volumes[k], masks[k]));
    out.globals.push_back(global_pool(volumes[k], masks[k]));
  }
  return out;
}

QueryResult segment_query(const FewshotHead& head, const PreparedSupport& support, const FeatureVolume& query) {
  if (head.mlp.all_zero()) fail(ErrorKind::InvalidArgument, "few-shot head is untrained (all parameters zero)");
  if (head.mlp.input_dim() != 2 * query.dim())
    fail(ErrorKind::DimensionMismatch, "head input dimension does not match the query features");
  for (const auto& m : support.maps)
    if (m.width != query.width || m.height != query.height)
      fail(ErrorKind::DimensionMismatch, "support and query dimensions differ");
  const FeatureVector query_global = global_pool(query);
  QueryResult out;
  out.weights = fusion_weights(support.globals, query_global);
  const FeatureVector cond = conditioning_feature(support.globals, out.weights);
  const auto logits = mlp_forward_batch(head.mlp, head_inputs(query.data, cond));
  out.mask = BinaryMask(query.width, query.height);
  for (Eigen::Index p = 0; p < logits.rows(); ++p) out.mask.data[std::size_t(p)] = std::uint8_t(argmax_first(logits.row(p)));
  return out;
}

QueryResult segment_query(const FewshotHead& head, const SupportSet& support, const ImageRaster& query) {
  validate(support);
  semnav::validate(query);
  if (query.channels != head.channels || support.front().image.channels != head.channels)
    fail(ErrorKind::DimensionMismatch, "channel count does not match the few-shot head");
  std::vector<FeatureVolume> volumes;
  std::vector<BinaryMask> masks;
  for (const auto& ex : support) {
    volumes.push_back(extract_volume(ex.image));
    masks.push_back(ex.mask);
  }
  return segment_query(head, prepare_support(volumes, masks), extract_volume(query));
}

namespace {

bool contains_any(const Grid<std::uint8_t>& labels, const std::set<std::uint8_t>& classes) {
  return std::any_of(labels.data.begin(), labels.data.end(), [&](std::uint8_t v) { return classes.count(v) > 0; });
}

// Features come in blocks of 7 per channel: raw, then mean/std for three
// windows. Gains scale a whole block; inversion maps v -> gain - v on the
// raw and mean columns and leaves the stds alone.
void augment_channels(FeatureMatrix& query, FeatureVector& cond, int channels, SplitMix64& rng) {
  std::vector<int> perm(static_cast<std::size_t>(channels));
  for (int c = 0; c < channels; ++c) perm[std::size_t(c)] = c;
  shuffle(perm, rng);
  const FeatureMatrix q0 = query;
  const FeatureVector c0 = cond;
  for (int c = 0; c < channels; ++c) {
    const int from = 7 * perm[std::size_t(c)];
    const double gain = std::exp(0.25 * rng.normal());
    const bool invert = rng.uniform() < 0.5;
    query.middleCols(7 * c, 7) = gain * q0.middleCols(from, 7);
    cond.segment(7 * c, 7) = gain * c0.segment(from, 7);
    if (!invert) continue;
    for (int col : {0, 1, 3, 5}) {
      query.col(7 * c + col).array() = gain - query.col(7 * c + col).array();
      cond(7 * c + col) = gain - cond(7 * c + col);
    }
  }
}

}  // namespace

FewshotTrainResult episodic_train(const std::vector<EpisodeImage>& dataset, const std::set<std::uint8_t>& train_classes,
                                  const std::set<std::uint8_t>& test_classes, const FewshotConfig& config) {
  if (dataset.empty()) fail(ErrorKind::Episode, "episode dataset is empty");
  const int channels = dataset.front().image.channels;
  std::vector<EpisodeVolume> volumes;
  volumes.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& item = dataset[i];
    semnav::validate(item.image);
    if (item.image.channels != channels) fail(ErrorKind::DimensionMismatch, "episode images differ in channel count");
    if (item.image.width != item.semantic.width || item.image.height != item.semantic.height)
      fail(ErrorKind::DimensionMismatch, "episode image " + std::to_string(i) + " and its semantic map differ in size");
    // Test-class images are never touched, not even by the extractor.
    if (contains_any(item.semantic, test_classes)) {
      volumes.push_back({FeatureVolume{}, item.semantic});
      continue;
    }
    volumes.push_back({extract_volume(item.image), item.semantic});
  }
  return episodic_train(volumes, channels, train_classes, test_classes, config);
}

FewshotTrainResult episodic_train(const std::vector<EpisodeVolume>& dataset, int channels,
                                  const std::set<std::uint8_t>& train_classes, const std::set<std::uint8_t>& test_classes,
                                  const FewshotConfig& config) {
  config.sgd.validate();
  if (config.k < 1) fail(ErrorKind::InvalidArgument, "k must be at least 1");
  if (train_classes.empty()) fail(ErrorKind::Episode, "no training classes given");
  for (auto c : train_classes)
    if (test_classes.count(c))
      fail(ErrorKind::Episode, "class " + std::to_string(c) + " is both a training and a test class");
  if (dataset.empty()) fail(ErrorKind::Episode, "episode dataset is empty");

  std::vector<bool> eligible(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) eligible[i] = !contains_any(dataset[i].labels, test_classes);

  std::map<std::uint8_t, std::vector<std::size_t>> by_class;
  for (auto c : train_classes) {
    std::vector<std::size_t> images;
    for (std::size_t i = 0; i < dataset.size(); ++i)
      if (eligible[i] && contains_any(dataset[i].labels, {c})) images.push_back(i);
    if (images.size() >= std::size_t(config.k) + 1) by_class[c] = std::move(images);
  }
  if (by_class.empty())
    fail(ErrorKind::Episode, "no training class has " + std::to_string(config.k + 1) + " eligible images");
  std::vector<std::uint8_t> classes;
  for (const auto& [c, _] : by_class) classes.push_back(c);

  const int dim = feature_dim(channels);
  std::vector<int> sizes{2 * dim};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(2);

  FewshotTrainResult result;
  result.head.channels = channels;
  result.head.mlp = MlpModel::he_uniform(sizes, derive_seed(config.sgd.seed, 0));
  auto& mlp = result.head.mlp;
  SplitMix64 rng(derive_seed(config.sgd.seed, 1));
  MlpModel::Matrix grad_logits;

  for (int episode = 0; episode < config.sgd.epochs; ++episode) {
    EpisodeRecord record;
    record.class_id = classes[std::size_t(rng.uniform_index(classes.size()))];
    auto pool = by_class[record.class_id];
    for (int i = 0; i <= config.k; ++i) {
      const std::size_t j = std::size_t(i) + std::size_t(rng.uniform_index(pool.size() - std::size_t(i)));
      std::swap(pool[std::size_t(i)], pool[j]);
    }
    record.support.assign(pool.begin(), pool.begin() + config.k);
    record.query = pool[std::size_t(config.k)];
    for (std::size_t idx : record.support)
      if (contains_any(dataset[idx].labels, test_classes)) fail(ErrorKind::Episode, "episode touched a test-class image");
    if (contains_any(dataset[record.query].labels, test_classes))
      fail(ErrorKind::Episode, "episode touched a test-class image");

    std::vector<FeatureVolume> support_volumes;
    std::vector<BinaryMask> support_masks;
    for (std::size_t idx : record.support) {
      support_volumes.push_back(dataset[idx].volume);
      support_masks.push_back(binarize(dataset[idx].labels, record.class_id));
    }
    const auto prepared = prepare_support(support_volumes, support_masks);
    const auto& query = dataset[record.query].volume;
    const auto& query_labels = dataset[record.query].labels;
    if (query.dim() != dim) fail(ErrorKind::DimensionMismatch, "episode volume has the wrong feature dimension");
    const auto weights = fusion_weights(prepared.globals, global_pool(query), config.temperature);
    const FeatureVector cond = conditioning_feature(prepared.globals, weights);

    SparseLabelRaster labeled(query_labels.width, query_labels.height);
    labeled.data = query_labels.data;
    auto picked = sample_labeled_pixels(labeled, std::size_t(config.sgd.batch_pixels), rng);
    std::sort(picked.begin(), picked.end());
    std::vector<Eigen::Index> rows(picked.begin(), picked.end());
    std::vector<int> targets;
    for (std::size_t p : picked) targets.push_back(query_labels.data[p] == record.class_id ? 1 : 0);

    FeatureMatrix rows_q = query.data(rows, Eigen::all);
    FeatureVector cond_aug = cond;
    if (config.channel_augment && channels > 1) augment_channels(rows_q, cond_aug, channels, rng);
    const FeatureMatrix batch = head_inputs(rows_q, cond_aug);
    const auto tape = mlp_forward_tape(mlp, batch);
    const double loss = batch_cross_entropy<double>(tape.output, targets, grad_logits);
    if (!std::isfinite(loss))
      fail(ErrorKind::Divergence, "non-finite loss at episode " + std::to_string(episode + 1) + " with learning_rate " +
                                      std::to_string(config.sgd.learning_rate));
    const auto grads = mlp_backward_tape(mlp, tape, grad_logits);
    const double lr = config.lr_decay ? config.sgd.learning_rate * (1.0 - double(episode) / double(config.sgd.epochs))
                                      : config.sgd.learning_rate;
    sgd_step(mlp, grads, lr, config.sgd.l2, double(rows.size()));
    result.loss_trace.push_back(loss / double(rows.size()));

    result.touched.insert(record.support.begin(), record.support.end());
    result.touched.insert(record.query);
    result.episodes.push_back(std::move(record));
  }
  return result;
}

}  // namespace semnav
