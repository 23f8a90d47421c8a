#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "semnav/features.hpp"
#include "semnav/frugal.hpp"
#include "semnav/mlp.hpp"
#include "semnav/raster.hpp"

namespace semnav {

inline constexpr double kFusionTemperature = 0.1;

struct SupportExample {
  ImageRaster image;
  BinaryMask mask;  // foreground = new class
};

using SupportSet = std::vector<SupportExample>;

void validate(const SupportSet& support);

/// Support features with background pixels zeroed.
struct ConditioningMap : FeatureVolume {};

/// Binary foreground/background classifier. The MLP sees
/// [query, query - cond]: an invertible linear map of the plain
/// concatenation that puts the comparison on the first layer.
struct FewshotHead {
  int channels = 3;
  MlpModel mlp;  // 2*D -> ... -> 2
};

/// Masks intermediate features: out[p] = volume[p] * mask[p] across all dims.
ConditioningMap fusion_module(const FeatureVolume& support_features, const BinaryMask& mask);

/// a.b / (|a||b|), or 0 when either norm is below 1e-12.
double cosine_similarity(const FeatureVector& a, const FeatureVector& b);

struct Fusion {
  ConditioningMap fused;
  std::vector<double> weights;
};

/// weights = softmax(cos(support_global_k, query_global) / temperature);
/// fused = sum_k weights[k] * maps[k].
Fusion fuse_supports(const std::vector<ConditioningMap>& maps, const std::vector<FeatureVector>& support_globals,
                     const FeatureVector& query_global, double temperature = kFusionTemperature);

/// Softmax weights alone (same arithmetic as fuse_supports).
std::vector<double> fusion_weights(const std::vector<FeatureVector>& support_globals, const FeatureVector& query_global,
                                   double temperature = kFusionTemperature);

/// Conditioning vector fed to the head: each conditioning map is pooled
/// over its own foreground, then combined with the fusion weights.
FeatureVector conditioning_feature(const std::vector<FeatureVector>& support_globals, const std::vector<double>& weights);

/// One row per query pixel: [q | q - cond].
FeatureMatrix head_inputs(const FeatureMatrix& query, const FeatureVector& cond);

struct PreparedSupport {
  std::vector<ConditioningMap> maps;
  std::vector<FeatureVector> globals;  // pooled over each foreground mask
};

PreparedSupport prepare_support(const std::vector<FeatureVolume>& volumes, const std::vector<BinaryMask>& masks);

struct QueryResult {
  BinaryMask mask;
  std::vector<double> weights;
};

QueryResult segment_query(const FewshotHead& head, const SupportSet& support, const ImageRaster& query);
/// Volume-level path; the shared extractor is applied by the caller.
QueryResult segment_query(const FewshotHead& head, const PreparedSupport& support, const FeatureVolume& query);

struct EpisodeImage {
  ImageRaster image;
  SemanticRaster semantic;
};

/// Episode source at feature level. Labels may hold kUnlabeled; those
/// pixels are left out of support masks and of the query loss.
struct EpisodeVolume {
  FeatureVolume volume;
  Grid<std::uint8_t> labels;
};

struct FewshotConfig {
  SgdConfig sgd{0.1, 2000, 1024, 0, 0.0};  // epochs = number of episodes
  /// Learning rate falls linearly from sgd.learning_rate toward zero.
  bool lr_decay = true;
  int k = 1;
  std::vector<int> hidden = {64, 64};
  double temperature = kFusionTemperature;
  /// Per episode, permute color channels, scale each by a random gain and
  /// invert half of them, identically for query and support. Multiplies the
  /// number of distinct classes and class differences the head sees.
  bool channel_augment = true;
};

struct EpisodeRecord {
  std::uint8_t class_id = 0;
  std::vector<std::size_t> support;  // dataset indices
  std::size_t query = 0;
};

struct FewshotTrainResult {
  FewshotHead head;
  std::vector<double> loss_trace;  // per episode
  std::vector<EpisodeRecord> episodes;
  std::set<std::size_t> touched;   // every dataset index used in any episode
};

/// Episodic training over classes disjoint from the test classes. Images
/// containing any test class never enter an episode.
FewshotTrainResult episodic_train(const std::vector<EpisodeImage>& dataset, const std::set<std::uint8_t>& train_classes,
                                  const std::set<std::uint8_t>& test_classes, const FewshotConfig& config);
FewshotTrainResult episodic_train(const std::vector<EpisodeVolume>& dataset, int channels,
                                  const std::set<std::uint8_t>& train_classes, const std::set<std::uint8_t>& test_classes,
                                  const FewshotConfig& config);

}  // namespace semnav
