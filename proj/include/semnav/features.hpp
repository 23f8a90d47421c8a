#pragma once

#include <optional>

#include <Eigen/Dense>

#include "semnav/raster.hpp"

namespace semnav {

using FeatureVector = Eigen::VectorXd;
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-pixel feature vectors, one row per pixel in row-major pixel order.
struct FeatureVolume {
  int width = 0;
  int height = 0;
  FeatureMatrix data;  // (width*height) x dim

  Eigen::Index dim() const { return data.cols(); }
  std::size_t pixels() const { return std::size_t(width) * std::size_t(height); }
  auto pixel(std::size_t p) const { return data.row(Eigen::Index(p)); }
};

inline constexpr int kWindowSides[3] = {3, 7, 15};
inline constexpr int kGradientOffsets[2] = {1, 3};

/// 7 features per channel (raw; mean/std over 3, 7, 15 windows) plus two
/// channel-averaged gradient magnitudes.
constexpr int feature_dim(int channels) { return 7 * channels + 2; }

/// Reflect-101 index into [0, n): -1 -> 1, n -> n-2.
int mirror_index(int i, int n);

/// Per channel: raw, (mean, std) for square windows of side 3/7/15 with
/// mirror padding; then |grad| at central-difference offsets 1 and 3, each
/// sqrt(gx^2 + gy^2)/sqrt(8) averaged over channels.
FeatureVolume extract_volume(const ImageRaster& image);

/// Mean feature vector over mask foreground, or over every pixel when no
/// mask is given.
FeatureVector global_pool(const FeatureVolume& volume, const std::optional<BinaryMask>& mask = std::nullopt);

}  // namespace semnav

namespace semnav {

/// Rectangular window of a volume (rows [row, row+height), cols [col, col+width)).
FeatureVolume crop(const FeatureVolume& volume, int row, int col, int height, int width);

}  // namespace semnav
