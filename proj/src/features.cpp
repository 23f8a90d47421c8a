#include "semnav/features.hpp"

#include <cmath>
#include <vector>

#include "semnav/error.hpp"

namespace semnav {

int mirror_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

namespace {

constexpr int kPad = 7;

/// One channel with kPad cells of mirror padding on every side.
struct PaddedPlane {
  int width = 0;   // padded
  int height = 0;  // padded
  std::vector<double> values;

  double at(int row, int col) const { return values[std::size_t(row + kPad) * width + std::size_t(col + kPad)]; }
};

PaddedPlane pad_channel(const ImageRaster& image, int ch) {
  PaddedPlane plane;
  plane.width = image.width + 2 * kPad;
  plane.height = image.height + 2 * kPad;
  plane.values.resize(std::size_t(plane.width) * plane.height);
  for (int r = 0; r < plane.height; ++r) {
    const int src_r = mirror_index(r - kPad, image.height);
    for (int c = 0; c < plane.width; ++c)
      plane.values[std::size_t(r) * plane.width + c] = image.at(src_r, mirror_index(c - kPad, image.width), ch);
  }
  return plane;
}

}  // namespace

FeatureVolume extract_volume(const ImageRaster& image) {
  validate(image);
  const int channels = image.channels;
  FeatureVolume vol;
  vol.width = image.width;
  vol.height = image.height;
  vol.data = FeatureMatrix::Zero(Eigen::Index(image.pixels()), feature_dim(channels));
  const int grad_col = 7 * channels;
  const double grad_scale = 1.0 / std::sqrt(8.0);

  for (int ch = 0; ch < channels; ++ch) {
    const PaddedPlane plane = pad_channel(image, ch);
    for (int r = 0; r < image.height; ++r) {
      for (int c = 0; c < image.width; ++c) {
        auto row = vol.data.row(Eigen::Index(std::size_t(r) * image.width + c));
        row(7 * ch) = plane.at(r, c);
        for (int w = 0; w < 3; ++w) {
          const int radius = kWindowSides[w] / 2;
          const double n = double(kWindowSides[w] * kWindowSides[w]);
          double sum = 0.0;
          for (int dr = -radius; dr <= radius; ++dr)
            for (int dc = -radius; dc <= radius; ++dc) sum += plane.at(r + dr, c + dc);
          const double mean = sum / n;
          double sq = 0.0;
          for (int dr = -radius; dr <= radius; ++dr)
            for (int dc = -radius; dc <= radius; ++dc) {
              const double d = plane.at(r + dr, c + dc) - mean;
              sq += d * d;
            }
          row(7 * ch + 1 + 2 * w) = mean;
          row(7 * ch + 2 + 2 * w) = std::sqrt(sq / n);
        }
        for (int g = 0; g < 2; ++g) {
          const int k = kGradientOffsets[g];
          const double gx = plane.at(r, c + k) - plane.at(r, c - k);
          const double gy = plane.at(r + k, c) - plane.at(r - k, c);
          row(grad_col + g) += std::sqrt(gx * gx + gy * gy) * grad_scale / channels;
        }
      }
    }
  }
  return vol;
}

FeatureVector global_pool(const FeatureVolume& volume, const std::optional<BinaryMask>& mask) {
  if (!mask) return volume.data.colwise().mean().transpose();
  if (std::size_t(mask->width) * std::size_t(mask->height) != volume.pixels() || mask->width != volume.width)
    fail(ErrorKind::DimensionMismatch, "mask dimensions do not match feature volume");
  FeatureVector sum = FeatureVector::Zero(volume.dim());
  std::size_t count = 0;
  for (std::size_t p = 0; p < volume.pixels(); ++p) {
    if (!mask->data[p]) continue;
    sum += volume.pixel(p).transpose();
    ++count;
  }
  if (count == 0) fail(ErrorKind::EmptyMask, "pooling mask has no foreground pixels");
  return sum / double(count);
}

}  // namespace semnav

namespace semnav {

FeatureVolume crop(const FeatureVolume& volume, int row, int col, int height, int width) {
  if (row < 0 || col < 0 || height <= 0 || width <= 0 || row + height > volume.height || col + width > volume.width)
    fail(ErrorKind::DimensionMismatch, "crop window falls outside the feature volume");
  FeatureVolume out;
  out.width = width;
  out.height = height;
  out.data.resize(Eigen::Index(width) * height, volume.dim());
  for (int r = 0; r < height; ++r)
    out.data.middleRows(Eigen::Index(r) * width, width) =
        volume.data.middleRows(Eigen::Index(row + r) * volume.width + col, width);
  return out;
}

}  // namespace semnav
