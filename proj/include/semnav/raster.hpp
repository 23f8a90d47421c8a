#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace semnav {

inline constexpr std::uint8_t kUnlabeled = 255;

/// Grid cell as (row, col).
struct Cell {
  int row = 0;
  int col = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Row-major grid of scalar cells.
template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, T fill = T{}) : width(w), height(h), data(std::size_t(w) * std::size_t(h), fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t index(int row, int col) const { return std::size_t(row) * std::size_t(width) + std::size_t(col); }
  std::size_t index(Cell c) const { return index(c.row, c.col); }
  Cell cell(std::size_t i) const { return {int(i / std::size_t(width)), int(i % std::size_t(width))}; }
  bool contains(Cell c) const { return c.row >= 0 && c.col >= 0 && c.row < height && c.col < width; }

  T& operator()(int row, int col) { return data[index(row, col)]; }
  const T& operator()(int row, int col) const { return data[index(row, col)]; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Channel-interleaved intensities in [0, 1].
struct ImageRaster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> data;

  ImageRaster() = default;
  ImageRaster(int w, int h, int ch, double fill = 0.0)
      : width(w), height(h), channels(ch), data(std::size_t(w) * std::size_t(h) * std::size_t(ch), fill) {}

  std::size_t pixels() const { return std::size_t(width) * std::size_t(height); }
  double& at(int row, int col, int ch) { return data[(std::size_t(row) * width + col) * channels + ch]; }
  double at(int row, int col, int ch) const { return data[(std::size_t(row) * width + col) * channels + ch]; }

  friend bool operator==(const ImageRaster&, const ImageRaster&) = default;
};

/// Throws Format if data length or value range is off.
void validate(const ImageRaster& image);

struct ClassInfo {
  std::uint8_t id = 0;
  std::string name;
  std::array<std::uint8_t, 3> color{};

  friend bool operator==(const ClassInfo&, const ClassInfo&) = default;
};

class LabelPalette {
public:
  LabelPalette() = default;
  explicit LabelPalette(std::vector<ClassInfo> classes);

  const std::vector<ClassInfo>& classes() const { return classes_; }
  std::size_t size() const { return classes_.size(); }
  bool contains(std::uint8_t id) const { return id < classes_.size(); }
  const ClassInfo& operator[](std::size_t id) const { return classes_[id]; }
  std::optional<std::uint8_t> find(const std::string& name) const;

  /// Appends a class with the next free id.
  std::uint8_t add_class(const std::string& name, std::array<std::uint8_t, 3> color);

  friend bool operator==(const LabelPalette&, const LabelPalette&) = default;

private:
  std::vector<ClassInfo> classes_;
};

struct SemanticRaster : Grid<std::uint8_t> {
  using Grid::Grid;
};

struct SparseLabelRaster : Grid<std::uint8_t> {
  using Grid::Grid;

  std::size_t labeled_count() const;
  double labeled_fraction() const;
};

struct BinaryMask : Grid<std::uint8_t> {
  using Grid::Grid;

  std::size_t foreground_count() const;
};

void validate(const SemanticRaster& raster, const LabelPalette& palette);
void validate(const SparseLabelRaster& raster, const LabelPalette& palette);

/// Treats every pixel of a dense map as labeled.
SparseLabelRaster to_sparse(const SemanticRaster& semantic);
/// Foreground where the label equals class_id.
BinaryMask binarize(const Grid<std::uint8_t>& labels, std::uint8_t class_id);

}  // namespace semnav
