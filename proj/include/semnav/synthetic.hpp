#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semnav/frugal.hpp"
#include "semnav/raster.hpp"
#include "semnav/serialize.hpp"

namespace semnav {

struct ShapesOptions {
  int count = 20;
  int size = 128;
  std::uint64_t seed = 0;
};

/// Textured regions (5 classes) plus pixel noise. Class 0 is the background;
/// each image draws shapes from a random subset of classes 1..4 with a
/// per-image color jitter.
struct ShapesBenchmark {
  LabelPalette palette;
  std::vector<ImageRaster> images;
  std::vector<SemanticRaster> truth;
};

LabelPalette shapes_palette();
ShapesBenchmark make_shapes(const ShapesOptions& options);

/// Full-label dataset over a slice of the benchmark.
FrugalDataset to_dataset(const ShapesBenchmark& bench, std::size_t begin, std::size_t end);

struct FloodOptions {
  int size = 64;
  std::uint64_t seed = 0;
  double label_fraction = 0.35;  // of non-flooded pixels
  int demo_count = 60;
};

/// A post-flood scene: roads, grass and buildings, with a flooded blob
/// across the straight line between the query endpoints. The base palette
/// lacks the flooded class; it is learned from one support example.
struct FloodBenchmark {
  LabelPalette base_palette;   // road, grass, building
  LabelPalette full_palette;   // + flooded
  ImageRaster image;
  SemanticRaster truth;        // full palette ids
  SparseLabelRaster labels;    // base classes only, flooded pixels unlabeled
  ImageRaster support_image;
  BinaryMask support_mask;
  DemoSet demos;               // sampled from planted weights on `truth`
  Eigen::VectorXd planted;     // reward weights over full_palette classes
  Cell start;
  Cell goal;
  int horizon = 0;
};

FloodBenchmark make_flood(const FloodOptions& options);

/// Writes the benchmark files into `dir` (created if needed).
void write_shapes(const ShapesBenchmark& bench, const std::string& dir);
void write_flood(const FloodBenchmark& bench, const std::string& dir);

}  // namespace semnav
