#include "semnav/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "semnav/error.hpp"
#include "semnav/irl.hpp"
#include "semnav/pnm.hpp"
#include "semnav/rng.hpp"

namespace semnav {
namespace {

using Rgb = std::array<double, 3>;

enum class Texture { Blotches, Grain, Stripes, Smooth, Checker, Ripples };

struct Appearance {
  Rgb base;
  Texture texture;
  double texture_amplitude;
  double noise;
};

/// Per-image random texture phases.
struct TextureState {
  double phase_x = 0.0, phase_y = 0.0, angle = 0.0;
};

double texture_value(Texture t, double amplitude, int r, int c, const TextureState& st, SplitMix64& rng) {
  switch (t) {
    case Texture::Blotches:
      return amplitude * std::sin(c / 9.0 + st.phase_x) * std::cos(r / 11.0 + st.phase_y);
    case Texture::Grain:
      return amplitude * rng.normal();
    case Texture::Stripes: {
      const double u = c * std::cos(st.angle) + r * std::sin(st.angle);
      return amplitude * (std::sin(2.0 * std::numbers::pi * u / 6.0 + st.phase_x) >= 0.0 ? 1.0 : -1.0);
    }
    case Texture::Smooth:
      return 0.0;
    case Texture::Checker:
      return amplitude * ((((r / 4) + (c / 4)) % 2 == 0) ? 1.0 : -1.0);
    case Texture::Ripples:
      return amplitude * std::sin((r + c) / 3.0 + st.phase_y);
  }
  return 0.0;
}

/// Paints `image` from a class map using per-class appearances.
void render(ImageRaster& image, const SemanticRaster& classes, const std::vector<Appearance>& looks,
            const std::vector<Rgb>& jitter, double global_noise, SplitMix64& rng) {
  TextureState st;
  st.phase_x = 2.0 * std::numbers::pi * rng.uniform();
  st.phase_y = 2.0 * std::numbers::pi * rng.uniform();
  st.angle = std::numbers::pi * rng.uniform();
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      const auto cls = classes(r, c);
      const auto& look = looks[cls];
      const double tex = texture_value(look.texture, look.texture_amplitude, r, c, st, rng);
      for (int ch = 0; ch < image.channels; ++ch) {
        const double v = look.base[std::size_t(ch)] + jitter[cls][std::size_t(ch)] + tex +
                         look.noise * rng.normal() + global_noise * rng.normal();
        // on the 8-bit grid so the written file reloads to the same raster
        image.at(r, c, ch) = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5) / 255.0;
      }
    }
  }
}

std::vector<Rgb> draw_jitter(std::size_t classes, double amplitude, SplitMix64& rng) {
  std::vector<Rgb> jitter(classes);
  for (auto& j : jitter)
    for (auto& v : j) v = amplitude * (2.0 * rng.uniform() - 1.0);
  return jitter;
}

int draw_int(SplitMix64& rng, int lo, int hi) { return lo + int(rng.uniform_index(std::uint64_t(hi - lo + 1))); }

void paint_ellipse(Grid<std::uint8_t>& grid, double cr, double cc, double rr, double rc, std::uint8_t value) {
  for (int r = 0; r < grid.height; ++r)
    for (int c = 0; c < grid.width; ++c) {
      const double dr = (r - cr) / rr, dc = (c - cc) / rc;
      if (dr * dr + dc * dc <= 1.0) grid(r, c) = value;
    }
}

void paint_rect(Grid<std::uint8_t>& grid, int r0, int c0, int h, int w, std::uint8_t value) {
  for (int r = std::max(0, r0); r < std::min(grid.height, r0 + h); ++r)
    for (int c = std::max(0, c0); c < std::min(grid.width, c0 + w); ++c) grid(r, c) = value;
}

std::string numbered(const std::string& stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu.%s", stem.c_str(), i, ext);
  return buf;
}

const std::vector<Appearance>& shapes_looks() {
  static const std::vector<Appearance> looks = {
      {{0.55, 0.45, 0.30}, Texture::Blotches, 0.05, 0.02},  // ground
      {{0.20, 0.55, 0.20}, Texture::Grain, 0.06, 0.00},     // vegetation
      {{0.75, 0.25, 0.20}, Texture::Stripes, 0.07, 0.01},   // roof
      {{0.15, 0.30, 0.70}, Texture::Smooth, 0.00, 0.01},    // water
      {{0.55, 0.55, 0.60}, Texture::Checker, 0.08, 0.01},   // debris
  };
  return looks;
}

}  // namespace

LabelPalette shapes_palette() {
  return LabelPalette({{0, "ground", {140, 115, 77}},
                       {1, "vegetation", {51, 140, 51}},
                       {2, "roof", {191, 64, 51}},
                       {3, "water", {38, 77, 179}},
                       {4, "debris", {140, 140, 153}}});
}

ShapesBenchmark make_shapes(const ShapesOptions& options) {
  if (options.count < 1 || options.size < 16) fail(ErrorKind::InvalidArgument, "shapes benchmark needs count >= 1 and size >= 16");
  ShapesBenchmark bench;
  bench.palette = shapes_palette();
  SplitMix64 rng(derive_seed(options.seed, 10));
  const int n = options.size;
  const double scale = n / 128.0;
  for (int i = 0; i < options.count; ++i) {
    std::vector<std::uint8_t> pool = {1, 2, 3, 4};
    shuffle(pool, rng);
    pool.resize(std::size_t(draw_int(rng, 2, 3)));
    SemanticRaster truth(n, n, 0);
    const int shapes = draw_int(rng, 4, 7);
    for (int s = 0; s < shapes; ++s) {
      const auto cls = pool[std::size_t(s) % pool.size()];
      const double cr = rng.uniform() * n, cc = rng.uniform() * n;
      if (rng.uniform() < 0.5) {
        const double rad_r = (10 + 14 * rng.uniform()) * scale, rad_c = (10 + 14 * rng.uniform()) * scale;
        paint_ellipse(truth, cr, cc, rad_r, rad_c, cls);
      } else {
        const int h = int((16 + 28 * rng.uniform()) * scale), w = int((16 + 28 * rng.uniform()) * scale);
        paint_rect(truth, int(cr) - h / 2, int(cc) - w / 2, h, w, cls);
      }
    }
    ImageRaster image(n, n, 3);
    render(image, truth, shapes_looks(), draw_jitter(5, 0.05, rng), 0.03, rng);
    bench.images.push_back(std::move(image));
    bench.truth.push_back(std::move(truth));
  }
  return bench;
}

FrugalDataset to_dataset(const ShapesBenchmark& bench, std::size_t begin, std::size_t end) {
  FrugalDataset ds;
  ds.palette = bench.palette;
  for (std::size_t i = begin; i < end && i < bench.images.size(); ++i)
    ds.items.push_back({bench.images[i], to_sparse(bench.truth[i])});
  return ds;
}

namespace {

constexpr std::uint8_t kRoad = 0, kGrass = 1, kBuilding = 2, kFlooded = 3;

const std::vector<Appearance>& flood_looks() {
  static const std::vector<Appearance> looks = {
      {{0.50, 0.50, 0.50}, Texture::Smooth, 0.00, 0.02},   // road
      {{0.25, 0.60, 0.22}, Texture::Grain, 0.06, 0.00},    // grass
      {{0.78, 0.30, 0.22}, Texture::Stripes, 0.07, 0.01},  // building
      {{0.20, 0.32, 0.66}, Texture::Ripples, 0.05, 0.01},  // flooded
  };
  return looks;
}

/// Roads on a grid, a few buildings, and a flood ellipse centered at
/// (flood_r, flood_c).
SemanticRaster flood_scene(int n, double flood_r, double flood_c, SplitMix64& rng) {
  SemanticRaster truth(n, n, kGrass);
  const int road_w = std::max(2, n / 16);
  for (int k = 1; k <= 2; ++k) {
    const int at = k * n / 3 + draw_int(rng, -2, 2);
    paint_rect(truth, at, 0, road_w, n, kRoad);
    paint_rect(truth, 0, at, n, road_w, kRoad);
  }
  for (int b = 0; b < 5; ++b) {
    const int h = draw_int(rng, n / 12, n / 7), w = draw_int(rng, n / 12, n / 7);
    const int r0 = draw_int(rng, 0, n - h), c0 = draw_int(rng, 0, n - w);
    // keep the middle row band clear so the query endpoints stay connected
    if (r0 <= n / 2 + 2 && r0 + h >= n / 2 - 2) continue;
    paint_rect(truth, r0, c0, h, w, kBuilding);
  }
  paint_ellipse(truth, flood_r, flood_c, n * 0.2, n * 0.12, kFlooded);
  return truth;
}

}  // namespace

FloodBenchmark make_flood(const FloodOptions& options) {
  if (options.size < 32) fail(ErrorKind::InvalidArgument, "flood benchmark needs size >= 32");
  const int n = options.size;
  FloodBenchmark bench;
  bench.base_palette = LabelPalette({{kRoad, "road", {128, 128, 128}}, {kGrass, "grass", {64, 160, 64}}, {kBuilding, "building", {200, 80, 60}}});
  bench.full_palette = bench.base_palette;
  bench.full_palette.add_class("flooded", {60, 90, 200});

  SplitMix64 rng(derive_seed(options.seed, 20));
  bench.truth = flood_scene(n, n / 2.0, n / 2.0, rng);
  bench.image = ImageRaster(n, n, 3);
  render(bench.image, bench.truth, flood_looks(), draw_jitter(4, 0.03, rng), 0.02, rng);

  bench.labels = SparseLabelRaster(n, n, kUnlabeled);
  for (std::size_t p = 0; p < bench.truth.size(); ++p)
    if (bench.truth.data[p] != kFlooded && rng.uniform() < options.label_fraction) bench.labels.data[p] = bench.truth.data[p];

  const SemanticRaster support_truth = flood_scene(n, n * 0.3 + n * 0.4 * rng.uniform(), n * 0.3 + n * 0.4 * rng.uniform(), rng);
  bench.support_image = ImageRaster(n, n, 3);
  render(bench.support_image, support_truth, flood_looks(), draw_jitter(4, 0.03, rng), 0.02, rng);
  bench.support_mask = binarize(support_truth, kFlooded);

  bench.start = {n / 2, 2};
  bench.goal = {n / 2, n - 3};
  bench.horizon = 3 * n;
  bench.planted = Eigen::VectorXd(4);
  bench.planted << -0.2, -0.5, -3.0, -4.0;

  const GridMdp mdp = make_grid_mdp(bench.truth, bench.full_palette.size(), bench.goal, bench.horizon);
  const auto policy = soft_value_iteration(mdp, RewardWeights{bench.planted});
  bench.demos.goal = bench.goal;
  while (int(bench.demos.paths.size()) < options.demo_count) {
    const Cell start{draw_int(rng, 0, n - 1), draw_int(rng, 0, n / 3)};
    const auto cls = bench.truth(start.row, start.col);
    if (cls == kFlooded || cls == kBuilding || start == bench.goal) continue;
    auto demo = sample_path(mdp, policy, start, rng);
    if (demo.path.back() != bench.goal) continue;
    bench.demos.paths.push_back(std::move(demo));
  }
  return bench;
}

void write_shapes(const ShapesBenchmark& bench, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "labels");
  write_text_file((fs::path(dir) / "palette.json").string(), dump_json(to_json(bench.palette)));
  for (std::size_t i = 0; i < bench.images.size(); ++i) {
    write_file((fs::path(dir) / "images" / numbered("img", i, "ppm")).string(), save_image(bench.images[i]));
    write_file((fs::path(dir) / "labels" / numbered("img", i, "pgm")).string(), save_gray8(bench.truth[i]));
  }
}

void write_flood(const FloodBenchmark& bench, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto at = [&](const char* name) { return (fs::path(dir) / name).string(); };
  write_file(at("image.ppm"), save_image(bench.image));
  write_text_file(at("palette.json"), dump_json(to_json(bench.base_palette)));
  write_text_file(at("palette_full.json"), dump_json(to_json(bench.full_palette)));
  write_file(at("labels.pgm"), save_gray8(bench.labels));
  write_file(at("truth.pgm"), save_gray8(bench.truth));
  write_file(at("support.ppm"), save_image(bench.support_image));
  write_file(at("support_mask.pgm"), save_mask(bench.support_mask));
  write_text_file(at("demos.json"), dump_json(to_json(bench.demos)));
  const Json query = {{"start", to_json(bench.start)}, {"goal", to_json(bench.goal)}, {"profile", "safe"}, {"horizon", bench.horizon}};
  write_text_file(at("query.json"), dump_json(query));
}

}  // namespace semnav
