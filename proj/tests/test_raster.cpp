#include <string>

#include "doctest.h"

#include "semnav/error.hpp"
#include "semnav/metrics.hpp"
#include "semnav/pnm.hpp"
#include "semnav/rng.hpp"

using namespace semnav;

namespace {

Bytes text_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

LabelPalette two_classes() { return LabelPalette({{0, "a", {0, 0, 0}}, {1, "b", {255, 255, 255}}}); }

}  // namespace

TEST_CASE("splitmix64 matches the reference stream") {
  SplitMix64 rng(1234567);
  CHECK(rng.next() == 6457827717110365317ull);
  CHECK(rng.next() == 3203168211198807973ull);
  SplitMix64 zero(0);
  CHECK(zero.next() == 0xE220A8397B1DCDAFull);
}

TEST_CASE("uniform draws stay in range") {
  SplitMix64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(rng.uniform_index(7) < 7);
  }
}

TEST_CASE("P2 endpoints decode to 0 and 1") {
  const auto img = load_image(text_bytes("P2\n2 1\n255\n0 255\n"));
  CHECK(img.width == 2);
  CHECK(img.channels == 1);
  CHECK(img.data == std::vector<double>{0.0, 1.0});
}

TEST_CASE("short P6 payload is a format error") {
  Bytes bytes = text_bytes("P6\n2 2\n255\n");
  bytes.resize(bytes.size() + 2 * 2 * 3 - 1, 7);
  CHECK(kind_of([&] { load_image(bytes); }) == ErrorKind::Format);
}

TEST_CASE("save rounds half up and writes P5") {
  ImageRaster zero(3, 2, 1);
  const auto bytes = save_image(zero);
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(bytes.size() == header.size() + 6);
  CHECK(std::string(bytes.begin(), bytes.begin() + std::ptrdiff_t(header.size())) == header);
  for (std::size_t i = header.size(); i < bytes.size(); ++i) CHECK(bytes[i] == 0);

  ImageRaster half(1, 1, 1, 0.5);
  CHECK(save_image(half).back() == 128);
}

TEST_CASE("random rasters survive save/load") {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int ch = trial % 2 ? 3 : 1;
    ImageRaster img(1 + int(rng.uniform_index(9)), 1 + int(rng.uniform_index(9)), ch);
    for (auto& v : img.data) v = double(rng.uniform_index(256)) / 255.0;
    const auto back = load_image(save_image(img));
    CHECK(back == img);
    CHECK(save_image(back) == save_image(img));
  }
}

TEST_CASE("ascii P3 matches binary P6") {
  const auto a = load_image(text_bytes("P3\n# comment\n1 1\n255\n10 20 30\n"));
  Bytes b = text_bytes("P6\n1 1\n255\n");
  b.insert(b.end(), {10, 20, 30});
  CHECK(a == load_image(b));
}

TEST_CASE("sparse labels") {
  const auto palette = two_classes();
  SUBCASE("all unlabeled") {
    Grid<std::uint8_t> g(4, 3, kUnlabeled);
    CHECK(load_sparse_labels(save_gray8(g), palette).labeled_fraction() == 0.0);
  }
  SUBCASE("out-of-palette value names the pixel") {
    Grid<std::uint8_t> g(2, 2, 0);
    g(1, 0) = 7;
    try {
      load_sparse_labels(save_gray8(g), palette);
      FAIL("expected a label-domain error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::LabelDomain);
      CHECK(std::string(e.what()).find("pixel 2 (row 1, col 0)") != std::string::npos);
    }
  }
  SUBCASE("half labeled") {
    Grid<std::uint8_t> g(2, 2, kUnlabeled);
    g(0, 0) = 0;
    g(1, 1) = 0;
    CHECK(load_sparse_labels(save_gray8(g), palette).labeled_fraction() == 0.5);
  }
}

TEST_CASE("palette rejects reserved and duplicate entries") {
  CHECK(kind_of([] { LabelPalette({{0, "a", {}}, {1, "a", {}}}); }) == ErrorKind::Format);
  CHECK(kind_of([] { LabelPalette({{1, "a", {}}}); }) == ErrorKind::Format);
}

TEST_CASE("metrics") {
  SUBCASE("identity") {
    SemanticRaster pred(3, 1);
    pred.data = {0, 1, 1};
    const auto m = compute_metrics(pred, to_sparse(pred));
    CHECK(m.overall_accuracy == 1.0);
    CHECK(m.per_class_iou.at(0) == 1.0);
    CHECK(m.per_class_iou.at(1) == 1.0);
  }
  SUBCASE("disjoint single-class maps") {
    SemanticRaster pred(2, 2, 1);
    SparseLabelRaster truth(2, 2, 0);
    const auto m = compute_metrics(pred, truth);
    CHECK(m.overall_accuracy == 0.0);
    CHECK(m.per_class_iou.at(0) == 0.0);
  }
  SUBCASE("2x2 hand case") {
    // cells: (0,0) hit class 0; (0,1) truth 0 pred 1; (1,0) hit class 1; (1,1) unlabeled.
    // IoU(0) = 1 / |{(0,0),(0,1)}|, IoU(1) = 1 / |{(0,1),(1,0)}|.
    SparseLabelRaster truth(2, 2);
    truth.data = {0, 0, 1, kUnlabeled};
    SemanticRaster pred(2, 2);
    pred.data = {0, 1, 1, 1};
    const auto m = compute_metrics(pred, truth);
    CHECK(m.overall_accuracy == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(m.per_class_iou.at(0) == 0.5);
    CHECK(m.per_class_iou.at(1) == 0.5);
    CHECK(m.mean_iou == 0.5);
  }
  SUBCASE("empty ground truth") {
    SemanticRaster pred(2, 2);
    CHECK(kind_of([&] { compute_metrics(pred, SparseLabelRaster(2, 2, kUnlabeled)); }) == ErrorKind::EmptyGroundTruth);
  }
}

TEST_CASE("mask iou") {
  BinaryMask a(2, 2), b(2, 2);
  a.data = {1, 1, 0, 0};
  b.data = {0, 1, 1, 0};
  CHECK(mask_iou(a, b) == doctest::Approx(1.0 / 3.0));
  CHECK(mask_iou(a, a) == 1.0);
}
