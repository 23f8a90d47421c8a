#include "semnav/raster.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "semnav/error.hpp"

namespace semnav {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Format: return "format";
    case ErrorKind::LabelDomain: return "label-domain";
    case ErrorKind::EmptyGroundTruth: return "empty-ground-truth";
    case ErrorKind::EmptyLabels: return "empty-labels";
    case ErrorKind::EmptyMask: return "empty-mask";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Episode: return "episode";
    case ErrorKind::Demonstration: return "demonstration";
    case ErrorKind::NoRoute: return "no-route";
    case ErrorKind::NotFound: return "not-found";
    case ErrorKind::Conflict: return "conflict";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

void validate(const ImageRaster& image) {
  if (image.width <= 0 || image.height <= 0) fail(ErrorKind::Format, "image has non-positive dimensions");
  if (image.channels != 1 && image.channels != 3) fail(ErrorKind::Format, "image must have 1 or 3 channels");
  if (image.data.size() != image.pixels() * std::size_t(image.channels))
    fail(ErrorKind::Format, "image data length does not match width*height*channels");
  for (double v : image.data)
    if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::Format, "image intensity outside [0,1]");
}

LabelPalette::LabelPalette(std::vector<ClassInfo> classes) : classes_(std::move(classes)) {
  std::set<std::string> names;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].id != i)
      fail(ErrorKind::Format, "palette class ids must be 0..C-1 in order; got " + std::to_string(classes_[i].id) +
                                  " at position " + std::to_string(i));
    if (classes_[i].id == kUnlabeled) fail(ErrorKind::Format, "palette may not use the reserved id 255");
    if (!names.insert(classes_[i].name).second)
      fail(ErrorKind::Format, "duplicate palette class name '" + classes_[i].name + "'");
  }
}

std::optional<std::uint8_t> LabelPalette::find(const std::string& name) const {
  for (const auto& c : classes_)
    if (c.name == name) return c.id;
  return std::nullopt;
}

std::uint8_t LabelPalette::add_class(const std::string& name, std::array<std::uint8_t, 3> color) {
  if (classes_.size() >= kUnlabeled) fail(ErrorKind::InvalidArgument, "palette is full");
  if (find(name)) fail(ErrorKind::InvalidArgument, "class '" + name + "' already exists");
  const auto id = static_cast<std::uint8_t>(classes_.size());
  classes_.push_back({id, name, color});
  return id;
}

std::size_t SparseLabelRaster::labeled_count() const {
  return std::size_t(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != kUnlabeled; }));
}

double SparseLabelRaster::labeled_fraction() const {
  return data.empty() ? 0.0 : double(labeled_count()) / double(data.size());
}

std::size_t BinaryMask::foreground_count() const {
  return std::size_t(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

void validate(const SemanticRaster& raster, const LabelPalette& palette) {
  for (std::size_t i = 0; i < raster.size(); ++i)
    if (!palette.contains(raster.data[i]))
      fail(ErrorKind::LabelDomain,
           "semantic value " + std::to_string(raster.data[i]) + " at pixel " + std::to_string(i) + " is not a class id");
}

void validate(const SparseLabelRaster& raster, const LabelPalette& palette) {
  for (std::size_t i = 0; i < raster.size(); ++i) {
    const auto v = raster.data[i];
    if (v != kUnlabeled && !palette.contains(v))
      fail(ErrorKind::LabelDomain,
           "label value " + std::to_string(v) + " at pixel " + std::to_string(i) + " (row " +
               std::to_string(i / std::size_t(raster.width)) + ", col " + std::to_string(i % std::size_t(raster.width)) +
               ") is neither a class id nor 255");
  }
}

SparseLabelRaster to_sparse(const SemanticRaster& semantic) {
  SparseLabelRaster out(semantic.width, semantic.height);
  out.data = semantic.data;
  return out;
}

BinaryMask binarize(const Grid<std::uint8_t>& labels, std::uint8_t class_id) {
  BinaryMask mask(labels.width, labels.height);
  for (std::size_t i = 0; i < labels.size(); ++i) mask.data[i] = labels.data[i] == class_id ? 1 : 0;
  return mask;
}

}  // namespace semnav
