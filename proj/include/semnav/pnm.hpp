#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semnav/raster.hpp"

namespace semnav {

using Bytes = std::vector<std::uint8_t>;

/// Plain or raw PGM/PPM (P2, P3, P5, P6) with maxval 255. Intensities are v/255.
ImageRaster load_image(std::span<const std::uint8_t> bytes);

/// Raw P5 (1 channel) or P6 (3 channels); byte = floor(v*255 + 0.5).
Bytes save_image(const ImageRaster& image);

/// 8-bit grid from a PGM, values untouched.
Grid<std::uint8_t> load_gray8(std::span<const std::uint8_t> bytes);
Bytes save_gray8(const Grid<std::uint8_t>& grid);

SparseLabelRaster load_sparse_labels(std::span<const std::uint8_t> bytes, const LabelPalette& palette);
SemanticRaster load_semantic(std::span<const std::uint8_t> bytes, const LabelPalette& palette);

/// Any nonzero byte is foreground. Saved as 0/255.
BinaryMask load_mask(std::span<const std::uint8_t> bytes);
Bytes save_mask(const BinaryMask& mask);

/// 8-bit RGB render to raw P6.
Bytes save_rgb8(int width, int height, const std::vector<std::uint8_t>& rgb);

Bytes read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace semnav
