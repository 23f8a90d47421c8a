#include "semnav/pnm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "semnav/error.hpp"

namespace semnav {
namespace {

struct PnmHeader {
  char kind = 0;  // '2', '3', '5' or '6'
  int width = 0;
  int height = 0;
  int channels = 1;
  bool plain = false;
  std::size_t payload = 0;  // offset of first payload byte (raw) or first sample token (plain)
};

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

[[noreturn]] void format_error(std::size_t offset, const std::string& what) {
  fail(ErrorKind::Format, "pnm: " + what + " at byte offset " + std::to_string(offset));
}

void skip_space_and_comments(std::span<const std::uint8_t> b, std::size_t& pos) {
  while (pos < b.size()) {
    if (is_space(b[pos])) {
      ++pos;
    } else if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n' && b[pos] != '\r') ++pos;
    } else {
      break;
    }
  }
}

int read_uint(std::span<const std::uint8_t> b, std::size_t& pos, const char* field) {
  skip_space_and_comments(b, pos);
  if (pos >= b.size()) format_error(pos, std::string("unexpected end of data reading ") + field);
  if (b[pos] < '0' || b[pos] > '9') format_error(pos, std::string("expected digit for ") + field);
  long long value = 0;
  while (pos < b.size() && b[pos] >= '0' && b[pos] <= '9') {
    value = value * 10 + (b[pos] - '0');
    if (value > 1 << 24) format_error(pos, std::string(field) + " too large");
    ++pos;
  }
  return int(value);
}

PnmHeader parse_header(std::span<const std::uint8_t> b) {
  if (b.size() < 2 || b[0] != 'P') format_error(0, "missing P magic");
  PnmHeader h;
  h.kind = char(b[1]);
  switch (h.kind) {
    case '2': h.plain = true; h.channels = 1; break;
    case '3': h.plain = true; h.channels = 3; break;
    case '5': h.plain = false; h.channels = 1; break;
    case '6': h.plain = false; h.channels = 3; break;
    default: format_error(1, "unsupported magic");
  }
  std::size_t pos = 2;
  if (pos < b.size() && !is_space(b[pos]) && b[pos] != '#') format_error(pos, "expected whitespace after magic");
  h.width = read_uint(b, pos, "width");
  h.height = read_uint(b, pos, "height");
  const std::size_t maxval_at = pos;
  const int maxval = read_uint(b, pos, "maxval");
  if (maxval != 255) format_error(maxval_at, "maxval " + std::to_string(maxval) + " is not 255");
  if (h.width <= 0 || h.height <= 0) format_error(maxval_at, "non-positive dimensions");
  if (h.plain) {
    h.payload = pos;
  } else {
    if (pos >= b.size() || !is_space(b[pos])) format_error(pos, "expected single whitespace before raw payload");
    h.payload = pos + 1;
  }
  return h;
}

std::vector<std::uint8_t> read_samples(std::span<const std::uint8_t> b, const PnmHeader& h) {
  const std::size_t count = std::size_t(h.width) * std::size_t(h.height) * std::size_t(h.channels);
  std::vector<std::uint8_t> out(count);
  if (!h.plain) {
    const std::size_t available = b.size() > h.payload ? b.size() - h.payload : 0;
    if (available < count)
      format_error(b.size(), "truncated payload: expected " + std::to_string(count) + " bytes, found " +
                                 std::to_string(available));
    std::copy_n(b.begin() + std::ptrdiff_t(h.payload), count, out.begin());
    return out;
  }
  std::size_t pos = h.payload;
  for (std::size_t i = 0; i < count; ++i) {
    skip_space_and_comments(b, pos);
    if (pos >= b.size())
      format_error(pos, "truncated payload: expected " + std::to_string(count) + " samples, found " + std::to_string(i));
    const std::size_t at = pos;
    const int v = read_uint(b, pos, "sample");
    if (v > 255) format_error(at, "sample exceeds maxval");
    out[i] = std::uint8_t(v);
  }
  return out;
}

Bytes header_bytes(char kind, int width, int height) {
  const std::string head = std::string("P") + kind + "\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  return Bytes(head.begin(), head.end());
}

std::uint8_t quantize(double v) {
  const double scaled = std::floor(v * 255.0 + 0.5);
  return std::uint8_t(std::clamp(scaled, 0.0, 255.0));
}

}  // namespace

ImageRaster load_image(std::span<const std::uint8_t> bytes) {
  const auto h = parse_header(bytes);
  const auto samples = read_samples(bytes, h);
  ImageRaster image(h.width, h.height, h.channels);
  for (std::size_t i = 0; i < samples.size(); ++i) image.data[i] = double(samples[i]) / 255.0;
  return image;
}

Bytes save_image(const ImageRaster& image) {
  validate(image);
  Bytes out = header_bytes(image.channels == 1 ? '5' : '6', image.width, image.height);
  out.reserve(out.size() + image.data.size());
  for (double v : image.data) out.push_back(quantize(v));
  return out;
}

Grid<std::uint8_t> load_gray8(std::span<const std::uint8_t> bytes) {
  const auto h = parse_header(bytes);
  if (h.channels != 1) format_error(1, "expected a PGM (P2/P5) label map");
  Grid<std::uint8_t> grid(h.width, h.height);
  grid.data = read_samples(bytes, h);
  return grid;
}

Bytes save_gray8(const Grid<std::uint8_t>& grid) {
  Bytes out = header_bytes('5', grid.width, grid.height);
  out.insert(out.end(), grid.data.begin(), grid.data.end());
  return out;
}

SparseLabelRaster load_sparse_labels(std::span<const std::uint8_t> bytes, const LabelPalette& palette) {
  auto grid = load_gray8(bytes);
  SparseLabelRaster labels(grid.width, grid.height);
  labels.data = std::move(grid.data);
  validate(labels, palette);
  return labels;
}

SemanticRaster load_semantic(std::span<const std::uint8_t> bytes, const LabelPalette& palette) {
  auto grid = load_gray8(bytes);
  SemanticRaster semantic(grid.width, grid.height);
  semantic.data = std::move(grid.data);
  validate(semantic, palette);
  return semantic;
}

BinaryMask load_mask(std::span<const std::uint8_t> bytes) {
  const auto grid = load_gray8(bytes);
  BinaryMask mask(grid.width, grid.height);
  for (std::size_t i = 0; i < grid.size(); ++i) mask.data[i] = grid.data[i] != 0 ? 1 : 0;
  return mask;
}

Bytes save_mask(const BinaryMask& mask) {
  Grid<std::uint8_t> grid(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.size(); ++i) grid.data[i] = mask.data[i] ? 255 : 0;
  return save_gray8(grid);
}

Bytes save_rgb8(int width, int height, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != std::size_t(width) * std::size_t(height) * 3)
    fail(ErrorKind::DimensionMismatch, "rgb buffer does not match dimensions");
  Bytes out = header_bytes('6', width, height);
  out.insert(out.end(), rgb.begin(), rgb.end());
  return out;
}

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "' for reading");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text_file(const std::string& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace semnav
