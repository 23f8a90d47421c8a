#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semnav {

enum class ErrorKind {
  Format,          // malformed raster or JSON payload
  LabelDomain,     // label value outside the palette
  EmptyGroundTruth,
  EmptyLabels,
  EmptyMask,
  DimensionMismatch,
  InvalidArgument,
  Divergence,
  Episode,         // few-shot episode construction / exclusion violations
  Demonstration,
  NoRoute,
  NotFound,
  Conflict,
  Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace semnav
