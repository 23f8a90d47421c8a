#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "semnav/raster.hpp"

namespace semnav {

/// Entry point shared by the `semnav` binary and the tests. Returns the
/// process exit code: 0 success, 1 runtime failure (one JSON line on
/// `err`), 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parses "r,c".
Cell parse_cell(const std::string& text);

}  // namespace semnav
