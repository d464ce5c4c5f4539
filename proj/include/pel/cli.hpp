#pragma once

#include <iosfwd>

namespace pel {

/// Entry point of the `pel` command-line tool. Returns 0 on success, 1 on a
/// usage error and 2 on a data or I/O error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pel
