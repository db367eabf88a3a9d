#pragma once

#include <iosfwd>

namespace cgmdist::cli {

/// Runs one command line. Returns 0 on success, 1 when input data fail validation or cannot
/// be processed, 2 on usage errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cgmdist::cli
