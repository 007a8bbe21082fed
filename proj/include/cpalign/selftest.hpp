#pragma once

#include <iosfwd>

namespace cpalign {

/// Exercise the pipeline invariants on built-in synthetic fixtures, one
/// status line per check. Returns the number of failed checks.
int run_selftest(std::ostream& out);

}  // namespace cpalign
