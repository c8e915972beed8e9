#pragma once

#include <iosfwd>

namespace sheetwarp {

/// Entry point shared by the `sheetwarp` binary and the tests. Returns 0 on
/// success, 1 on usage/validation errors, 2 on runtime failures.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sheetwarp
