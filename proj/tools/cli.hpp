#pragma once

#include <iosfwd>

namespace shiftcp {

// Runs the shiftcp command line. Returns 0 on success, 2 on invalid input
// or usage, 1 on any other failure. Diagnostics go to err.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace shiftcp
