#pragma once

#include <iosfwd>

namespace kgp {

// The `kgprune` command line. Exit codes: 0 success, 1 invalid usage or input,
// 2 runtime failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kgp
