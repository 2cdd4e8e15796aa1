#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace naudit {

// Runs one command line. Exit codes: 0 success, 1 validation error (bad
// arguments, config or input), 2 runtime failure.
int dispatch(int argc, const char* const* argv);
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace naudit
