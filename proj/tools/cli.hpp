#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fdepi::cli {

// Order used by `pipeline`.
const std::vector<std::string>& step_names();

// Runs one command line (args[0] is the program name). Exit codes: 0 success,
// 1 invalid input or usage, 2 numerical failure, 3 anything else.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fdepi::cli
