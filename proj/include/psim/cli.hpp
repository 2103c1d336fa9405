#pragma once

// Command-line front end over the experiment runners. Exit codes:
//   0  success
//   1  runtime failure (divergence, I/O, failed gradient check)
//   2  usage or configuration error

#include <string>
#include <vector>

namespace psim {

int cli_main(int argc, const char* const* argv);

// Same, for in-process tests: `args` excludes the program name.
int cli_main(const std::vector<std::string>& args);

}  // namespace psim
