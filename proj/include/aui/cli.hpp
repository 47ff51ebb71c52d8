// Command-line front end: gen-data, train-lstm, train-dqn, simulate, compare
// and serve.

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace aui::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 usage error.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_dispatch(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace aui::cli
