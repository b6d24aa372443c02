#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace qvelab {

// Exit codes: 0 success, 2 validation error, 3 numeric failure (outputs are
// still written, with a per-point convergence mask where applicable).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace qvelab
