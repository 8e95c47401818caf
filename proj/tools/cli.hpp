#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "matchlab/config.hpp"

namespace matchlab::cli {

/// Exit codes of the command-line tool.
enum Exit : int { ok = 0, certification_failed = 1, config_error = 2, non_convergence = 3 };

/// Parses arguments (argv[0] is the program name) and runs one command.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Runs a fully resolved configuration; artifacts go to cfg.out.
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace matchlab::cli
