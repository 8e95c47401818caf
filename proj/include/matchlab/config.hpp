#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "matchlab/io.hpp"
#include "matchlab/simulator.hpp"
#include "matchlab/solver.hpp"

namespace matchlab {

/// Bad configuration input; message carries file, line and key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Command { solve, simulate, design, verify, sweep, oracle };

struct RunConfig {
  Command command = Command::solve;
  std::size_t n = 100;
  double rho = 1.0;
  double alpha = 0.5;
  double r = 0.05;
  std::string f_kind = "xy";  ///< xy | xy+c | table
  double f_c = 0.0;
  std::filesystem::path f_table;
  /// "first-best" or a directory holding platform.csv / transfers.csv / manifest.txt.
  std::string platform = "first-best";
  bool cutoff_auto = false;
  double cutoff = 0.0;  ///< exclusion level x~ (first node with x_i >= x~)
  std::optional<double> epsilon;
  std::uint64_t seed = 20240917;
  std::filesystem::path out = "out";
  std::size_t jobs = 1;
  std::filesystem::path input;  ///< artifact directory for verify / simulate
  SolverConfig solver;
  SimConfig sim;
  std::size_t oracle_n = 5;
  std::size_t oracle_max_block = 7;
  std::string sweep_command = "solve";
  std::vector<double> sweep_rho, sweep_alpha, sweep_r;
  std::vector<std::size_t> sweep_n;

  /// Range checks that do not need the filesystem; throws ConfigError.
  void validate() const;
};

const char* command_name(Command c);
Command parse_command(const std::string& s);

/// Applies one key=value setting; `where` prefixes diagnostics.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value, const std::string& where);

/// Reads a flat key=value file (`#` comments, blank lines ignored).
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Every resolved setting, in a fixed order, as manifest entries.
void echo_config(const RunConfig& cfg, io::Manifest& manifest);

}  // namespace matchlab
