#include "matchlab/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

namespace matchlab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v, const std::string& where, const std::string& key) {
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(d)) {
    throw ConfigError(fmt::format("{}: key '{}': '{}' is not a finite number", where, key, v));
  }
  return d;
}

std::uint64_t to_u64(const std::string& v, const std::string& where, const std::string& key) {
  char* end = nullptr;
  errno = 0;
  const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || v[0] == '-' || *end != '\0' || errno == ERANGE) {
    throw ConfigError(fmt::format("{}: key '{}': '{}' is not a non-negative integer", where, key, v));
  }
  return u;
}

bool to_bool(const std::string& v, const std::string& where, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(fmt::format("{}: key '{}': expected true or false, got '{}'", where, key, v));
}

template <class T, class F>
std::vector<T> to_list(const std::string& v, F&& parse) {
  std::vector<T> out;
  std::istringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse(trim(item)));
  return out;
}

std::string join(const auto& xs) {
  std::string s;
  for (const auto& x : xs) {
    if (!s.empty()) s += ',';
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(x)>>) {
      s += io::format_double(x);
    } else {
      s += std::to_string(x);
    }
  }
  return s;
}

}  // namespace

const char* command_name(Command c) {
  switch (c) {
    case Command::solve: return "solve";
    case Command::simulate: return "simulate";
    case Command::design: return "design";
    case Command::verify: return "verify";
    case Command::sweep: return "sweep";
    case Command::oracle: return "oracle";
  }
  return "unknown";
}

Command parse_command(const std::string& s) {
  for (Command c : {Command::solve, Command::simulate, Command::design, Command::verify, Command::sweep,
                    Command::oracle}) {
    if (s == command_name(c)) return c;
  }
  throw ConfigError(fmt::format("unknown command '{}'", s));
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value, const std::string& where) {
  const auto num = [&] { return to_double(value, where, key); };
  const auto count = [&] { return static_cast<std::size_t>(to_u64(value, where, key)); };

  if (key == "command") {
    try {
      cfg.command = parse_command(value);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}: {}", where, e.what()));
    }
  } else if (key == "n") {
    cfg.n = count();
  } else if (key == "rho") {
    cfg.rho = num();
  } else if (key == "alpha") {
    cfg.alpha = num();
  } else if (key == "r") {
    cfg.r = num();
  } else if (key == "f") {
    if (value != "xy" && value != "xy+c" && value != "table") {
      throw ConfigError(fmt::format("{}: key 'f': expected xy, xy+c or table, got '{}'", where, value));
    }
    cfg.f_kind = value;
  } else if (key == "c") {
    cfg.f_c = num();
  } else if (key == "f.table") {
    cfg.f_table = value;
  } else if (key == "platform") {
    cfg.platform = value;
  } else if (key == "cutoff") {
    if (value == "auto") {
      cfg.cutoff_auto = true;
    } else {
      cfg.cutoff_auto = false;
      cfg.cutoff = num();
    }
  } else if (key == "epsilon") {
    if (value == "none") {
      cfg.epsilon.reset();
    } else {
      cfg.epsilon = num();
    }
  } else if (key == "seed") {
    cfg.seed = to_u64(value, where, key);
  } else if (key == "out") {
    cfg.out = value;
  } else if (key == "jobs") {
    cfg.jobs = count();
  } else if (key == "input") {
    cfg.input = value;
  } else if (key == "solver.tol_w") {
    cfg.solver.tol_w = num();
  } else if (key == "solver.tol_u") {
    cfg.solver.tol_u = num();
  } else if (key == "solver.max_outer") {
    cfg.solver.max_outer = count();
  } else if (key == "solver.max_inner") {
    cfg.solver.max_inner = count();
  } else if (key == "solver.damping") {
    cfg.solver.damping = num();
  } else if (key == "solver.w_init") {
    if (value == "zeros") {
      cfg.solver.w_init = WageInit::zeros;
    } else if (value == "first-best") {
      cfg.solver.w_init = WageInit::first_best_guess;
    } else {
      throw ConfigError(fmt::format("{}: key '{}': expected zeros or first-best, got '{}'", where, key, value));
    }
  } else if (key == "solver.balance") {
    if (value == "linear") {
      cfg.solver.balance = BalanceRule::linear;
    } else if (value == "quadratic") {
      cfg.solver.balance = BalanceRule::quadratic;
    } else {
      throw ConfigError(fmt::format("{}: key '{}': expected linear or quadratic, got '{}'", where, key, value));
    }
  } else if (key == "solver.exec") {
    if (value == "serial") {
      cfg.solver.exec = kernels::Exec::serial;
    } else if (value == "parallel") {
      cfg.solver.exec = kernels::Exec::parallel;
    } else {
      throw ConfigError(fmt::format("{}: key '{}': expected serial or parallel, got '{}'", where, key, value));
    }
  } else if (key == "sim.agents_per_node") {
    cfg.sim.agents_per_node = count();
  } else if (key == "sim.horizon") {
    cfg.sim.horizon = num();
  } else if (key == "sim.burn_in") {
    cfg.sim.burn_in = num();
  } else if (key == "sim.replications") {
    cfg.sim.replications = count();
  } else if (key == "sim.events") {
    cfg.sim.record_events = to_bool(value, where, key);
  } else if (key == "oracle.n") {
    cfg.oracle_n = count();
  } else if (key == "oracle.max_block") {
    cfg.oracle_max_block = count();
  } else if (key == "sweep.command") {
    if (value != "solve" && value != "design" && value != "simulate") {
      throw ConfigError(fmt::format("{}: key '{}': sweeps run solve, design or simulate, got '{}'", where, key, value));
    }
    cfg.sweep_command = value;
  } else if (key == "sweep.rho") {
    cfg.sweep_rho = to_list<double>(value, [&](const std::string& s) { return to_double(s, where, key); });
  } else if (key == "sweep.alpha") {
    cfg.sweep_alpha = to_list<double>(value, [&](const std::string& s) { return to_double(s, where, key); });
  } else if (key == "sweep.r") {
    cfg.sweep_r = to_list<double>(value, [&](const std::string& s) { return to_double(s, where, key); });
  } else if (key == "sweep.n") {
    cfg.sweep_n = to_list<std::size_t>(
        value, [&](const std::string& s) { return static_cast<std::size_t>(to_u64(s, where, key)); });
  } else {
    throw ConfigError(fmt::format("{}: unknown key '{}'", where, key));
  }
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file {}", path.string()));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = fmt::format("{}:{}", path.string(), lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("{}: expected key=value, got '{}'", where, line));
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(fmt::format("{}: empty key", where));
    apply_setting(cfg, key, trim(line.substr(eq + 1)), where);
  }
}

void RunConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (n < 2) fail(fmt::format("key 'n': grid needs at least 2 nodes, got {}", n));
  if (!(rho > 0.0)) fail("key 'rho': must be > 0");
  if (!(alpha > 0.0)) fail("key 'alpha': must be > 0");
  if (!(r > 0.0)) fail("key 'r': must be > 0");
  if (f_kind == "xy+c" && !(f_c >= 0.0)) fail("key 'c': must be >= 0");
  if (f_kind == "table" && f_table.empty()) fail("key 'f.table': required when f=table");
  if (!cutoff_auto && !(cutoff >= 0.0 && cutoff <= 1.0)) fail("key 'cutoff': must be 'auto' or lie in [0, 1]");
  if (epsilon && !(*epsilon > 0.0 && *epsilon < 1.0)) fail("key 'epsilon': must lie in (0, 1)");
  if (jobs < 1) fail("key 'jobs': must be >= 1");
  if (oracle_n < 2 || oracle_n > 6) fail("key 'oracle.n': must lie in [2, 6]");
  if (oracle_max_block < 1 || oracle_max_block > 9) fail("key 'oracle.max_block': must lie in [1, 9]");
  if ((command == Command::verify) && input.empty()) fail("verify needs an input directory (key 'input' or --in)");
  try {
    solver.validate();
  } catch (const std::invalid_argument& e) {
    fail(fmt::format("solver settings: {}", e.what()));
  }
  try {
    sim.validate(SearchParams(rho, alpha, r));
  } catch (const std::invalid_argument& e) {
    if (command == Command::simulate || (command == Command::sweep && sweep_command == "simulate")) {
      fail(fmt::format("simulation settings: {}", e.what()));
    }
  }
}

void echo_config(const RunConfig& c, io::Manifest& m) {
  const auto set = [&](const std::string& k, const std::string& v) { m.set("config." + k, v); };
  const auto num = [&](const std::string& k, double v) { set(k, io::format_double(v)); };
  set("command", command_name(c.command));
  set("n", std::to_string(c.n));
  num("rho", c.rho);
  num("alpha", c.alpha);
  num("r", c.r);
  set("f", c.f_kind);
  num("c", c.f_c);
  set("f.table", c.f_table.string());
  set("platform", c.platform);
  set("cutoff", c.cutoff_auto ? "auto" : io::format_double(c.cutoff));
  set("epsilon", c.epsilon ? io::format_double(*c.epsilon) : "none");
  set("seed", std::to_string(c.seed));
  set("jobs", std::to_string(c.jobs));
  set("input", c.input.string());
  num("solver.tol_w", c.solver.tol_w);
  num("solver.tol_u", c.solver.tol_u);
  set("solver.max_outer", std::to_string(c.solver.max_outer));
  set("solver.max_inner", std::to_string(c.solver.max_inner));
  num("solver.damping", c.solver.damping);
  set("solver.w_init", c.solver.w_init == WageInit::zeros ? "zeros" : "first-best");
  set("solver.balance", c.solver.balance == BalanceRule::linear ? "linear" : "quadratic");
  set("solver.exec", c.solver.exec == kernels::Exec::serial ? "serial" : "parallel");
  set("sim.agents_per_node", std::to_string(c.sim.agents_per_node));
  num("sim.horizon", c.sim.horizon);
  num("sim.burn_in", c.sim.burn_in);
  set("sim.replications", std::to_string(c.sim.replications));
  set("sim.events", c.sim.record_events ? "true" : "false");
  set("oracle.n", std::to_string(c.oracle_n));
  set("oracle.max_block", std::to_string(c.oracle_max_block));
  set("sweep.command", c.sweep_command);
  set("sweep.rho", join(c.sweep_rho));
  set("sweep.alpha", join(c.sweep_alpha));
  set("sweep.r", join(c.sweep_r));
  set("sweep.n", join(c.sweep_n));
}

}  // namespace matchlab
