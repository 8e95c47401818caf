#include "cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "matchlab/designer.hpp"
#include "matchlab/io.hpp"
#include "matchlab/simulator.hpp"
#include "matchlab/solver.hpp"
#include "matchlab/verifier.hpp"

namespace matchlab::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

ProductionFunction make_production(const RunConfig& cfg, const TypeGrid& grid) {
  if (cfg.f_kind == "xy") return ProductionFunction::multiplicative();
  if (cfg.f_kind == "xy+c") return ProductionFunction::multiplicative_plus_constant(cfg.f_c);
  return io::read_production_table(cfg.f_table, grid);
}

struct Market {
  Platform platform;
  ProductionFunction f;
  std::optional<ExclusionResult> exclusion;
};

std::size_t resolve_cutoff(const RunConfig& cfg, const TypeGrid& grid, const ProductionFunction& f,
                           std::optional<ExclusionResult>& ex) {
  if (cfg.cutoff_auto) {
    ex = optimal_exclusion(grid, f, cfg.solver.exec);
    return ex->cutoff;
  }
  return grid.cutoff_for(cfg.cutoff);
}

Market build_market(const RunConfig& cfg, const fs::path& source) {
  std::optional<ExclusionResult> ex;
  if (!source.empty()) {
    io::PlatformFiles files = io::read_platform(source);
    Platform p = cfg.epsilon ? glitch(files.platform, GlitchSpec(*cfg.epsilon)) : files.platform;
    return {std::move(p), std::move(files.f), std::nullopt};
  }
  const TypeGrid grid(cfg.n);
  ProductionFunction f = make_production(cfg, grid);
  Platform p = first_best_platform(grid, resolve_cutoff(cfg, grid, f, ex));
  if (cfg.epsilon) p = glitch(p, GlitchSpec(*cfg.epsilon));
  return {std::move(p), std::move(f), std::move(ex)};
}

fs::path platform_source(const RunConfig& cfg) {
  return cfg.platform == "first-best" ? fs::path{} : fs::path{cfg.platform};
}

io::Manifest base_manifest(const RunConfig& cfg) {
  io::Manifest m;
  m.set("tool", "matchlab");
  m.set("tool.version", MATCHLAB_VERSION);
  m.set("command", command_name(cfg.command));
  m.set("rho", cfg.rho);
  m.set("alpha", cfg.alpha);
  m.set("r", cfg.r);
  m.set("seed", std::to_string(cfg.seed));
  return m;
}

void finish_manifest(const RunConfig& cfg, io::Manifest& m) {
  echo_config(cfg, m);
  m.write(cfg.out / "manifest.txt");
}

int cmd_solve(const RunConfig& cfg, std::ostream& out) {
  const SearchParams params(cfg.rho, cfg.alpha, cfg.r);
  const Market mk = build_market(cfg, platform_source(cfg));
  const DSEState dse = solve_dse(mk.platform, mk.f, params, cfg.solver);
  io::Manifest man = base_manifest(cfg);
  io::write_platform(cfg.out, mk.platform, mk.f, man);
  io::write_dse(cfg.out, mk.platform.grid(), dse);
  if (mk.exclusion) io::write_exclusion_curve(cfg.out / "exclusion_curve.csv", mk.platform.grid(), *mk.exclusion);
  finish_manifest(cfg, man);
  fmt::print(out, "solve: n={} cutoff={} iterations={} bellman={:.3e} balance={:.3e}\n", mk.platform.size(),
             mk.platform.cutoff(), dse.iterations, dse.bellman_residual, dse.balance_residual);
  return ok;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  const SearchParams params(cfg.rho, cfg.alpha, cfg.r);
  const bool from_input = !cfg.input.empty();
  const Market mk = build_market(cfg, from_input ? cfg.input : platform_source(cfg));
  DSEState dse;
  if (from_input && fs::exists(cfg.input / "dse.csv") && !cfg.epsilon) {
    dse = io::read_dse(cfg.input, mk.platform.grid());
  } else {
    dse = solve_dse(mk.platform, mk.f, params, cfg.solver);
  }
  SimConfig sc = cfg.sim;
  sc.seed = cfg.seed;
  const SimOutcome o = simulate(mk.platform, mk.f, params, dse.w, sc);
  const PayoffCheck pc = payoff_check(o, dse.w, 4.0);

  io::Manifest man = base_manifest(cfg);
  io::write_platform(cfg.out, mk.platform, mk.f, man);
  io::write_dse(cfg.out, mk.platform.grid(), dse);
  io::write_sim(cfg.out / "sim.csv", mk.platform.grid(), o);
  if (sc.record_events) io::write_events(cfg.out / "events.csv", o.events);
  json j;
  j["seed"] = o.seed;
  j["replications"] = o.replications;
  j["pair_events"] = o.pair_event_count;
  j["meetings"] = o.meeting_count;
  j["missed_meetings"] = o.missed_meeting_count;
  j["failed_meetings"] = o.failed_meeting_count;
  j["rejected_meetings"] = o.rejected_meeting_count;
  j["matches_formed"] = o.match_formation_count;
  j["divorces"] = o.divorce_count;
  j["meeting_rate"] = o.meeting_rate;
  j["se_meeting_rate"] = std::isfinite(o.se_meeting_rate) ? json(o.se_meeting_rate) : json(nullptr);
  j["payoff_check_4se"] = pc.pass;
  std::ofstream(cfg.out / "sim_summary.json", std::ios::binary) << j.dump(2) << '\n';
  finish_manifest(cfg, man);
  fmt::print(out, "simulate: seed={} meetings={} matches={} rejected={} payoff_check={}\n", o.seed, o.meeting_count,
             o.match_formation_count, o.rejected_meeting_count, pc.pass ? "pass" : "fail");
  return ok;
}

int cmd_design(const RunConfig& cfg, std::ostream& out) {
  if (cfg.platform != "first-best") throw ConfigError("design builds first-best platforms; key 'platform' must be first-best");
  if (cfg.epsilon) throw ConfigError("design does not take 'epsilon'; glitch the platform with solve instead");
  const SearchParams params(cfg.rho, cfg.alpha, cfg.r);
  const TypeGrid grid(cfg.n);
  const ProductionFunction f = make_production(cfg, grid);
  const ExclusionResult ex = optimal_exclusion(grid, f, cfg.solver.exec);
  const std::size_t cutoff = cfg.cutoff_auto ? ex.cutoff : grid.cutoff_for(cfg.cutoff);
  const DesignResult d = design_platform(grid, f, params, cutoff, cfg.solver);

  io::Manifest man = base_manifest(cfg);
  io::write_platform(cfg.out, d.platform, f, man);
  io::write_dse(cfg.out, grid, d.dse);
  io::write_design(cfg.out / "design.csv", grid, d);
  io::write_exclusion_curve(cfg.out / "exclusion_curve.csv", grid, ex);
  man.set("design.theta", params.theta());
  man.set("design.wage_coefficient", first_best_wage_coefficient(params));
  man.set("design.unmatched", first_best_unmatched(params));
  man.set("design.transfer_coefficient", private_info_coefficient(params));
  man.set("design.x_tilde", d.exclusion);
  man.set("design.profit", d.profit);
  man.set("design.rent_total", d.rent_total);
  man.set("design.optimal_cutoff", std::to_string(ex.cutoff));
  finish_manifest(cfg, man);
  fmt::print(out, "design: cutoff={} x_tilde={} profit={:.10f} rent={:.10f}\n", cutoff, d.exclusion, d.profit,
             d.rent_total);
  return ok;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out) {
  const io::Manifest inman = io::Manifest::read(cfg.input / "manifest.txt");
  const SearchParams params(io::parse_double(inman.get("rho")), io::parse_double(inman.get("alpha")),
                            io::parse_double(inman.get("r")));
  const io::PlatformFiles files = io::read_platform(cfg.input);
  const DSEState dse = io::read_dse(cfg.input, files.platform.grid());
  const AuditReport rep = audit(files.platform, files.f, params, dse, cfg.solver.exec);
  const bool cert = rep.certified();
  fs::create_directories(cfg.out);
  io::write_audit(cfg.out / "audit.json", rep, cert);
  io::Manifest man = base_manifest(cfg);
  man.set("rho", params.rho());
  man.set("alpha", params.alpha());
  man.set("r", params.r());
  finish_manifest(cfg, man);
  fmt::print(out, "verify: certified={} ic_max_violation={:.3e} ir_min_slack={:.3e} consistency={:.3e}\n",
             cert ? "yes" : "no", rep.ic_max_violation, rep.ir_min_slack, rep.consistency_defect);
  return cert ? ok : certification_failed;
}

int cmd_oracle(const RunConfig& cfg, std::ostream& out) {
  const SearchParams params(cfg.rho, cfg.alpha, cfg.r);
  const TypeGrid small(cfg.oracle_n);
  const ProductionFunction f = make_production(cfg, small);
  const Prop4Result p4 = prop4_oracle(cfg.oracle_n, f, params);
  json j;
  j["inclusion"] = {{"n", cfg.oracle_n},
                    {"holds", p4.holds},
                    {"premise_holds", p4.premise_holds},
                    {"configurations", p4.configurations},
                    {"certified", p4.certified},
                    {"certified_non_upper", p4.certified_non_upper}};
  bool all = p4.holds;
  json blocks = json::array();
  for (std::size_t m = 1; m <= cfg.oracle_max_block; ++m) {
    const TypeGrid grid(std::max<std::size_t>(m, 2));
    const std::size_t cutoff = grid.size() - m;
    const ProductionFunction fg = cfg.f_kind == "table" ? make_production(cfg, grid) : f;
    const std::vector<Involution> all_nu = enumerate_involutions(m);
    const double id = involution_rent(grid, fg, params, cutoff, all_nu.front());
    double best = id;
    for (const Involution& nu : all_nu) best = std::min(best, involution_rent(grid, fg, params, cutoff, nu));
    const bool identity_min = id <= best;
    all = all && identity_min;
    blocks.push_back({{"block", m}, {"involutions", all_nu.size()}, {"identity_rent", id},
                      {"min_rent", best}, {"identity_minimal", identity_min}});
  }
  j["involutions"] = blocks;
  j["all_hold"] = all;
  fs::create_directories(cfg.out);
  std::ofstream(cfg.out / "oracle.json", std::ios::binary) << j.dump(2) << '\n';
  io::Manifest man = base_manifest(cfg);
  finish_manifest(cfg, man);
  fmt::print(out, "oracle: inclusion {} over {} configurations; identity rent minimal: {}\n",
             p4.holds ? "holds" : "FAILS", p4.configurations, all ? "yes" : "no");
  return all ? ok : certification_failed;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  struct Point {
    std::size_t n;
    double rho, alpha, r;
  };
  const auto or_default = [](const std::vector<double>& xs, double d) { return xs.empty() ? std::vector{d} : xs; };
  const std::vector<std::size_t> ns = cfg.sweep_n.empty() ? std::vector{cfg.n} : cfg.sweep_n;
  std::vector<Point> points;
  for (std::size_t n : ns) {
    for (double rho : or_default(cfg.sweep_rho, cfg.rho)) {
      for (double alpha : or_default(cfg.sweep_alpha, cfg.alpha)) {
        for (double r : or_default(cfg.sweep_r, cfg.r)) points.push_back({n, rho, alpha, r});
      }
    }
  }
  std::vector<int> codes(points.size(), ok);
  std::vector<std::string> messages(points.size());
  const long np = static_cast<long>(points.size());
#pragma omp parallel for schedule(dynamic) num_threads(static_cast<int>(cfg.jobs))
  for (long p = 0; p < np; ++p) {
    const auto up = static_cast<std::size_t>(p);
    RunConfig sub = cfg;
    sub.command = parse_command(cfg.sweep_command);
    sub.n = points[up].n;
    sub.rho = points[up].rho;
    sub.alpha = points[up].alpha;
    sub.r = points[up].r;
    sub.sweep_n.clear();
    sub.sweep_rho.clear();
    sub.sweep_alpha.clear();
    sub.sweep_r.clear();
    sub.out = cfg.out / fmt::format("point_{:04d}", up);
    std::ostringstream so, se;
    codes[up] = run(sub, so, se);
    messages[up] = se.str();
  }

  fs::create_directories(cfg.out);
  std::ofstream csv(cfg.out / "sweep.csv", std::ios::binary);
  csv << "point,dir,n,rho,alpha,r,exit_code\n";
  int worst = ok;
  for (std::size_t p = 0; p < points.size(); ++p) {
    csv << p << ',' << fmt::format("point_{:04d}", p) << ',' << points[p].n << ','
        << io::format_double(points[p].rho) << ',' << io::format_double(points[p].alpha) << ','
        << io::format_double(points[p].r) << ',' << codes[p] << '\n';
    if (codes[p] != ok) {
      fmt::print(err, "sweep point {}: exit {}: {}", p, codes[p], messages[p]);
      if (worst == ok) worst = codes[p];
    }
  }
  io::Manifest man = base_manifest(cfg);
  man.set("sweep.points", std::to_string(points.size()));
  finish_manifest(cfg, man);
  fmt::print(out, "sweep: {} points, {} failed\n", points.size(),
             std::count_if(codes.begin(), codes.end(), [](int c) { return c != ok; }));
  return worst;
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    cfg.validate();
    switch (cfg.command) {
      case Command::solve: return cmd_solve(cfg, out);
      case Command::simulate: return cmd_simulate(cfg, out);
      case Command::design: return cmd_design(cfg, out);
      case Command::verify: return cmd_verify(cfg, out);
      case Command::sweep: return cmd_sweep(cfg, out, err);
      case Command::oracle: return cmd_oracle(cfg, out);
    }
  } catch (const ConfigError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return config_error;
  } catch (const NonConvergenceError& e) {
    fmt::print(err, "non-convergence: {} (bellman {:.3e}, balance {:.3e}, iterations {})\n", e.what(),
               e.bellman_residual(), e.balance_residual(), e.iterations());
    return non_convergence;
  } catch (const io::FormatError& e) {
    fmt::print(err, "input error: {}\n", e.what());
    return config_error;
  } catch (const std::invalid_argument& e) {
    fmt::print(err, "invalid input: {}\n", e.what());
    return config_error;
  } catch (const InfeasibleDensityError& e) {
    fmt::print(err, "infeasible equilibrium: {}\n", e.what());
    return certification_failed;
  } catch (const EmptyMarketError& e) {
    fmt::print(err, "empty market: {}\n", e.what());
    return config_error;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return certification_failed;
  }
  return ok;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Search-equilibrium laboratory for matching platforms", "matchlab"};
  app.set_version_flag("--version", MATCHLAB_VERSION);
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  struct FlagValue {
    const char* key;
    std::optional<std::string> value;
  };
  std::vector<FlagValue> flags = {{"out", {}},   {"seed", {}},  {"jobs", {}}, {"n", {}},       {"rho", {}},
                                  {"alpha", {}}, {"r", {}},     {"f", {}},    {"c", {}},       {"cutoff", {}},
                                  {"epsilon", {}}, {"input", {}}};
  const std::vector<std::pair<Command, const char*>> commands = {
      {Command::solve, "Solve the steady-state equilibrium of a platform"},
      {Command::simulate, "Simulate the search process and compare with the equilibrium"},
      {Command::design, "Build the profit-maximizing platform and its exclusion curve"},
      {Command::verify, "Audit an artifact directory (consistency, IR, IC)"},
      {Command::sweep, "Run a command over a parameter grid"},
      {Command::oracle, "Run the small-grid brute-force oracles"}};
  for (const auto& [c, help] : commands) {
    CLI::App* sub = app.add_subcommand(command_name(c), help);
    sub->add_option("--config", config_path, "key=value configuration file");
    for (FlagValue& fv : flags) {
      const std::string name = std::string("--") + (std::string(fv.key) == "input" ? "in" : fv.key);
      sub->add_option(name, fv.value, fmt::format("override config key '{}'", fv.key));
    }
    sub->add_option("--set", sets, "extra key=value override (repeatable)");
  }

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  if (!argv_rev.empty()) argv_rev.pop_back();  // program name
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForVersion&) {
    out << MATCHLAB_VERSION << '\n';
    return ok;
  } catch (const CLI::ParseError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return config_error;
  }

  RunConfig cfg;
  try {
    for (const auto& [c, help] : commands) {
      if (app.got_subcommand(command_name(c))) {
        if (!config_path.empty()) load_config_file(cfg, config_path);
        cfg.command = c;
      }
    }
    for (const FlagValue& fv : flags) {
      if (fv.value) apply_setting(cfg, fv.key, *fv.value, fmt::format("--{}", fv.key));
    }
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError(fmt::format("--set: expected key=value, got '{}'", kv));
      apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1), "--set");
    }
  } catch (const ConfigError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return config_error;
  }
  return run(cfg, out, err);
}

}  // namespace matchlab::cli
