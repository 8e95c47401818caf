#include "matchlab/io.hpp"

#include <cerrno>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace matchlab::io {

namespace {

using json = nlohmann::json;

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(fmt::format("cannot write {}", path.string()));
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

// Rows of a CSV file after checking its header.
std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open {}", path.string()));
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != header) {
    throw FormatError(fmt::format("{}: expected header '{}'", path.string(), header));
  }
  const std::size_t cols = split(header).size();
  std::vector<std::vector<std::string>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != cols) {
      throw FormatError(fmt::format("{}:{}: expected {} fields, got {}", path.string(), lineno, cols, cells.size()));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::size_t parse_index(const std::string& s, std::size_t limit, const fs::path& path) {
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno != 0 || s[0] == '-' || v >= limit) {
    throw FormatError(fmt::format("{}: bad node index '{}'", path.string(), s));
  }
  return static_cast<std::size_t>(v);
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

double parse_double(const std::string& s) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  // ERANGE on underflow still yields the correctly rounded subnormal
  if (s.empty() || *end != '\0' || (errno == ERANGE && std::isinf(v))) throw FormatError(fmt::format("not a number: '{}'", s));
  return v;
}

// ---------------------------------------------------------------------------

void Manifest::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

bool Manifest::has(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.first == key) return true;
  }
  return false;
}

const std::string& Manifest::get(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.first == key) return e.second;
  }
  throw FormatError(fmt::format("manifest has no key '{}'", key));
}

void Manifest::write(const fs::path& path) const {
  auto out = open_out(path);
  for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
}

Manifest Manifest::read(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open {}", path.string()));
  Manifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(fmt::format("{}:{}: expected key=value", path.string(), lineno));
    m.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return m;
}

// ---------------------------------------------------------------------------

void write_production_table(const fs::path& path, const TypeGrid& grid, const ProductionFunction& f) {
  auto out = open_out(path);
  out << "i,j,f\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = 0; j < grid.size(); ++j) out << i << ',' << j << ',' << format_double(f.at(grid, i, j)) << '\n';
  }
}

ProductionFunction read_production_table(const fs::path& path, const TypeGrid& grid) {
  const std::size_t n = grid.size();
  std::vector<double> values(n * n, 0.0);
  std::vector<bool> seen(n * n, false);
  for (const auto& row : read_csv(path, "i,j,f")) {
    const std::size_t i = parse_index(row[0], n, path), j = parse_index(row[1], n, path);
    values[i * n + j] = parse_double(row[2]);
    seen[i * n + j] = true;
  }
  for (std::size_t e = 0; e < n * n; ++e) {
    if (!seen[e]) throw FormatError(fmt::format("{}: missing entry ({}, {})", path.string(), e / n, e % n));
  }
  return ProductionFunction::tabulated(grid, std::move(values));
}

void write_platform(const fs::path& dir, const Platform& platform, const ProductionFunction& f,
                    Manifest& manifest) {
  fs::create_directories(dir);
  const std::size_t k = platform.cutoff();
  {
    auto out = open_out(dir / "platform.csv");
    out << "i,j,G\n";
    const KernelCsr& csr = platform.sparse();
    for (std::size_t a = 0; a < csr.rows(); ++a) {
      for (std::size_t e = csr.row_ptr[a]; e < csr.row_ptr[a + 1]; ++e) {
        out << k + a << ',' << k + csr.col[e] << ',' << format_double(csr.val[e]) << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / "transfers.csv");
    out << "i,t\n";
    for (std::size_t i = 0; i < platform.size(); ++i) out << i << ',' << format_double(platform.transfers()[i]) << '\n';
  }
  manifest.set("n", std::to_string(platform.size()));
  manifest.set("cutoff", std::to_string(k));
  manifest.set("f.kind", f.kind_name());
  manifest.set("f.c", f.constant());
  if (f.kind() == ProductionKind::tabulated) {
    write_production_table(dir / "production.csv", platform.grid(), f);
    manifest.set("f.table", "production.csv");
  }
}

PlatformFiles read_platform(const fs::path& dir) {
  const Manifest man = Manifest::read(dir / "manifest.txt");
  const auto n = static_cast<std::size_t>(parse_index(man.get("n"), static_cast<std::size_t>(-1), dir / "manifest.txt"));
  const TypeGrid grid(n);
  const std::size_t k = parse_index(man.get("cutoff"), n + 1, dir / "manifest.txt");
  const std::string kind = man.get("f.kind");
  std::optional<ProductionFunction> f;
  if (kind == "xy") {
    f = ProductionFunction::multiplicative();
  } else if (kind == "xy+c") {
    f = ProductionFunction::multiplicative_plus_constant(parse_double(man.get("f.c")));
  } else if (kind == "table") {
    f = read_production_table(dir / man.get("f.table"), grid);
  } else {
    throw FormatError(fmt::format("unknown production kind '{}'", kind));
  }

  const std::size_t m = n - k;
  std::vector<double> kernel(m * m, 0.0);
  const fs::path pcsv = dir / "platform.csv";
  for (const auto& row : read_csv(pcsv, "i,j,G")) {
    const std::size_t i = parse_index(row[0], n, pcsv), j = parse_index(row[1], n, pcsv);
    if (i < k || j < k) throw FormatError(fmt::format("{}: entry ({}, {}) touches an excluded node", pcsv.string(), i, j));
    kernel[(i - k) * m + (j - k)] = parse_double(row[2]);
  }
  std::vector<double> t(n, 0.0);
  const fs::path tcsv = dir / "transfers.csv";
  for (const auto& row : read_csv(tcsv, "i,t")) t[parse_index(row[0], n, tcsv)] = parse_double(row[1]);
  return {Platform(grid, k, std::move(kernel), std::move(t)), std::move(*f)};
}

void write_dse(const fs::path& dir, const TypeGrid& grid, const DSEState& dse) {
  fs::create_directories(dir);
  const std::size_t n = grid.size();
  {
    auto out = open_out(dir / "dse.csv");
    out << "i,x,w,u\n";
    for (std::size_t i = 0; i < n; ++i) {
      out << i << ',' << format_double(grid.node(i)) << ',' << format_double(dse.w[i]) << ','
          << format_double(dse.u[i]) << '\n';
    }
  }
  {
    auto out = open_out(dir / "acceptance.csv");
    out << "i,j\n";
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (dse.accepts(i, j)) out << i << ',' << j << '\n';
      }
    }
  }
  json j;
  j["bellman"] = dse.bellman_residual;
  j["balance"] = dse.balance_residual;
  j["iterations"] = dse.iterations;
  j["balance_rule"] = dse.balance == BalanceRule::linear ? "linear" : "quadratic";
  open_out(dir / "residuals.json") << j.dump(2) << '\n';
}

DSEState read_dse(const fs::path& dir, const TypeGrid& grid) {
  const std::size_t n = grid.size();
  DSEState s;
  s.w.assign(n, 0.0);
  s.u.assign(n, 1.0);
  s.accept.assign(n * n, 0);
  std::vector<bool> seen(n, false);
  const fs::path dcsv = dir / "dse.csv";
  for (const auto& row : read_csv(dcsv, "i,x,w,u")) {
    const std::size_t i = parse_index(row[0], n, dcsv);
    s.w[i] = parse_double(row[2]);
    s.u[i] = parse_double(row[3]);
    seen[i] = true;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i]) throw FormatError(fmt::format("{}: missing node {}", dcsv.string(), i));
  }
  const fs::path acsv = dir / "acceptance.csv";
  for (const auto& row : read_csv(acsv, "i,j")) {
    s.accept[parse_index(row[0], n, acsv) * n + parse_index(row[1], n, acsv)] = 1;
  }
  std::ifstream in(dir / "residuals.json");
  if (in) {
    const json j = json::parse(in);
    s.bellman_residual = j.value("bellman", 0.0);
    s.balance_residual = j.value("balance", 0.0);
    s.iterations = j.value("iterations", std::size_t{0});
    s.balance = j.value("balance_rule", std::string("linear")) == "quadratic" ? BalanceRule::quadratic
                                                                               : BalanceRule::linear;
  }
  return s;
}

void write_sim(const fs::path& path, const TypeGrid& grid, const SimOutcome& o) {
  auto out = open_out(path);
  out << "i,x,u_hat,se_u,payoff_hat,se_payoff\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out << i << ',' << format_double(grid.node(i)) << ',' << format_double(o.unmatched_fraction[i]) << ','
        << format_double(o.se_unmatched[i]) << ',' << format_double(o.payoff[i]) << ','
        << format_double(o.se_payoff[i]) << '\n';
  }
}

void write_events(const fs::path& path, const std::vector<SimEvent>& events) {
  auto out = open_out(path);
  out << "t,type,agent_a,agent_b\n";
  for (const SimEvent& e : events) {
    out << format_double(e.t) << ',' << event_name(e.type) << ',' << e.agent_a << ',' << e.agent_b << '\n';
  }
}

void write_design(const fs::path& path, const TypeGrid& grid, const DesignResult& d) {
  auto out = open_out(path);
  out << "i,x,w,t,m,included\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out << i << ',' << format_double(grid.node(i)) << ',' << format_double(d.dse.w[i]) << ','
        << format_double(d.platform.transfers()[i]) << ',' << format_double(d.rent[i]) << ','
        << (d.platform.is_included(i) ? 1 : 0) << '\n';
  }
}

void write_exclusion_curve(const fs::path& path, const TypeGrid& grid, const ExclusionResult& ex) {
  auto out = open_out(path);
  out << "k,x_tilde,profit,phi\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out << k << ',' << format_double(grid.node(k)) << ',' << format_double(ex.profit[k]) << ','
        << format_double(ex.phi[k]) << '\n';
  }
}

void write_audit(const fs::path& path, const AuditReport& r, bool certified) {
  json j;
  j["certified"] = certified;
  j["consistency_defect"] = r.consistency_defect;
  j["ir_min_slack"] = finite_or_null(r.ir_min_slack);
  j["ic_max_violation"] = finite_or_null(r.ic_max_violation);
  j["ic_by_class"] = {{"included_to_included", finite_or_null(r.ic_by_class[0])},
                      {"included_to_excluded", finite_or_null(r.ic_by_class[1])},
                      {"excluded_to_included", finite_or_null(r.ic_by_class[2])},
                      {"excluded_to_excluded", finite_or_null(r.ic_by_class[3])}};
  j["worst_misreport"] = {{"i", r.worst_true}, {"j", r.worst_report}, {"x", r.worst_x}, {"x_hat", r.worst_x_hat}};
  j["bellman_residual"] = r.bellman_residual;
  j["balance_residual"] = r.balance_residual;
  j["acceptance_violations"] = r.acceptance_violations;
  j["upper_set_ok"] = r.upper_set_ok;
  j["row_smoothness"] = r.row_smoothness;
  j["single_crossing_ok"] = r.single_crossing_ok;
  open_out(path) << j.dump(2) << '\n';
}

}  // namespace matchlab::io
