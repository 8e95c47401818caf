#pragma once

// Artifact files: CSV (header row, LF, 17 significant digits), key=value
// manifests and JSON summaries.

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "matchlab/core.hpp"
#include "matchlab/designer.hpp"
#include "matchlab/simulator.hpp"
#include "matchlab/verifier.hpp"

namespace matchlab::io {

namespace fs = std::filesystem;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest-safe round-trip text for a double ("{:.17g}").
std::string format_double(double v);
/// Strict parse of a full token; throws FormatError.
double parse_double(const std::string& s);

/// Ordered key=value pairs; writing keeps insertion order.
class Manifest {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value) { set(key, format_double(value)); }
  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

  void write(const fs::path& path) const;
  static Manifest read(const fs::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Production table as `i,j,f` rows.
void write_production_table(const fs::path& path, const TypeGrid& grid, const ProductionFunction& f);
ProductionFunction read_production_table(const fs::path& path, const TypeGrid& grid);

/// platform.csv (`i,j,G` over nonzero entries, global node indices) and
/// transfers.csv (`i,t`). Manifest keys n, cutoff, f.kind, f.c are added to
/// `manifest`; tabulated f is stored beside them as production.csv.
void write_platform(const fs::path& dir, const Platform& platform, const ProductionFunction& f,
                    Manifest& manifest);

struct PlatformFiles {
  Platform platform;
  ProductionFunction f;
};
PlatformFiles read_platform(const fs::path& dir);

/// dse.csv (`i,x,w,u`), acceptance.csv (`i,j` accepted pairs) and residuals.json.
void write_dse(const fs::path& dir, const TypeGrid& grid, const DSEState& dse);
DSEState read_dse(const fs::path& dir, const TypeGrid& grid);

void write_sim(const fs::path& path, const TypeGrid& grid, const SimOutcome& outcome);
void write_events(const fs::path& path, const std::vector<SimEvent>& events);

void write_design(const fs::path& path, const TypeGrid& grid, const DesignResult& design);
void write_exclusion_curve(const fs::path& path, const TypeGrid& grid, const ExclusionResult& ex);

void write_audit(const fs::path& path, const AuditReport& report, bool certified);

}  // namespace matchlab::io
