#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "matchlab/core.hpp"

namespace matchlab {

struct SimConfig {
  std::size_t agents_per_node = 100;
  double horizon = 2000.0;
  double burn_in = 200.0;
  std::uint64_t seed = 20240917;
  std::size_t replications = 8;
  /// Keep the event log of replication 0.
  bool record_events = false;

  /// Throws std::invalid_argument; also requires r (horizon - burn_in) >= 7.
  void validate(const SearchParams& params) const;
};

enum class EventType { missed, failed, rejected, match, divorce };
const char* event_name(EventType t);

struct SimEvent {
  double t;
  EventType type;
  long agent_a;  ///< -1 when absent
  long agent_b;

  friend bool operator==(const SimEvent&, const SimEvent&) = default;
};

/// Post-burn-in statistics, averaged over replications.
///
/// Tallies are summed over replications. meeting_count counts agent-side
/// meetings (two per pair event); missed meetings have a matched caller,
/// failed ones a matched callee, rejected ones fail the acceptance rule.
/// Standard errors are sd / sqrt(R) across replications (NaN when R = 1).
/// Excluded nodes report u = 1 and zero payoff with zero error.
struct SimOutcome {
  std::size_t cutoff = 0;
  std::uint64_t seed = 0;
  std::size_t replications = 0;
  std::vector<double> unmatched_fraction;
  std::vector<double> se_unmatched;
  std::vector<double> payoff;
  std::vector<double> se_payoff;

  std::uint64_t pair_event_count = 0;
  std::uint64_t meeting_count = 0;
  std::uint64_t missed_meeting_count = 0;
  std::uint64_t failed_meeting_count = 0;
  std::uint64_t rejected_meeting_count = 0;
  std::uint64_t match_formation_count = 0;
  std::uint64_t divorce_count = 0;

  /// meeting_count / (N (T - burn_in)) per replication, averaged.
  double meeting_rate = 0.0;
  double se_meeting_rate = 0.0;

  std::vector<SimEvent> events;
};

/// Gillespie simulation of quadratic bilateral search on the included nodes.
/// Throws std::invalid_argument for inconsistent platforms or bad wages and
/// EmptyMarketError when no node is included.
SimOutcome simulate(const Platform& platform, const ProductionFunction& f, const SearchParams& params,
                    const std::vector<double>& w, const SimConfig& cfg);

struct PayoffCheck {
  std::vector<double> z;  ///< (payoff - w) / se on included nodes, 0 elsewhere
  std::vector<bool> node_ok;
  bool pass = true;
};

/// Per-node test |payoff_i - w_i| <= tol_se * se_i on included nodes.
PayoffCheck payoff_check(const SimOutcome& outcome, const std::vector<double>& w, double tol_se);

/// splitmix64 finalizer used to derive replication seeds: seed_r = splitmix64(master + r).
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace matchlab
