#include "matchlab/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>

namespace matchlab {

const char* event_name(EventType t) {
  switch (t) {
    case EventType::missed: return "missed";
    case EventType::failed: return "failed";
    case EventType::rejected: return "rejected";
    case EventType::match: return "match";
    case EventType::divorce: return "divorce";
  }
  return "unknown";
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void SimConfig::validate(const SearchParams& params) const {
  if (agents_per_node < 1) throw std::invalid_argument("agents_per_node must be >= 1");
  if (replications < 1) throw std::invalid_argument("replications must be >= 1");
  if (!(burn_in >= 0.0) || !(horizon > burn_in) || !std::isfinite(horizon)) {
    throw std::invalid_argument(fmt::format("need horizon > burn_in >= 0 (horizon {}, burn_in {})", horizon, burn_in));
  }
  if (params.r() * (horizon - burn_in) < 7.0) {
    throw std::invalid_argument(fmt::format(
        "discounting window too short: r (T - burn_in) = {} < 7", params.r() * (horizon - burn_in)));
  }
}

namespace {

struct Market {
  std::size_t n, k, m, agents;
  double rho, alpha, r;
  KernelCsr csr;
  std::vector<double> cum;            // cumulative kernel weights per CSR row
  std::vector<std::uint8_t> accept;   // m x m block
  std::vector<double> flow;           // m x m: flow paid to the row node
  std::vector<double> surplus;        // m x m
};

struct Replication {
  std::vector<double> unmatched;
  std::vector<double> payoff;
  std::uint64_t pairs = 0, meetings = 0, missed = 0, failed = 0, rejected = 0, matches = 0, divorces = 0;
  std::vector<SimEvent> events;
};

Replication run_replication(const Market& mk, const SimConfig& cfg, std::uint64_t seed, bool record) {
  const std::size_t A = mk.agents;
  const std::size_t N = mk.m * A;
  const double T = cfg.horizon, burn = cfg.burn_in;
  const double meet_rate = 0.5 * mk.rho * static_cast<double>(N);

  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_int_distribution<std::size_t> pick_agent(0, N - 1);

  std::vector<long> partner(N, -1);
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  std::vector<std::size_t> pos(N, 0);
  std::vector<double> unmatched_at(mk.m, static_cast<double>(A));
  std::size_t unmatched_total = N;
  std::vector<double> integral(mk.m, 0.0);
  std::vector<double> clock(N, -1.0);  // payoff clock start; < 0 until set
  std::vector<double> since(N, 0.0);   // current match start
  std::vector<double> pay(N, 0.0);

  Replication rep;
  auto node = [A](std::size_t a) { return a / A; };
  auto settle = [&](std::size_t a, double t_end) {
    if (clock[a] < 0.0) return;
    const std::size_t i = node(a), j = node(static_cast<std::size_t>(partner[a]));
    const double phi = mk.flow[i * mk.m + j];
    pay[a] += phi * (std::exp(-mk.r * (since[a] - clock[a])) - std::exp(-mk.r * (t_end - clock[a])));
  };
  auto log = [&](double t, EventType type, long a, long b) {
    if (record) rep.events.push_back({t, type, a, b});
  };

  double t = 0.0;
  bool started = false;
  for (;;) {
    const double rate = meet_rate + mk.alpha * static_cast<double>(matches.size());
    const double t_next = t + expo(gen) / rate;
    const double lo = std::max(t, burn), hi = std::min(t_next, T);
    if (hi > lo) {
      for (std::size_t i = 0; i < mk.m; ++i) integral[i] += unmatched_at[i] * (hi - lo);
    }
    if (!started && t_next >= burn) {
      for (std::size_t a = 0; a < N; ++a) {
        if (partner[a] < 0) clock[a] = burn;
      }
      started = true;
    }
    if (t_next >= T) break;
    t = t_next;
    const bool counted = t >= burn;

    if (unif(gen) * rate < meet_rate) {
      if (counted) {
        ++rep.pairs;
        rep.meetings += 2;
      }
      const std::size_t c = pick_agent(gen);
      if (partner[c] >= 0) {
        if (counted) ++rep.missed;
        log(t, EventType::missed, static_cast<long>(c), -1);
      } else {
        const std::size_t i = node(c);
        const std::size_t lo_e = mk.csr.row_ptr[i], hi_e = mk.csr.row_ptr[i + 1];
        const double draw = unif(gen) * mk.cum[hi_e - 1];
        auto it = std::upper_bound(mk.cum.begin() + static_cast<std::ptrdiff_t>(lo_e),
                                   mk.cum.begin() + static_cast<std::ptrdiff_t>(hi_e), draw);
        if (it == mk.cum.begin() + static_cast<std::ptrdiff_t>(hi_e)) --it;
        const std::size_t j = mk.csr.col[static_cast<std::size_t>(it - mk.cum.begin())];
        long callee = -1;
        if (j == i) {
          if (A > 1) {
            std::size_t r = std::uniform_int_distribution<std::size_t>(0, A - 2)(gen);
            std::size_t cand = j * A + r;
            if (cand >= c) ++cand;
            callee = static_cast<long>(cand);
          }
        } else {
          callee = static_cast<long>(j * A + std::uniform_int_distribution<std::size_t>(0, A - 1)(gen));
        }
        if (callee < 0 || partner[static_cast<std::size_t>(callee)] >= 0) {
          if (counted) ++rep.failed;
          log(t, EventType::failed, static_cast<long>(c), callee);
        } else if (!mk.accept[i * mk.m + j]) {
          if (counted) ++rep.rejected;
          log(t, EventType::rejected, static_cast<long>(c), callee);
        } else {
          if (!(mk.surplus[i * mk.m + j] >= 0.0)) throw std::logic_error("match formed against the acceptance rule");
          const auto b = static_cast<std::size_t>(callee);
          partner[c] = callee;
          partner[b] = static_cast<long>(c);
          pos[c] = pos[b] = matches.size();
          matches.emplace_back(c, b);
          since[c] = since[b] = t;
          unmatched_at[i] -= 1.0;
          unmatched_at[j] -= 1.0;
          unmatched_total -= 2;
          if (counted) ++rep.matches;
          log(t, EventType::match, static_cast<long>(c), callee);
        }
      }
    } else {
      const std::size_t idx = std::uniform_int_distribution<std::size_t>(0, matches.size() - 1)(gen);
      const auto [a, b] = matches[idx];
      settle(a, t);
      settle(b, t);
      if (t >= burn) {
        if (clock[a] < 0.0) clock[a] = t;
        if (clock[b] < 0.0) clock[b] = t;
      }
      partner[a] = partner[b] = -1;
      matches[idx] = matches.back();
      pos[matches[idx].first] = pos[matches[idx].second] = idx;
      matches.pop_back();
      unmatched_at[node(a)] += 1.0;
      unmatched_at[node(b)] += 1.0;
      unmatched_total += 2;
      if (counted) ++rep.divorces;
      log(t, EventType::divorce, static_cast<long>(a), static_cast<long>(b));
    }
    if (unmatched_total + 2 * matches.size() != N) throw std::logic_error("agent conservation violated");
  }
  for (const auto& [a, b] : matches) {
    settle(a, T);
    settle(b, T);
  }

  const double window = T - burn;
  rep.unmatched.resize(mk.m);
  rep.payoff.assign(mk.m, 0.0);
  std::vector<std::size_t> counted_agents(mk.m, 0);
  for (std::size_t a = 0; a < N; ++a) {
    if (clock[a] < 0.0) continue;
    rep.payoff[node(a)] += pay[a];
    ++counted_agents[node(a)];
  }
  for (std::size_t i = 0; i < mk.m; ++i) {
    rep.unmatched[i] = integral[i] / (static_cast<double>(A) * window);
    rep.payoff[i] = counted_agents[i] ? rep.payoff[i] / static_cast<double>(counted_agents[i]) : 0.0;
  }
  return rep;
}

void mean_se(const std::vector<double>& xs, double& mean, double& se) {
  const double R = static_cast<double>(xs.size());
  double s = 0.0;
  for (double x : xs) s += x;
  mean = s / R;
  if (xs.size() < 2) {
    se = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  se = std::sqrt(ss / (R - 1.0)) / std::sqrt(R);
}

}  // namespace

SimOutcome simulate(const Platform& platform, const ProductionFunction& f, const SearchParams& params,
                    const std::vector<double>& w, const SimConfig& cfg) {
  cfg.validate(params);
  if (!platform.is_consistent()) {
    throw std::invalid_argument("simulation requires a consistent platform (meetings must be bilateral)");
  }
  const TypeGrid& grid = platform.grid();
  const std::size_t n = grid.size();
  if (w.size() != n) throw std::invalid_argument("wage vector does not match the grid");
  for (double v : w) {
    if (!std::isfinite(v)) throw std::invalid_argument("wages must be finite");
  }
  if (platform.included_count() == 0) throw EmptyMarketError("no included types to simulate");

  Market mk{n, platform.cutoff(), platform.included_count(), cfg.agents_per_node,
            params.rho(), params.alpha(), params.r(), platform.sparse(), {}, {}, {}, {}};
  mk.cum.resize(mk.csr.val.size());
  for (std::size_t a = 0; a < mk.m; ++a) {
    double s = 0.0;
    for (std::size_t e = mk.csr.row_ptr[a]; e < mk.csr.row_ptr[a + 1]; ++e) mk.cum[e] = (s += mk.csr.val[e]);
  }
  mk.accept.resize(mk.m * mk.m);
  mk.flow.resize(mk.m * mk.m);
  mk.surplus.resize(mk.m * mk.m);
  for (std::size_t a = 0; a < mk.m; ++a) {
    for (std::size_t b = 0; b < mk.m; ++b) {
      const std::size_t i = mk.k + a, j = mk.k + b;
      const double s = surplus(f, grid, w, i, j);
      mk.surplus[a * mk.m + b] = s;
      mk.accept[a * mk.m + b] = s >= 0.0 ? 1 : 0;
      mk.flow[a * mk.m + b] = 0.5 * (f.at(grid, i, j) + w[i] - w[j]);
    }
  }

  const std::size_t R = cfg.replications;
  std::vector<Replication> reps(R);
  const long lR = static_cast<long>(R);
#pragma omp parallel for schedule(dynamic)
  for (long r = 0; r < lR; ++r) {
    const auto ur = static_cast<std::size_t>(r);
    reps[ur] = run_replication(mk, cfg, splitmix64(cfg.seed + ur), cfg.record_events && ur == 0);
  }

  SimOutcome out;
  out.cutoff = mk.k;
  out.seed = cfg.seed;
  out.replications = R;
  out.unmatched_fraction.assign(n, 1.0);
  out.se_unmatched.assign(n, 0.0);
  out.payoff.assign(n, 0.0);
  out.se_payoff.assign(n, 0.0);
  std::vector<double> col(R);
  for (std::size_t a = 0; a < mk.m; ++a) {
    for (std::size_t r = 0; r < R; ++r) col[r] = reps[r].unmatched[a];
    mean_se(col, out.unmatched_fraction[mk.k + a], out.se_unmatched[mk.k + a]);
    for (std::size_t r = 0; r < R; ++r) col[r] = reps[r].payoff[a];
    mean_se(col, out.payoff[mk.k + a], out.se_payoff[mk.k + a]);
  }
  const double exposure = static_cast<double>(mk.m * mk.agents) * (cfg.horizon - cfg.burn_in);
  for (std::size_t r = 0; r < R; ++r) {
    const Replication& rp = reps[r];
    out.pair_event_count += rp.pairs;
    out.meeting_count += rp.meetings;
    out.missed_meeting_count += rp.missed;
    out.failed_meeting_count += rp.failed;
    out.rejected_meeting_count += rp.rejected;
    out.match_formation_count += rp.matches;
    out.divorce_count += rp.divorces;
    col[r] = static_cast<double>(rp.meetings) / exposure;
  }
  mean_se(col, out.meeting_rate, out.se_meeting_rate);
  out.events = std::move(reps[0].events);
  return out;
}

PayoffCheck payoff_check(const SimOutcome& outcome, const std::vector<double>& w, double tol_se) {
  const std::size_t n = outcome.payoff.size();
  if (w.size() != n) throw std::invalid_argument("wage vector does not match the simulation grid");
  PayoffCheck out;
  out.z.assign(n, 0.0);
  out.node_ok.assign(n, true);
  for (std::size_t i = outcome.cutoff; i < n; ++i) {
    const double diff = std::abs(outcome.payoff[i] - w[i]);
    const double se = outcome.se_payoff[i];
    out.node_ok[i] = diff <= tol_se * se || diff == 0.0;
    out.z[i] = se > 0.0 ? (outcome.payoff[i] - w[i]) / se : 0.0;
    out.pass = out.pass && out.node_ok[i];
  }
  return out;
}

}  // namespace matchlab
