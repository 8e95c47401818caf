#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "matchlab/designer.hpp"
#include "matchlab/simulator.hpp"
#include "matchlab/solver.hpp"

using namespace matchlab;

namespace {

const SearchParams kExample(1.0, 0.5, 0.05);

SimConfig small_config() {
  SimConfig c;
  c.agents_per_node = 60;
  c.horizon = 400.0;
  c.burn_in = 50.0;
  c.replications = 4;
  c.seed = 99;
  return c;
}

}  // namespace

TEST_CASE("splitmix64 reference values") {
  // first two outputs of the reference splitmix64 generator started from state 0
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(splitmix64(0x9e3779b97f4a7c15ULL) == 0x6e789e6aa1b965f4ULL);
}

TEST_CASE("configuration validation") {
  SimConfig c;
  CHECK_NOTHROW(c.validate(kExample));
  c.burn_in = c.horizon;
  CHECK_THROWS_AS(c.validate(kExample), std::invalid_argument);
  c = SimConfig{};
  c.horizon = 100.0;
  c.burn_in = 0.0;
  CHECK_THROWS_AS(c.validate(kExample), std::invalid_argument);  // r (T - burn_in) = 5 < 7
  c = SimConfig{};
  c.agents_per_node = 0;
  CHECK_THROWS_AS(c.validate(kExample), std::invalid_argument);
  c = SimConfig{};
  c.replications = 0;
  CHECK_THROWS_AS(c.validate(kExample), std::invalid_argument);
}

TEST_CASE("input errors") {
  const TypeGrid g(4);
  const auto f = ProductionFunction::multiplicative();
  const SimConfig c = small_config();
  const Platform asym(g, 0, {0.5, 0.5, 0, 0, 0.25, 0.75, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1});
  CHECK_THROWS_AS(simulate(asym, f, kExample, std::vector<double>(4, 0.0), c), std::invalid_argument);
  const auto fb = first_best_platform(g, 0);
  CHECK_THROWS_AS(simulate(fb, f, kExample, std::vector<double>(3, 0.0), c), std::invalid_argument);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(simulate(fb, f, kExample, std::vector<double>{0, nan, 0, 0}, c), std::invalid_argument);
  CHECK_THROWS_AS(simulate(first_best_platform(g, 4), f, kExample, std::vector<double>(4, 0.0), c),
                  EmptyMarketError);
}

TEST_CASE("identical seeds give identical runs") {
  const TypeGrid g(5);
  const auto f = ProductionFunction::multiplicative();
  const auto p = first_best_platform(g, 1);
  const auto s = first_best_dse(g, f, kExample, 1);
  SimConfig c = small_config();
  c.record_events = true;
  const auto a = simulate(p, f, kExample, s.w, c);
  const auto b = simulate(p, f, kExample, s.w, c);
  CHECK(a.events == b.events);
  CHECK(!a.events.empty());
  CHECK(a.unmatched_fraction == b.unmatched_fraction);
  CHECK(a.payoff == b.payoff);
  CHECK(a.pair_event_count == b.pair_event_count);
  c.seed += 1;
  const auto d = simulate(p, f, kExample, s.w, c);
  CHECK(d.events != a.events);
  CHECK(std::is_sorted(a.events.begin(), a.events.end(),
                       [](const SimEvent& x, const SimEvent& y) { return x.t < y.t; }));
}

TEST_CASE("zero output: every unmatched meeting forms a match and payoffs vanish") {
  const TypeGrid g(4);
  const auto f = ProductionFunction::tabulated(g, std::vector<double>(16, 0.0));
  const Platform p(g, 0, std::vector<double>(16, 0.25));
  const auto out = simulate(p, f, kExample, std::vector<double>(4, 0.0), small_config());
  CHECK(out.rejected_meeting_count == 0);
  CHECK(out.match_formation_count > 0);
  for (std::size_t i = 0; i < 4; ++i) CHECK(out.payoff[i] == 0.0);
}

TEST_CASE("first-best platform: no rejected meetings, meeting rate near rho") {
  const TypeGrid g(6);
  const auto f = ProductionFunction::multiplicative_plus_constant(0.2);
  const auto p = first_best_platform(g, 0);
  const auto s = first_best_dse(g, f, kExample, 0);
  const auto out = simulate(p, f, kExample, s.w, small_config());
  CHECK(out.rejected_meeting_count == 0);
  CHECK(out.meeting_count == 2 * out.pair_event_count);
  CHECK(out.pair_event_count == out.missed_meeting_count + out.failed_meeting_count +
                                    out.rejected_meeting_count + out.match_formation_count);
  CHECK(std::abs(out.meeting_rate - kExample.rho()) <= 3.0 * out.se_meeting_rate + 1e-12);
  CHECK(out.se_meeting_rate > 0.0);
}

TEST_CASE("simulation agrees with the quadratic-balance solver") {
  const std::size_t n = 5;
  const TypeGrid g(n);
  const auto f = ProductionFunction::multiplicative();
  SimConfig c;
  c.agents_per_node = 150;
  c.horizon = 600.0;
  c.burn_in = 100.0;
  c.replications = 6;
  c.seed = 4242;
  // a banded kernel exercises cross-type meetings
  std::vector<double> G(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    G[i * n + i] = 0.5;
    if (i > 0) G[i * n + i - 1] = 0.25; else G[i * n + i] += 0.25;
    if (i + 1 < n) G[i * n + i + 1] = 0.25; else G[i * n + i] += 0.25;
  }
  const Platform p(g, 0, G);
  SolverConfig q;
  q.balance = BalanceRule::quadratic;
  const auto s = solve_dse(p, f, kExample, q);
  const auto out = simulate(p, f, kExample, s.w, c);
  const double slack = 1.0 / static_cast<double>(c.agents_per_node);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(std::abs(out.unmatched_fraction[i] - s.u[i]) <= 3.0 * out.se_unmatched[i] + slack);
    CHECK(std::abs(out.payoff[i] - s.w[i]) <= 3.0 * out.se_payoff[i] + slack * s.w[i] + 1e-3);
  }
}

TEST_CASE("payoff check rejects doubled wages") {
  const TypeGrid g(4);
  const auto f = ProductionFunction::multiplicative();
  const auto p = first_best_platform(g, 0);
  SolverConfig q;
  q.balance = BalanceRule::quadratic;
  const auto s = solve_dse(p, f, kExample, q);
  SimConfig c = small_config();
  c.agents_per_node = 120;
  const auto out = simulate(p, f, kExample, s.w, c);
  auto doubled = s.w;
  for (double& v : doubled) v *= 2.0;
  CHECK_FALSE(payoff_check(out, doubled, 4.0).pass);
  const auto ok = payoff_check(out, s.w, 6.0);
  CHECK(ok.z.size() == 4);
}

TEST_CASE("excluded nodes report no activity") {
  const TypeGrid g(6);
  const auto f = ProductionFunction::multiplicative();
  const auto p = first_best_platform(g, 2);
  const auto s = first_best_dse(g, f, kExample, 2);
  const auto out = simulate(p, f, kExample, s.w, small_config());
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(out.unmatched_fraction[i] == 1.0);
    CHECK(out.payoff[i] == 0.0);
    CHECK(out.se_payoff[i] == 0.0);
  }
  CHECK(out.cutoff == 2);
}

TEST_CASE("homogeneous nodes have statistically indistinguishable densities") {
  const TypeGrid g(6);
  const auto f = ProductionFunction::multiplicative();
  const auto p = first_best_platform(g, 0);
  const auto s = first_best_dse(g, f, kExample, 0);
  const auto out = simulate(p, f, kExample, s.w, small_config());
  double pooled = 0.0;
  for (double v : out.se_unmatched) pooled += v * v;
  pooled = std::sqrt(pooled / 6.0);
  const auto [lo, hi] = std::minmax_element(out.unmatched_fraction.begin(), out.unmatched_fraction.end());
  CHECK(*hi - *lo <= 4.0 * std::sqrt(2.0) * pooled);
}

TEST_CASE("single replication reports NaN standard errors") {
  const TypeGrid g(3);
  const auto f = ProductionFunction::multiplicative();
  SimConfig c = small_config();
  c.replications = 1;
  const auto out = simulate(first_best_platform(g, 0), f, kExample, first_best_dse(g, f, kExample, 0).w, c);
  CHECK(std::isnan(out.se_unmatched[1]));
  CHECK(out.replications == 1);
}
