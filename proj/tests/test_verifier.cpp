#include <doctest.h>

#include <cmath>
#include <limits>

#include "matchlab/designer.hpp"
#include "matchlab/solver.hpp"
#include "matchlab/verifier.hpp"

using namespace matchlab;

namespace {

const SearchParams kExample(1.0, 0.5, 0.05);

}  // namespace

TEST_CASE("misreport on the diagonal is the Bellman right-hand side") {
  const auto f = ProductionFunction::multiplicative_plus_constant(0.2);
  std::vector<double> G(36, 0.0);
  for (std::size_t i = 0; i < 6; ++i) {
    G[i * 6 + i] = 0.5;
    G[i * 6 + (5 - i)] += 0.5;
  }
  const Platform p(TypeGrid(6), 0, G);
  const auto s = solve_dse(p, f, kExample);
  const auto rhs = bellman_rhs(p, f, kExample, s);
  const auto wt = misreport_matrix(p, f, kExample, s);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(misreport_value(p, f, kExample, s, i, i) == rhs[i]);
    CHECK(wt[i * 6 + i] == rhs[i]);
  }
}

TEST_CASE("hand-computed misreport values on four nodes") {
  const TypeGrid g(4);
  const auto f = ProductionFunction::multiplicative();
  const auto p = first_best_platform(g, 0);
  const auto s = first_best_dse(g, f, kExample, 0);
  // type 7/8 reporting 5/8: theta (35/64 - w_3 - w_2) u
  CHECK(misreport_value(p, f, kExample, s, 3, 2) == doctest::Approx(5575.0 / 55968.0).epsilon(1e-14));
  CHECK(misreport_value(p, f, kExample, s, 0, 1) == doctest::Approx(0.005270869068038879).epsilon(1e-14));
  // 1/8 and 7/8 do not accept each other: surplus -129/3392
  CHECK(surplus(f, g, s.w, 0, 3) == doctest::Approx(-129.0 / 3392.0).epsilon(1e-14));
  CHECK(misreport_value(p, f, kExample, s, 0, 3) == 0.0);
}

TEST_CASE("excluded reports are worth nothing") {
  const TypeGrid g(10);
  const auto f = ProductionFunction::multiplicative();
  const auto p = first_best_platform(g, 4);
  const auto s = first_best_dse(g, f, kExample, 4);
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(misreport_value(p, f, kExample, s, i, j) == 0.0);
  }
  CHECK_THROWS_AS(misreport_value(p, f, kExample, s, 10, 0), std::out_of_range);
}

TEST_CASE("full inclusion with screening transfers is certified") {
  for (std::size_t n : {50u, 200u}) {
    const TypeGrid g(n);
    const auto f = ProductionFunction::multiplicative();
    const auto d = design_platform(g, f, kExample, 0);
    const auto rep = audit(d.platform, f, kExample, d.dse);
    CHECK(rep.ic_max_violation <= 1e-8);
    CHECK(rep.ir_min_slack >= -1e-12);
    CHECK(rep.certified());
    CHECK(rep.upper_set_ok);
    CHECK(rep.ic_by_class[0] <= 1e-8);
    CHECK(rep.ic_by_class[1] <= 0.0);
    CHECK(rep.ic_by_class[2] == -std::numeric_limits<double>::infinity());
  }
}

TEST_CASE("excluded types gain by reporting the cutoff type on the screening platform") {
  // An excluded type bargains from w = 0 at the report's meeting distribution, which
  // the screening transfer does not price; the gain sits in the excluded -> included class.
  const TypeGrid g(200);
  const auto f = ProductionFunction::multiplicative();
  const std::size_t k = g.cutoff_for(0.5);
  const auto d = design_platform(g, f, kExample, k);
  const auto rep = audit(d.platform, f, kExample, d.dse);
  CHECK(rep.ic_by_class[0] <= 1e-8);
  CHECK(rep.ic_by_class[1] <= 0.0);
  CHECK(rep.ic_by_class[3] <= 0.0);
  CHECK(rep.ic_by_class[2] > 1e-3);
  CHECK(rep.worst_true == k - 1);
  CHECK(rep.worst_report == k);
  CHECK_FALSE(rep.certified());
  // gain of the type just below the cutoff: theta (f(x, x~) - w(x~)) u - t(x~), with t(x~) = w(x~)
  const double th = kExample.theta(), u = first_best_unmatched(kExample);
  const double c = first_best_wage_coefficient(kExample);
  const double xk = g.node(k), xe = g.node(k - 1);
  const double expected = th * (xe * xk - c * xk * xk) * u - c * xk * xk;
  CHECK(rep.ic_max_violation == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("full extraction with exclusion is rejected") {
  const TypeGrid g(100);
  const auto f = ProductionFunction::multiplicative();
  const std::size_t k = g.cutoff_for(0.5);
  const auto s = first_best_dse(g, f, kExample, k);
  const Platform p = first_best_platform(g, k).with_transfers(perfect_info_transfers(s));
  const auto rep = audit(p, f, kExample, s);
  CHECK(rep.ic_max_violation > 0.0);
  CHECK(rep.ic_by_class[0] > 0.0);
  CHECK_FALSE(rep.certified());
  CHECK(rep.ir_min_slack == 0.0);
}

TEST_CASE("kernel asymmetry shows up as a consistency defect") {
  const Platform p(TypeGrid(2), 0, {0.5, 0.5, 0.501, 0.499});
  CHECK(p.consistency_defect() == doctest::Approx(1e-3).epsilon(1e-9));
  DSEState s;
  s.w = {0.0, 0.0};
  s.u = {1.0 / 3.0, 1.0 / 3.0};
  s.accept = {1, 1, 1, 1};
  const auto rep = audit(p, ProductionFunction::multiplicative(), kExample, s);
  CHECK(rep.consistency_defect == doctest::Approx(1e-3).epsilon(1e-9));
  CHECK_FALSE(rep.certified());
}

TEST_CASE("audit is pure and matches between execution modes") {
  const TypeGrid g(120);
  const auto f = ProductionFunction::multiplicative_plus_constant(0.2);
  const auto d = design_platform(g, f, kExample, 30);
  const auto a = audit(d.platform, f, kExample, d.dse, kernels::Exec::serial);
  const auto b = audit(d.platform, f, kExample, d.dse, kernels::Exec::parallel);
  const auto c = audit(d.platform, f, kExample, d.dse, kernels::Exec::parallel);
  CHECK(a.ic_max_violation == b.ic_max_violation);
  CHECK(a.ic_by_class == b.ic_by_class);
  CHECK(b.ic_max_violation == c.ic_max_violation);
  CHECK(a.worst_true == b.worst_true);
  CHECK(misreport_matrix(d.platform, f, kExample, d.dse, kernels::Exec::serial) ==
        misreport_matrix(d.platform, f, kExample, d.dse, kernels::Exec::parallel));
}

TEST_CASE("row smoothness of standard kernels") {
  const TypeGrid g(10);
  CHECK(audit(first_best_platform(g, 0), ProductionFunction::multiplicative(), kExample,
              first_best_dse(g, ProductionFunction::multiplicative(), kExample, 0))
            .row_smoothness == doctest::Approx(1.0));
  const Platform uni(g, 0, std::vector<double>(100, 0.1));
  const auto s = solve_dse(uni, ProductionFunction::multiplicative(), kExample);
  CHECK(audit(uni, ProductionFunction::multiplicative(), kExample, s).row_smoothness == 0.0);
}

TEST_CASE("deterministic mask audit") {
  const TypeGrid g(4);
  const auto f = ProductionFunction::multiplicative();
  // upper set with the identity: same verdict as the designed platform
  const auto up = audit_deterministic(g, f, kExample, {false, false, true, true}, Involution::identity(2));
  CHECK(up.upper_set);
  CHECK(up.ic_by_class[0] <= 1e-8);
  CHECK(up.ir_min_slack >= -1e-15);
  // a hole in the inclusion set invites the excluded type to report its neighbour
  const auto holed = audit_deterministic(g, f, kExample, {true, false, true, true}, Involution::identity(3));
  CHECK_FALSE(holed.upper_set);
  CHECK(holed.ic_max_violation > 1e-8);
  CHECK_THROWS_AS(audit_deterministic(g, f, kExample, {true, true, true, true}, Involution::identity(3)),
                  std::invalid_argument);
}

TEST_CASE("upper-set oracle on small grids") {
  const auto r4 = prop4_oracle(4, ProductionFunction::multiplicative(), kExample);
  CHECK(r4.holds);
  CHECK(r4.premise_holds);
  CHECK(r4.certified_non_upper == 0);
  CHECK(r4.configurations > 0);

  const auto r5 = prop4_oracle(5, ProductionFunction::multiplicative_plus_constant(0.2), kExample);
  CHECK(r5.holds);
  CHECK(r5.certified_non_upper == 0);

  const TypeGrid g2(2);
  const auto zero = prop4_oracle(2, ProductionFunction::tabulated(g2, std::vector<double>(4, 0.0)), kExample);
  CHECK(zero.holds);
  CHECK_FALSE(zero.premise_holds);

  CHECK_THROWS_AS(prop4_oracle(7, ProductionFunction::multiplicative(), kExample), std::invalid_argument);
}

TEST_CASE("property: the included-only IC maximum is non-positive on designed platforms") {
  for (double rho : {0.5, 1.0, 2.0}) {
    for (double alpha : {0.5, 1.0}) {
      const SearchParams sp(rho, alpha, 0.1);
      const TypeGrid g(80);
      const auto f = ProductionFunction::multiplicative();
      for (std::size_t k : {0u, 20u, 40u}) {
        const auto d = design_platform(g, f, sp, k);
        const auto rep = audit(d.platform, f, sp, d.dse);
        CHECK(rep.ic_by_class[0] <= 1e-8);
        CHECK(rep.ir_min_slack >= -1e-12);
      }
    }
  }
}
