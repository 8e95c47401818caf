#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "matchlab/designer.hpp"
#include "matchlab/solver.hpp"

using namespace matchlab;

namespace {

Platform uniform_platform(std::size_t n, std::size_t cutoff = 0) {
  const std::size_t m = n - cutoff;
  return Platform(TypeGrid(n), cutoff, std::vector<double>(m * m, 1.0 / static_cast<double>(m)));
}

// Banded symmetric doubly-stochastic kernel: weight 1/2 on the diagonal, 1/4 on each neighbour,
// with the missing neighbour mass folded back onto the diagonal at the edges.
Platform banded_platform(std::size_t n) {
  std::vector<double> G(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    G[i * n + i] = 0.5;
    if (i > 0) G[i * n + i - 1] = 0.25; else G[i * n + i] += 0.25;
    if (i + 1 < n) G[i * n + i + 1] = 0.25; else G[i * n + i] += 0.25;
  }
  return Platform(TypeGrid(n), 0, G);
}

// Newton's method on (Bellman, linear balance) with the acceptance matrix held fixed.
struct NewtonSolution {
  std::vector<double> w, u;
  double residual;
};

NewtonSolution newton_oracle(const Platform& p, const ProductionFunction& f, const SearchParams& sp,
                             const std::vector<std::uint8_t>& M) {
  const std::size_t n = p.size();
  const double th = sp.theta(), a = sp.alpha(), rho = sp.rho();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  Eigen::VectorXd u = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), a / (a + rho));
  const auto F = [&](std::size_t i, std::size_t j) { return f.at(p.grid(), i, j); };
  const auto acc = [&](std::size_t i, std::size_t j) { return M[i * n + j] ? 1.0 : 0.0; };
  double res = 1.0;
  for (int it = 0; it < 50 && res > 1e-15; ++it) {
    Eigen::VectorXd R(2 * n);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      double bell = 0.0, bal = 0.0, mass = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double mg = acc(i, j) * p.kernel(i, j);
        bell += mg * (F(i, j) - w[i] - w[j]) * u[j];
        bal += mg * u[j];
        mass += mg * u[j];
        J(i, j) += th * mg * u[j];
        J(i, n + j) = -th * mg * (F(i, j) - w[i] - w[j]);
        J(n + i, n + j) = -rho * mg;
      }
      R[i] = w[i] - th * bell;
      R[n + i] = a * (1.0 - u[i]) - rho * bal;
      J(i, i) += 1.0 + th * mass;
      J(n + i, n + i) -= a;
    }
    res = R.cwiseAbs().maxCoeff();
    const Eigen::VectorXd step = J.partialPivLu().solve(-R);
    w += step.head(n);
    u += step.tail(n);
  }
  return {std::vector<double>(w.data(), w.data() + n), std::vector<double>(u.data(), u.data() + n), res};
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("first-best lattice matches the closed form") {
  const TypeGrid g(100);
  const double vals[] = {0.5, 1.0, 2.0};
  for (const auto& f : {ProductionFunction::multiplicative(), ProductionFunction::multiplicative_plus_constant(0.2)}) {
    for (double rho : vals) {
      for (double alpha : vals) {
        for (double r : vals) {
          const SearchParams sp(rho, alpha, r);
          const auto s = solve_dse(first_best_platform(g, 0), f, sp);
          const double c = first_best_wage_coefficient(sp);
          for (std::size_t i = 0; i < g.size(); ++i) {
            CHECK(std::abs(s.u[i] - alpha / (alpha + rho)) <= 1e-10);
            CHECK(std::abs(s.w[i] - c * f.at(g, i, i)) <= 1e-8);
          }
          CHECK(s.bellman_residual <= 1e-10);
        }
      }
    }
  }
}

TEST_CASE("zero output: zero wages, closed-form density, full acceptance") {
  const std::size_t n = 8;
  const TypeGrid g(n);
  const auto f = ProductionFunction::tabulated(g, std::vector<double>(n * n, 0.0));
  const SearchParams sp(1.0, 0.5, 0.05);
  for (const auto& p : {uniform_platform(n, 2), banded_platform(n), first_best_platform(g, 3)}) {
    const auto s = solve_dse(p, f, sp);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(s.w[i] == 0.0);
      if (p.is_included(i)) {
        CHECK(s.u[i] == doctest::Approx(0.5 / 1.5).epsilon(1e-12));
        for (std::size_t j = p.cutoff(); j < n; ++j) CHECK(s.accepts(i, j));
      } else {
        CHECK(s.u[i] == 1.0);
      }
    }
  }
}

TEST_CASE("Newton oracle agrees with the fixed-point solver on non-diagonal kernels") {
  const SearchParams sp(1.0, 0.5, 0.05);
  for (const auto& f : {ProductionFunction::multiplicative(), ProductionFunction::multiplicative_plus_constant(0.2)}) {
    for (const auto& p : {uniform_platform(4), banded_platform(4), banded_platform(7)}) {
      const auto s = solve_dse(p, f, sp);
      const auto nw = newton_oracle(p, f, sp, s.accept);
      REQUIRE(nw.residual < 1e-13);
      CHECK(max_diff(s.w, nw.w) <= 1e-9);
      CHECK(max_diff(s.u, nw.u) <= 1e-10);
      // the Newton solution is self-consistent with the same acceptance rule
      CHECK(acceptance_matrix(f, p.grid(), nw.w) == s.accept);
    }
  }
}

TEST_CASE("residual certificates detect perturbations and flipped acceptance") {
  const std::size_t n = 20;
  const TypeGrid g(n);
  const SearchParams sp(1.0, 0.5, 0.05);
  const auto f = ProductionFunction::multiplicative();
  const auto p = banded_platform(n);
  const auto s = solve_dse(p, f, sp);
  const auto clean = dse_residuals(p, f, sp, s);
  CHECK(clean.bellman <= 1e-10);
  CHECK(clean.balance <= 1e-12 * sp.alpha());
  CHECK(clean.acceptance_violations == 0);

  auto bumped = s;
  bumped.w[12] += 0.05;
  CHECK(dse_residuals(p, f, sp, bumped).bellman >= 0.01);

  auto flipped = s;
  std::size_t fi = n, fj = n;
  for (std::size_t i = 0; i < n && fi == n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (surplus(f, g, s.w, i, j) > 0.0) {
        fi = i;
        fj = j;
        break;
      }
    }
  }
  REQUIRE(fi < n);
  flipped.accept[fi * n + fj] = 0;
  flipped.accept[fj * n + fi] = 0;
  CHECK(dse_residuals(p, f, sp, flipped).acceptance_violations == 2);
}

TEST_CASE("warm start from a solution is idempotent") {
  const SearchParams sp(2.0, 0.5, 0.5);
  const auto f = ProductionFunction::multiplicative_plus_constant(0.2);
  const auto p = banded_platform(30);
  const auto s = solve_dse(p, f, sp);
  SolverConfig cfg;
  cfg.warm_start = s.w;
  const auto again = solve_dse(p, f, sp, cfg);
  CHECK(again.iterations <= 2);
  CHECK(max_diff(again.w, s.w) <= 1e-10);
  CHECK(again.accept == s.accept);
}

TEST_CASE("property: acceptance is symmetric and densities lie in [0, 1] on random symmetric kernels") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const SearchParams sp(1.0, 0.5, 0.05);
  const auto f = ProductionFunction::multiplicative_plus_constant(0.1);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t n = 4 + static_cast<std::size_t>(trial % 6);
    // symmetric doubly-stochastic kernel: convex mix of the identity and random transpositions
    std::vector<double> G(n * n, 0.0);
    const int terms = 4;
    for (int t = 0; t < terms; ++t) {
      std::vector<std::size_t> perm(n);
      for (std::size_t i = 0; i < n; ++i) perm[i] = i;
      const std::size_t a = static_cast<std::size_t>(U(rng) * n) % n, b = static_cast<std::size_t>(U(rng) * n) % n;
      std::swap(perm[a], perm[b]);
      for (std::size_t i = 0; i < n; ++i) G[i * n + perm[i]] += 1.0 / terms;
    }
    const Platform p(TypeGrid(n), 0, G);
    const auto s = solve_dse(p, f, sp);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(s.u[i] >= 0.0);
      CHECK(s.u[i] <= 1.0);
      CHECK(s.w[i] >= 0.0);
      for (std::size_t j = 0; j < n; ++j) CHECK(s.accepts(i, j) == s.accepts(j, i));
    }
    CHECK(dse_residuals(p, f, sp, s).acceptance_violations == 0);
  }
}

TEST_CASE("quadratic balance: inner iterates stay in [alpha/(alpha+rho), 1]") {
  const SearchParams sp(1.0, 0.5, 0.05);
  const auto f = ProductionFunction::multiplicative();
  SolverConfig cfg;
  cfg.balance = BalanceRule::quadratic;
  const double lo = sp.alpha() / (sp.alpha() + sp.rho());
  std::size_t seen = 0;
  bool inside = true;
  cfg.on_inner_iterate = [&](std::span<const double> u) {
    ++seen;
    for (double v : u) inside = inside && v >= lo - 1e-15 && v <= 1.0;
  };
  const auto s = solve_dse(banded_platform(12), f, sp, cfg);
  CHECK(seen > 0);
  CHECK(inside);
  CHECK(s.balance == BalanceRule::quadratic);
}

TEST_CASE("quadratic balance on the first-best platform solves rho u^2 + alpha u - alpha = 0") {
  const TypeGrid g(50);
  for (double rho : {0.5, 1.0, 2.0}) {
    const SearchParams sp(rho, 0.5, 0.05);
    SolverConfig cfg;
    cfg.balance = BalanceRule::quadratic;
    const auto s = solve_dse(first_best_platform(g, 10), ProductionFunction::multiplicative(), sp, cfg);
    const double u = (-0.5 + std::sqrt(0.25 + 4.0 * rho * 0.5)) / (2.0 * rho);
    for (std::size_t i = 10; i < 50; ++i) CHECK(s.u[i] == doctest::Approx(u).epsilon(1e-11));
    // Bellman then gives w = theta u f / (1 + 2 theta u)
    const double th = sp.theta();
    CHECK(s.w[30] == doctest::Approx(th * u * g.node(30) * g.node(30) / (1.0 + 2.0 * th * u)).epsilon(1e-9));
  }
}

TEST_CASE("linear balance can leave [0, 1] on mixing kernels") {
  // uniform kernel, rho = 4 alpha: type 1 accepts everyone while type 0 is picky, and the linear
  // balance charges all of type 1's meetings to its whole mass, driving its density negative
  const SearchParams sp(2.0, 0.5, 0.05);
  const auto f = ProductionFunction::multiplicative();
  try {
    solve_dse(uniform_platform(10), f, sp);
    FAIL("expected an infeasible density");
  } catch (const InfeasibleDensityError& e) {
    CHECK(e.node() == 1);
    CHECK(e.density() == doctest::Approx(-0.0485437).epsilon(1e-5));
  }
  SolverConfig q;
  q.balance = BalanceRule::quadratic;
  const auto s = solve_dse(uniform_platform(10), f, sp, q);
  for (double v : s.u) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("error paths") {
  const SearchParams sp(1.0, 0.5, 0.05);
  const auto f = ProductionFunction::multiplicative();
  const Platform asym(TypeGrid(2), 0, {0.25, 0.75, 0.5, 0.5});
  CHECK_THROWS_AS(solve_dse(asym, f, sp), std::invalid_argument);

  SolverConfig cfg;
  cfg.max_outer = 1;
  CHECK_THROWS_AS(solve_dse(banded_platform(10), f, sp, cfg), NonConvergenceError);
  try {
    solve_dse(banded_platform(10), f, sp, cfg);
  } catch (const NonConvergenceError& e) {
    CHECK(e.iterations() == 1);
    CHECK(e.bellman_residual() > cfg.tol_w);
  }

  SolverConfig bad;
  bad.damping = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.damping = 0.5;
  bad.tol_w = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  SolverConfig warm;
  warm.warm_start = std::vector<double>(3, 0.0);
  CHECK_THROWS_AS(solve_dse(banded_platform(10), f, sp, warm), std::invalid_argument);
}

TEST_CASE("excluded nodes carry w = 0 and u = 1") {
  const SearchParams sp(1.0, 0.5, 0.05);
  const auto s = solve_dse(uniform_platform(10, 4), ProductionFunction::multiplicative(), sp);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(s.w[i] == 0.0);
    CHECK(s.u[i] == 1.0);
  }
  CHECK(s.w[9] > 0.0);
}

TEST_CASE("serial and parallel execution are bit-identical") {
  const SearchParams sp(1.0, 0.5, 0.05);
  const auto f = ProductionFunction::multiplicative_plus_constant(0.2);
  for (const auto& p : {banded_platform(200), uniform_platform(64, 10), first_best_platform(TypeGrid(500), 0)}) {
    SolverConfig a, b;
    a.exec = kernels::Exec::serial;
    b.exec = kernels::Exec::parallel;
    const auto sa = solve_dse(p, f, sp, a);
    const auto sb = solve_dse(p, f, sp, b);
    CHECK(sa.w == sb.w);
    CHECK(sa.u == sb.u);
    CHECK(sa.accept == sb.accept);
    CHECK(sa.iterations == sb.iterations);
    CHECK(bellman_rhs(p, f, sp, sa) == bellman_rhs(p, f, sp, sb));
  }
}
