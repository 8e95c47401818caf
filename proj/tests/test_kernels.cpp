#include <doctest.h>

#include <random>

#include "matchlab/designer.hpp"
#include "matchlab/kernels.hpp"

using namespace matchlab;

namespace {

struct Fixture {
  std::size_t n;
  Platform platform;
  std::vector<double> F, f_entry, w, u;
  std::vector<std::uint8_t> acc, accept;

  explicit Fixture(std::size_t n_, std::uint64_t seed)
      : n(n_), platform(glitch(first_best_platform(TypeGrid(n_), 0), GlitchSpec(0.2))) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 0.2);
    const TypeGrid& g = platform.grid();
    F = production_matrix(ProductionFunction::multiplicative(), g);
    w.resize(n);
    u.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = U(rng);
      u[i] = 0.3 + U(rng);
    }
    const KernelCsr& csr = platform.sparse();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t e = csr.row_ptr[i]; e < csr.row_ptr[i + 1]; ++e) f_entry.push_back(F[i * n + csr.col[e]]);
    }
    acc.resize(f_entry.size());
    accept.resize(n * n);
  }
};

}  // namespace

TEST_CASE("serial and parallel kernels agree bit for bit") {
  Fixture fx(257, 3);
  const KernelCsr& csr = fx.platform.sparse();
  const kernels::BlockSweep b{csr, fx.f_entry};

  std::vector<std::uint8_t> acc_s(fx.acc.size()), acc_p(fx.acc.size());
  kernels::serial::support_acceptance(b, fx.w, acc_s);
  kernels::parallel::support_acceptance(b, fx.w, acc_p);
  CHECK(acc_s == acc_p);

  std::vector<double> ms(fx.n), gs(fx.n), mp(fx.n), gp(fx.n);
  kernels::serial::row_sums(b, acc_s, fx.w, fx.u, ms, gs);
  kernels::parallel::row_sums(b, acc_s, fx.w, fx.u, mp, gp);
  CHECK(ms == mp);
  CHECK(gs == gp);

  std::vector<double> rs(fx.n), rp(fx.n);
  kernels::serial::bellman_rhs(b, acc_s, fx.w, fx.u, 0.9, rs);
  kernels::parallel::bellman_rhs(b, acc_s, fx.w, fx.u, 0.9, rp);
  CHECK(rs == rp);

  std::vector<double> us(fx.n), up(fx.n), es(fx.n), ep(fx.n);
  kernels::serial::linear_balance_sweep(csr, acc_s, fx.u, 0.5, 1.0, us, es);
  kernels::parallel::linear_balance_sweep(csr, acc_s, fx.u, 0.5, 1.0, up, ep);
  CHECK(us == up);
  CHECK(es == ep);
  kernels::serial::quadratic_balance_sweep(csr, acc_s, fx.u, 0.5, 1.0, us, es);
  kernels::parallel::quadratic_balance_sweep(csr, acc_s, fx.u, 0.5, 1.0, up, ep);
  CHECK(us == up);
  CHECK(es == ep);

  std::vector<std::uint8_t> as(fx.n * fx.n), ap(fx.n * fx.n);
  kernels::serial::acceptance_full(fx.F, fx.w, as);
  kernels::parallel::acceptance_full(fx.F, fx.w, ap);
  CHECK(as == ap);

  std::vector<double> ws(fx.n * fx.n), wp(fx.n * fx.n);
  kernels::serial::misreport_matrix(fx.F, as, fx.w, fx.u, csr, 0, 0.9, ws);
  kernels::parallel::misreport_matrix(fx.F, as, fx.w, fx.u, csr, 0, 0.9, wp);
  CHECK(ws == wp);

  std::vector<double> diag(fx.n), xs(fx.n), xp(fx.n);
  for (std::size_t i = 0; i < fx.n; ++i) diag[i] = fx.F[i * fx.n + i];
  kernels::serial::exclusion_profit(diag, xs);
  kernels::parallel::exclusion_profit(diag, xp);
  CHECK(xs == xp);
}

TEST_CASE("kernel reference values") {
  // two nodes, uniform kernel
  KernelCsr csr{{0, 2, 4}, {0, 1, 0, 1}, {0.5, 0.5, 0.5, 0.5}};
  const std::vector<double> f_entry = {1.0, 2.0, 2.0, 4.0};
  const kernels::BlockSweep b{csr, f_entry};
  const std::vector<double> w = {0.5, 1.0}, u = {0.5, 0.25};
  std::vector<std::uint8_t> acc(4);
  kernels::serial::support_acceptance(b, w, acc);
  CHECK(acc == std::vector<std::uint8_t>{1, 1, 1, 1});  // 1 - 0.5 - 0.5 = 0 is accepted

  std::vector<double> mass(2), gain(2), rhs(2);
  kernels::serial::row_sums(b, acc, w, u, mass, gain);
  CHECK(mass[0] == 0.5 * 0.5 + 0.5 * 0.25);
  CHECK(gain[1] == (2.0 - 0.5) * 0.5 * 0.5 + (4.0 - 1.0) * 0.5 * 0.25);
  kernels::serial::bellman_rhs(b, acc, w, u, 2.0, rhs);
  CHECK(rhs[0] == 2.0 * (0.0 * 0.25 + 0.5 * 0.125));

  std::vector<double> out(2), res(2);
  kernels::serial::quadratic_balance_sweep(csr, acc, u, 0.5, 1.0, out, res);
  CHECK(out[0] == doctest::Approx(0.5 / (0.5 + 0.375)));
  std::vector<double> diag = {1.0, 3.0}, prof(2);
  kernels::serial::exclusion_profit(diag, prof);
  CHECK(prof[0] == (4.0 + 2.0 * 1.0) / 2.0);
  CHECK(prof[1] == (3.0 + 3.0) / 2.0);
  CHECK(kernels::max_abs(std::vector<double>{-3.0, 2.0}) == 3.0);
}
