#include "matchlab/designer.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <stdexcept>

namespace matchlab {

namespace {

constexpr double kEquilibriumTolerance = 1e-8;

void require_equilibrium(const Platform& platform, const ProductionFunction& f, const SearchParams& params,
                         const DSEState& dse) {
  if (dse.size() != platform.size()) throw std::invalid_argument("equilibrium state does not match the platform");
  const DSEResiduals res = dse_residuals(platform, f, params, dse);
  if (!(res.bellman <= kEquilibriumTolerance) || !(res.balance <= kEquilibriumTolerance) ||
      res.acceptance_violations != 0) {
    throw std::invalid_argument(fmt::format(
        "state is not an equilibrium of the platform (bellman {:.3e}, balance {:.3e}, {} acceptance violations)",
        res.bellman, res.balance, res.acceptance_violations));
  }
}

// Centered differences on nodes k..n-1, one-sided at both ends.
std::vector<double> block_derivative(const TypeGrid& grid, std::size_t k, std::span<const double> w) {
  const std::size_t n = grid.size();
  const double h = grid.spacing();
  std::vector<double> d(n, 0.0);
  if (n - k < 2) return d;
  for (std::size_t i = k; i < n; ++i) {
    if (i == k) {
      d[i] = (w[i + 1] - w[i]) / h;
    } else if (i == n - 1) {
      d[i] = (w[i] - w[i - 1]) / h;
    } else {
      d[i] = (w[i + 1] - w[i - 1]) / (2.0 * h);
    }
  }
  return d;
}

}  // namespace

double first_best_wage_coefficient(const SearchParams& p) {
  const double rho = p.rho(), alpha = p.alpha(), r = p.r();
  return rho * alpha / (2.0 * ((r + alpha) * (alpha + rho) + rho * alpha));
}

double first_best_unmatched(const SearchParams& p) { return p.alpha() / (p.alpha() + p.rho()); }

double private_info_coefficient(const SearchParams& p) {
  const double theta = p.theta(), alpha = p.alpha(), rho = p.rho();
  return theta * alpha / (2.0 * (alpha + rho + 2.0 * theta * alpha));
}

double private_info_transfer(const ProductionFunction& f, const SearchParams& params, double x, double x_tilde) {
  return private_info_coefficient(params) * (f.eval(x, x) + f.eval(x_tilde, x_tilde));
}

Platform first_best_platform(const TypeGrid& grid, std::size_t cutoff) {
  if (cutoff > grid.size()) {
    throw std::invalid_argument(fmt::format("cutoff {} exceeds grid size {}", cutoff, grid.size()));
  }
  const std::size_t m = grid.size() - cutoff;
  std::vector<double> kernel(m * m, 0.0);
  for (std::size_t a = 0; a < m; ++a) kernel[a * m + a] = 1.0;
  return Platform(grid, cutoff, std::move(kernel));
}

DSEState first_best_dse(const TypeGrid& grid, const ProductionFunction& f, const SearchParams& params,
                        std::size_t cutoff) {
  const std::size_t n = grid.size();
  if (cutoff > n) throw std::invalid_argument("cutoff exceeds grid size");
  const double c = first_best_wage_coefficient(params);
  const double u = first_best_unmatched(params);
  DSEState s;
  s.w.assign(n, 0.0);
  s.u.assign(n, 1.0);
  for (std::size_t i = cutoff; i < n; ++i) {
    s.w[i] = c * f.at(grid, i, i);
    s.u[i] = u;
  }
  s.accept = acceptance_matrix(f, grid, s.w);
  s.balance = BalanceRule::linear;
  const DSEResiduals res = dse_residuals(first_best_platform(grid, cutoff), f, params, s);
  s.bellman_residual = res.bellman;
  s.balance_residual = res.balance;
  return s;
}

std::vector<double> perfect_info_transfers(const DSEState& dse) { return dse.w; }

std::vector<double> misreport_slope(const Platform& platform, const ProductionFunction& f,
                                    const SearchParams& params, const DSEState& dse) {
  require_equilibrium(platform, f, params, dse);
  const TypeGrid& grid = platform.grid();
  const std::size_t n = grid.size();
  const std::size_t k = platform.cutoff();
  const KernelCsr& csr = platform.sparse();
  const std::vector<double> dw = block_derivative(grid, k, dse.w);

  std::vector<double> slope(n, 0.0);
  for (std::size_t i = k; i < n; ++i) {
    const std::size_t a = i - k;
    double s = 0.0;
    for (std::size_t e = csr.row_ptr[a]; e < csr.row_ptr[a + 1]; ++e) {
      const std::size_t j = k + csr.col[e];
      if (!dse.accepts(i, j)) continue;
      s += (f.dx_at(grid, i, j) - dw[i]) * csr.val[e] * dse.u[j];
    }
    slope[i] = params.theta() * s;
  }
  return slope;
}

std::vector<double> envelope_transfers(const Platform& platform, const ProductionFunction& f,
                                       const SearchParams& params, const DSEState& dse) {
  const std::vector<double> slope = misreport_slope(platform, f, params, dse);
  const std::size_t n = platform.size();
  const std::size_t k = platform.cutoff();
  const double h = platform.grid().spacing();
  std::vector<double> t(n, 0.0);
  double integral = 0.0;
  for (std::size_t i = k; i < n; ++i) {
    if (i > k) integral += 0.5 * h * (slope[i - 1] + slope[i]);
    t[i] = dse.w[i] - integral;
  }
  return t;
}

std::vector<double> private_info_transfers(const TypeGrid& grid, const ProductionFunction& f,
                                           const SearchParams& params, std::size_t cutoff) {
  const std::size_t n = grid.size();
  if (cutoff > n) throw std::invalid_argument("cutoff exceeds grid size");
  std::vector<double> t(n, 0.0);
  if (cutoff == n) return t;
  const double coef = private_info_coefficient(params);
  const double wc = first_best_wage_coefficient(params);
  const double f_low = f.at(grid, cutoff, cutoff);
  for (std::size_t i = cutoff; i < n; ++i) {
    const double fii = f.at(grid, i, i);
    t[i] = coef * (fii + f_low);
    const double half_sum = 0.5 * (wc * fii + wc * f_low);
    if (std::abs(t[i] - half_sum) > 1e-12 * std::max(1.0, std::abs(t[i]))) {
      throw std::logic_error(fmt::format("screening transfer identity fails at node {}: {} vs {}", i, t[i], half_sum));
    }
  }
  return t;
}

RentResult informational_rent(const Platform& platform, const ProductionFunction& f,
                              const SearchParams& params, const DSEState& dse) {
  const std::vector<double> slope = misreport_slope(platform, f, params, dse);
  const TypeGrid& grid = platform.grid();
  RentResult out;
  out.m.assign(grid.size(), 0.0);
  for (std::size_t i = platform.cutoff(); i < grid.size(); ++i) {
    out.m[i] = (1.0 - grid.node(i)) * slope[i];
    out.total += out.m[i] * grid.mass();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Involutions

Involution::Involution(std::vector<std::size_t> perm) : perm_(std::move(perm)) {
  const std::size_t m = perm_.size();
  for (std::size_t i = 0; i < m; ++i) {
    if (perm_[i] >= m || perm_[perm_[i]] != i) {
      throw std::invalid_argument(fmt::format("permutation is not an involution at index {}", i));
    }
  }
  bool inc = true, dec = true;
  for (std::size_t i = 0; i + 1 < m; ++i) {
    inc = inc && perm_[i] < perm_[i + 1];
    dec = dec && perm_[i] > perm_[i + 1];
  }
  // A one-element involution is both; call it increasing.
  monotone_ = inc ? Monotone::increasing : dec ? Monotone::decreasing : Monotone::none;
}

Involution Involution::identity(std::size_t m) {
  std::vector<std::size_t> p(m);
  std::iota(p.begin(), p.end(), std::size_t{0});
  return Involution(std::move(p));
}

Involution Involution::reversal(std::size_t m) {
  std::vector<std::size_t> p(m);
  for (std::size_t i = 0; i < m; ++i) p[i] = m - 1 - i;
  return Involution(std::move(p));
}

namespace {

void extend_involutions(std::vector<std::size_t>& perm, std::vector<Involution>& out) {
  const auto first_free = std::find(perm.begin(), perm.end(), perm.size());
  if (first_free == perm.end()) {
    out.emplace_back(perm);
    return;
  }
  const auto i = static_cast<std::size_t>(first_free - perm.begin());
  perm[i] = i;
  extend_involutions(perm, out);
  for (std::size_t j = i + 1; j < perm.size(); ++j) {
    if (perm[j] != perm.size()) continue;
    perm[i] = j;
    perm[j] = i;
    extend_involutions(perm, out);
    perm[j] = perm.size();
  }
  perm[i] = perm.size();
}

}  // namespace

std::vector<Involution> enumerate_involutions(std::size_t m) {
  std::vector<Involution> out;
  std::vector<std::size_t> perm(m, m);  // m marks "unassigned"
  extend_involutions(perm, out);
  return out;
}

Platform involution_platform(const TypeGrid& grid, std::size_t cutoff, const Involution& nu) {
  if (cutoff > grid.size() || nu.size() != grid.size() - cutoff) {
    throw std::invalid_argument("involution does not match the included block");
  }
  const std::size_t m = nu.size();
  std::vector<double> kernel(m * m, 0.0);
  for (std::size_t a = 0; a < m; ++a) kernel[a * m + nu[a]] = 1.0;
  return Platform(grid, cutoff, std::move(kernel));
}

std::vector<double> involution_wages(const TypeGrid& grid, const ProductionFunction& f,
                                     const SearchParams& params, std::size_t cutoff, const Involution& nu) {
  if (cutoff > grid.size() || nu.size() != grid.size() - cutoff) {
    throw std::invalid_argument("involution does not match the included block");
  }
  const double theta = params.theta(), alpha = params.alpha(), rho = params.rho();
  const double coef = theta * alpha / (alpha + rho + 2.0 * theta * alpha);
  std::vector<double> w(grid.size(), 0.0);
  for (std::size_t a = 0; a < nu.size(); ++a) w[cutoff + a] = coef * f.at(grid, cutoff + a, cutoff + nu[a]);
  return w;
}

double involution_rent(const TypeGrid& grid, const ProductionFunction& f, const SearchParams& params,
                       std::size_t cutoff, const Involution& nu) {
  const std::vector<double> w = involution_wages(grid, f, params, cutoff, nu);
  const std::size_t n = grid.size();
  const double h = grid.spacing();
  const double scale = params.theta() * first_best_unmatched(params);
  double direct = 0.0;
  for (std::size_t a = 0; a < nu.size(); ++a) {
    const std::size_t i = cutoff + a;
    direct += h * (1.0 - grid.node(i)) * f.dx_at(grid, i, cutoff + nu[a]);
  }
  double by_parts = 0.0;
  for (std::size_t i = cutoff; i + 1 < n; ++i) {
    const double edge = 0.5 * (grid.node(i) + grid.node(i + 1));
    by_parts += (1.0 - edge) * (w[i + 1] - w[i]);
  }
  return scale * (direct - by_parts);
}

// ---------------------------------------------------------------------------
// Exclusion

ExclusionResult optimal_exclusion(const TypeGrid& grid, const ProductionFunction& f, kernels::Exec exec) {
  const std::size_t n = grid.size();
  std::vector<double> diag(n);
  ExclusionResult out;
  out.phi.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = grid.node(i);
    diag[i] = f.at(grid, i, i);
    out.phi[i] = diag[i] - (1.0 - x) * f.dx_at(grid, i, i);
  }
  out.profit.resize(n);
  if (exec == kernels::Exec::parallel) {
    kernels::parallel::exclusion_profit(diag, out.profit);
  } else {
    kernels::serial::exclusion_profit(diag, out.profit);
  }
  out.cutoff = 0;
  for (std::size_t k = 1; k < n; ++k) {
    if (out.profit[k] > out.profit[out.cutoff]) out.cutoff = k;
  }
  out.x_tilde = grid.node(out.cutoff);

  const double phi0 = f.eval(0.0, 0.0) - f.d_dx(0.0, 0.0);
  out.phi_positive = phi0 > 0.0 && std::all_of(out.phi.begin(), out.phi.end(), [](double p) { return p > 0.0; });
  out.interior_forced = f.d_dx(0.0, 0.0) > f.eval(0.0, 0.0);
  out.phi_increasing = true;
  for (std::size_t i = 0; i + 1 < n; ++i) out.phi_increasing = out.phi_increasing && out.phi[i + 1] > out.phi[i];
  return out;
}

// ---------------------------------------------------------------------------
// Glitch

Platform glitch_kernel_mix(const Platform& platform, double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument(fmt::format("mixing weight {} outside [0, 1]", eps));
  if (!platform.is_consistent()) throw std::invalid_argument("glitch requires a consistent platform");
  const std::size_t n = platform.size();
  const double uniform = eps / static_cast<double>(n);
  std::vector<double> kernel(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double g = platform.is_included(i) ? platform.kernel(i, j) : (i == j ? 1.0 : 0.0);
      kernel[i * n + j] = (1.0 - eps) * g + uniform;
    }
  }
  return Platform(platform.grid(), 0, std::move(kernel), platform.transfers());
}

Platform glitch(const Platform& platform, const GlitchSpec& eps) { return glitch_kernel_mix(platform, eps.epsilon()); }

// ---------------------------------------------------------------------------

double platform_profit(const Platform& platform) {
  double s = 0.0;
  for (std::size_t i = platform.cutoff(); i < platform.size(); ++i) s += platform.transfers()[i];
  return s * platform.grid().mass();
}

DesignResult design_platform(const TypeGrid& grid, const ProductionFunction& f, const SearchParams& params,
                             std::size_t cutoff, const SolverConfig& cfg) {
  Platform base = first_best_platform(grid, cutoff);
  Platform designed = base.with_transfers(private_info_transfers(grid, f, params, cutoff));
  SolverConfig sc = cfg;
  if (!sc.warm_start) sc.w_init = WageInit::first_best_guess;
  DSEState dse = solve_dse(designed, f, params, sc);
  RentResult rent = informational_rent(designed, f, params, dse);
  DesignResult out{designed, std::move(dse), 0.0, rent.total, designed.exclusion_level(), std::move(rent.m)};
  out.profit = platform_profit(out.platform);
  return out;
}

}  // namespace matchlab
