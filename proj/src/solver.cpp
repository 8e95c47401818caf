#include "matchlab/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace matchlab {

namespace {

// Dispatch helper: same signature in both kernel namespaces.
#define MATCHLAB_DISPATCH(exec, fn, ...) \
  ((exec) == kernels::Exec::parallel ? kernels::parallel::fn(__VA_ARGS__) : kernels::serial::fn(__VA_ARGS__))

double first_best_coefficient(const SearchParams& p) {
  const double rho = p.rho(), alpha = p.alpha(), r = p.r();
  return rho * alpha / (2.0 * ((r + alpha) * (alpha + rho) + rho * alpha));
}

struct BalanceSolver {
  const KernelCsr& csr;
  const SearchParams& params;
  const SolverConfig& cfg;

  // Returns the max-norm balance residual at the returned u.
  double solve(std::span<const std::uint8_t> acc, std::vector<double>& u) const {
    return cfg.balance == BalanceRule::linear ? solve_linear(acc, u) : solve_quadratic(acc, u);
  }

  void notify(const std::vector<double>& u) const {
    if (cfg.on_inner_iterate) cfg.on_inner_iterate(u);
  }

  double solve_linear(std::span<const std::uint8_t> acc, std::vector<double>& u) const {
    const double alpha = params.alpha(), rho = params.rho();
    const std::size_t m = csr.rows();
    const double target = cfg.tol_u * alpha;
    std::vector<double> next(m), resid(m);
    u.assign(m, alpha / (alpha + rho));
    notify(u);

    // Jacobi sweeps; bail out to a direct solve once the observed contraction
    // cannot reach the target within the remaining budget.
    double first = -1.0, last = -1.0;
    for (std::size_t it = 0; it < cfg.max_inner; ++it) {
      MATCHLAB_DISPATCH(cfg.exec, linear_balance_sweep, csr, acc, u, alpha, rho, next, resid);
      const double r = kernels::max_abs(resid);
      if (r <= target) return r;
      if (first < 0.0) first = r;
      if (it >= 20) {
        const double rate = std::pow(r / first, 1.0 / static_cast<double>(it));
        const double needed = rate < 1.0 ? std::log(target / r) / std::log(rate) : INFINITY;
        if (!(rate < 0.98) || needed > static_cast<double>(cfg.max_inner - it)) break;
      }
      last = r;
      u.swap(next);
      notify(u);
    }
    (void)last;
    return solve_linear_direct(acc, u);
  }

  double solve_linear_direct(std::span<const std::uint8_t> acc, std::vector<double>& u) const {
    const double alpha = params.alpha(), rho = params.rho();
    const auto m = static_cast<Eigen::Index>(csr.rows());
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m, m) * alpha;
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto row = static_cast<std::size_t>(i);
      for (std::size_t e = csr.row_ptr[row]; e < csr.row_ptr[row + 1]; ++e) {
        if (acc[e]) a(i, static_cast<Eigen::Index>(csr.col[e])) += rho * csr.val[e];
      }
    }
    const Eigen::VectorXd b = Eigen::VectorXd::Constant(m, alpha);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    Eigen::VectorXd x = lu.solve(b);
    x += lu.solve(b - a * x);  // one step of iterative refinement
    u.assign(x.data(), x.data() + m);
    notify(u);

    std::vector<double> next(u.size()), resid(u.size());
    kernels::serial::linear_balance_sweep(csr, acc, u, alpha, rho, next, resid);
    const double r = kernels::max_abs(resid);
    if (!(r <= cfg.tol_u * alpha)) {
      throw NonConvergenceError(
          fmt::format("steady-state balance system is singular or ill-conditioned (residual {:.3e})", r),
          INFINITY, r, 0);
    }
    return r;
  }

  double solve_quadratic(std::span<const std::uint8_t> acc, std::vector<double>& u) const {
    const double alpha = params.alpha(), rho = params.rho();
    const std::size_t m = csr.rows();
    const double target = cfg.tol_u * alpha;
    std::vector<double> next(m), resid(m);
    u.assign(m, alpha / (alpha + rho));
    notify(u);
    double r = INFINITY;
    // Plain iteration first; a half-step average afterwards if it stalls
    // (the map is decreasing, so undamped iterates can alternate).
    for (int pass = 0; pass < 2; ++pass) {
      const double mix = pass == 0 ? 1.0 : 0.5;
      for (std::size_t it = 0; it < cfg.max_inner; ++it) {
        MATCHLAB_DISPATCH(cfg.exec, quadratic_balance_sweep, csr, acc, u, alpha, rho, next, resid);
        r = kernels::max_abs(resid);
        if (r <= target) return r;
        for (std::size_t i = 0; i < m; ++i) u[i] = (1.0 - mix) * u[i] + mix * next[i];
        notify(u);
      }
    }
    throw NonConvergenceError(fmt::format("quadratic balance iteration did not converge (residual {:.3e})", r),
                              INFINITY, r, cfg.max_inner);
  }
};

}  // namespace

void SolverConfig::validate() const {
  if (!(tol_w > 0.0) || !(tol_u > 0.0)) throw std::invalid_argument("solver tolerances must be positive");
  if (!(damping > 0.0 && damping <= 1.0)) {
    throw std::invalid_argument(fmt::format("damping must lie in (0, 1], got {}", damping));
  }
  if (max_outer == 0 || max_inner == 0) throw std::invalid_argument("iteration limits must be positive");
}

DSEState solve_dse(const Platform& platform, const ProductionFunction& f, const SearchParams& params,
                   const SolverConfig& cfg) {
  cfg.validate();
  if (!platform.is_consistent()) {
    throw std::invalid_argument(
        fmt::format("platform is not consistent (kernel asymmetry {:.3e})", platform.consistency_defect()));
  }
  const TypeGrid& grid = platform.grid();
  const std::size_t n = grid.size();
  const std::size_t k = platform.cutoff();
  const std::size_t m = platform.included_count();
  const KernelCsr& csr = platform.sparse();

  if (cfg.warm_start && cfg.warm_start->size() != n) {
    throw std::invalid_argument("warm-start wage vector does not match the grid");
  }

  std::vector<double> f_entry(csr.col.size());
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t e = csr.row_ptr[a]; e < csr.row_ptr[a + 1]; ++e) {
      f_entry[e] = f.at(grid, k + a, k + csr.col[e]);
    }
  }
  const kernels::BlockSweep sweep{csr, f_entry};

  std::vector<double> w(m, 0.0);
  if (cfg.warm_start) {
    std::copy(cfg.warm_start->begin() + static_cast<std::ptrdiff_t>(k), cfg.warm_start->end(), w.begin());
  } else if (cfg.w_init == WageInit::first_best_guess) {
    const double c = first_best_coefficient(params);
    for (std::size_t a = 0; a < m; ++a) w[a] = c * f.at(grid, k + a, k + a);
  }

  const BalanceSolver balance{csr, params, cfg};
  std::vector<double> u(m, 1.0), rhs(m), mass(m), gain(m);
  std::vector<std::uint8_t> acc(csr.col.size()), prev_acc;
  double balance_res = 0.0;
  double bellman_res = INFINITY;
  const double theta = params.theta();
  const double lambda = cfg.damping;

  std::size_t iterations = 0;
  bool converged = m == 0;
  for (; !converged && iterations < cfg.max_outer; ++iterations) {
    MATCHLAB_DISPATCH(cfg.exec, support_acceptance, sweep, w, acc);
    if (iterations == 0 || acc != prev_acc) {
      balance_res = balance.solve(acc, u);
      prev_acc = acc;
    }
    MATCHLAB_DISPATCH(cfg.exec, bellman_rhs, sweep, acc, w, u, theta, rhs);
    bellman_res = 0.0;
    for (std::size_t a = 0; a < m; ++a) bellman_res = std::max(bellman_res, std::abs(w[a] - rhs[a]));
    if (bellman_res <= cfg.tol_w) {
      converged = true;
      break;
    }
    MATCHLAB_DISPATCH(cfg.exec, row_sums, sweep, acc, w, u, mass, gain);
    for (std::size_t a = 0; a < m; ++a) {
      const double target = theta * gain[a] / (1.0 + theta * mass[a]);
      w[a] = (1.0 - lambda) * w[a] + lambda * target;
    }
  }
  if (!converged) {
    throw NonConvergenceError(
        fmt::format("wage iteration did not converge in {} steps (bellman {:.3e}, balance {:.3e})",
                    cfg.max_outer, bellman_res, balance_res),
        bellman_res, balance_res, iterations);
  }

  DSEState state;
  state.balance = cfg.balance;
  state.iterations = iterations;
  state.w.assign(n, 0.0);
  state.u.assign(n, 1.0);
  std::copy(w.begin(), w.end(), state.w.begin() + static_cast<std::ptrdiff_t>(k));
  std::copy(u.begin(), u.end(), state.u.begin() + static_cast<std::ptrdiff_t>(k));
  const std::vector<double> F = production_matrix(f, grid);
  state.accept.resize(n * n);
  MATCHLAB_DISPATCH(cfg.exec, acceptance_full, F, state.w, state.accept);
  const DSEResiduals res = dse_residuals(platform, f, params, state);
  state.bellman_residual = res.bellman;
  state.balance_residual = res.balance;
  for (std::size_t i = k; i < n; ++i) {
    if (state.u[i] < -cfg.tol_u || state.u[i] > 1.0 + cfg.tol_u) {
      throw InfeasibleDensityError(
          fmt::format("balance fixed point has density {:.6g} at node {}, outside [0, 1]; the linear balance "
                      "overcounts meetings on this platform (try balance=quadratic)",
                      state.u[i], i),
          i, state.u[i]);
    }
  }
  return state;
}

std::vector<double> bellman_rhs(const Platform& platform, const ProductionFunction& f,
                                const SearchParams& params, const DSEState& state) {
  const TypeGrid& grid = platform.grid();
  const std::size_t n = grid.size();
  const std::size_t k = platform.cutoff();
  const std::size_t m = platform.included_count();
  const KernelCsr& csr = platform.sparse();
  if (state.w.size() != n || state.u.size() != n || state.accept.size() != n * n) {
    throw std::invalid_argument("equilibrium state does not match the platform grid");
  }
  std::vector<double> f_entry(csr.col.size());
  std::vector<std::uint8_t> acc(csr.col.size());
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t e = csr.row_ptr[a]; e < csr.row_ptr[a + 1]; ++e) {
      f_entry[e] = f.at(grid, k + a, k + csr.col[e]);
      acc[e] = state.accept[(k + a) * n + k + csr.col[e]];
    }
  }
  const std::span<const double> w_block(state.w.data() + k, m);
  const std::span<const double> u_block(state.u.data() + k, m);
  std::vector<double> rhs_block(m);
  kernels::serial::bellman_rhs({csr, f_entry}, acc, w_block, u_block, params.theta(), rhs_block);
  std::vector<double> rhs(n, 0.0);
  std::copy(rhs_block.begin(), rhs_block.end(), rhs.begin() + static_cast<std::ptrdiff_t>(k));
  return rhs;
}

DSEResiduals dse_residuals(const Platform& platform, const ProductionFunction& f, const SearchParams& params,
                           const DSEState& state) {
  const TypeGrid& grid = platform.grid();
  const std::size_t n = grid.size();
  const std::size_t k = platform.cutoff();
  const std::vector<double> rhs = bellman_rhs(platform, f, params, state);

  DSEResiduals out;
  for (std::size_t i = 0; i < n; ++i) {
    if (platform.is_included(i)) {
      out.bellman = std::max(out.bellman, std::abs(state.w[i] - rhs[i]));
      double z = 0.0;
      for (std::size_t j = k; j < n; ++j) {
        if (state.accepts(i, j)) z += platform.kernel(i, j) * state.u[j];
      }
      const double flow_in = params.alpha() * (1.0 - state.u[i]);
      const double flow_out = state.balance == BalanceRule::linear ? params.rho() * z
                                                                    : params.rho() * state.u[i] * z;
      out.balance = std::max(out.balance, std::abs(flow_in - flow_out));
    } else {
      // Excluded types: w = 0 and u = 1.
      out.bellman = std::max(out.bellman, std::abs(state.w[i]));
      out.balance = std::max(out.balance, std::abs(state.u[i] - 1.0));
    }
    for (std::size_t j = 0; j < n; ++j) {
      const bool rule = surplus(f, grid, state.w, i, j) >= 0.0;
      if (rule != state.accepts(i, j)) ++out.acceptance_violations;
    }
  }
  return out;
}

}  // namespace matchlab
