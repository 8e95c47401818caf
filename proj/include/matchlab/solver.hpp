#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "matchlab/core.hpp"
#include "matchlab/kernels.hpp"

namespace matchlab {

enum class WageInit { zeros, first_best_guess };

struct SolverConfig {
  double tol_w = 1e-10;
  double tol_u = 1e-12;
  std::size_t max_outer = 100000;
  std::size_t max_inner = 10000;
  double damping = 0.5;
  WageInit w_init = WageInit::zeros;
  /// Explicit starting wages (length n); overrides w_init when set.
  std::optional<std::vector<double>> warm_start;
  BalanceRule balance = BalanceRule::linear;
  kernels::Exec exec = kernels::Exec::parallel;
  /// Called with every inner balance iterate (block-local u); for diagnostics.
  std::function<void(std::span<const double>)> on_inner_iterate;

  /// Throws std::invalid_argument on out-of-range settings.
  void validate() const;
};

/// Damped fixed-point iteration on the wage operator of a consistent platform.
///
/// Each outer step derives the acceptance rule from w, solves the steady-state
/// balance for u (only when acceptance on the kernel support changed), then
/// applies the closed-form row update
///   w_i <- theta sum_j M_ij (f_ij - w_j) G_ij u_j / (1 + theta sum_j M_ij G_ij u_j)
/// with damping. Stops once the Bellman residual at the current iterate is
/// <= tol_w. Throws NonConvergenceError after max_outer steps,
/// InfeasibleDensityError when the balance fixed point leaves [0, 1] (possible
/// under the linear rule on mixing kernels) and std::invalid_argument for
/// inconsistent platforms.
DSEState solve_dse(const Platform& platform, const ProductionFunction& f, const SearchParams& params,
                   const SolverConfig& cfg = {});

struct DSEResiduals {
  double bellman = 0.0;
  double balance = 0.0;
  std::size_t acceptance_violations = 0;
};

/// Recomputes the equilibrium conditions from scratch.
/// Bellman and balance use the supplied acceptance matrix; violations count
/// node pairs where that matrix disagrees with the sign rule.
DSEResiduals dse_residuals(const Platform& platform, const ProductionFunction& f,
                           const SearchParams& params, const DSEState& state);

/// Bellman right-hand side theta sum_j M_ij (f_ij - w_i - w_j) G_ij u_j at every node
/// (zero on excluded nodes).
std::vector<double> bellman_rhs(const Platform& platform, const ProductionFunction& f,
                                const SearchParams& params, const DSEState& state);

}  // namespace matchlab
