#pragma once

#include <cstddef>
#include <vector>

#include "matchlab/core.hpp"
#include "matchlab/kernels.hpp"
#include "matchlab/solver.hpp"

namespace matchlab {

// Closed-form scalars of the first-best equilibrium.

/// rho alpha / (2 ((r + alpha)(alpha + rho) + rho alpha)): w*(x) = coef * f(x, x).
double first_best_wage_coefficient(const SearchParams& params);
/// alpha / (alpha + rho).
double first_best_unmatched(const SearchParams& params);
/// theta alpha / (2 (alpha + rho + 2 theta alpha)): t(x) = coef * (f(x,x) + f(x~,x~)).
double private_info_coefficient(const SearchParams& params);
/// Screening transfer at type x for exclusion level x_tilde (off-grid allowed).
double private_info_transfer(const ProductionFunction& f, const SearchParams& params, double x, double x_tilde);

/// Identity kernel on nodes cutoff..n-1, zero transfers.
Platform first_best_platform(const TypeGrid& grid, std::size_t cutoff);

/// Closed-form equilibrium of the first-best platform.
DSEState first_best_dse(const TypeGrid& grid, const ProductionFunction& f, const SearchParams& params,
                        std::size_t cutoff);

/// Full extraction t = w.
std::vector<double> perfect_info_transfers(const DSEState& dse);

/// Derivative of the misreport value in the true type, on the diagonal:
///   theta sum_j M_ij (f_x(x_i, x_j) - w'_i) G_ij u_j
/// with w' by centered differences on the included block (one-sided at its
/// edges). Zero on excluded nodes. Throws std::invalid_argument unless dse
/// solves the platform.
std::vector<double> misreport_slope(const Platform& platform, const ProductionFunction& f,
                                    const SearchParams& params, const DSEState& dse);

/// t = w - integral of the misreport slope from the cutoff node (trapezoid),
/// so that w - t vanishes at the cutoff node.
std::vector<double> envelope_transfers(const Platform& platform, const ProductionFunction& f,
                                       const SearchParams& params, const DSEState& dse);

/// Closed-form screening transfers with x~ = node at the cutoff; zero below.
/// Checks t = (w*(x) + w*(x~)) / 2 node by node and throws std::logic_error if
/// the two evaluations disagree beyond rounding.
std::vector<double> private_info_transfers(const TypeGrid& grid, const ProductionFunction& f,
                                           const SearchParams& params, std::size_t cutoff);

struct RentResult {
  std::vector<double> m;  ///< (1 - x_i) times the misreport slope
  double total = 0.0;     ///< mass-weighted sum over included nodes
};

RentResult informational_rent(const Platform& platform, const ProductionFunction& f,
                              const SearchParams& params, const DSEState& dse);

/// Self-inverse permutation of the m included nodes (block-local indices).
class Involution {
 public:
  enum class Monotone { increasing, decreasing, none };

  /// Throws std::invalid_argument unless perm[perm[i]] == i for all i.
  explicit Involution(std::vector<std::size_t> perm);
  static Involution identity(std::size_t m);
  static Involution reversal(std::size_t m);

  const std::vector<std::size_t>& perm() const noexcept { return perm_; }
  std::size_t size() const noexcept { return perm_.size(); }
  std::size_t operator[](std::size_t i) const { return perm_[i]; }
  Monotone monotone() const noexcept { return monotone_; }

 private:
  std::vector<std::size_t> perm_;
  Monotone monotone_;
};

/// All involutions of {0..m-1}, in a fixed order (the identity first).
std::vector<Involution> enumerate_involutions(std::size_t m);

/// Deterministic platform g(x_i) = delta at x_nu(i) on the included block.
Platform involution_platform(const TypeGrid& grid, std::size_t cutoff, const Involution& nu);

/// Wages theta alpha f(x, nu(x)) / (alpha + rho + 2 theta alpha) on included nodes, zero below.
std::vector<double> involution_wages(const TypeGrid& grid, const ProductionFunction& f,
                                     const SearchParams& params, std::size_t cutoff, const Involution& nu);

/// Rent objective of a deterministic search function: the integral of
/// (1 - x)(f_x(x, nu(x)) - w'(x)), scaled by theta alpha / (alpha + rho) so
/// that the identity reproduces informational_rent of the first-best platform.
/// The w' term is summed by parts exactly: first differences at the cell
/// edges between consecutive included nodes, weighted by 1 - edge.
double involution_rent(const TypeGrid& grid, const ProductionFunction& f, const SearchParams& params,
                       std::size_t cutoff, const Involution& nu);

struct ExclusionResult {
  std::size_t cutoff = 0;
  double x_tilde = 0.0;
  std::vector<double> profit;  ///< Pi(k) for k = 0..n-1
  std::vector<double> phi;     ///< f(x,x) - (1-x) f_x(x,x) at each node
  bool phi_positive = false;   ///< phi > 0 at every node and at x = 0
  bool interior_forced = false;  ///< f_x(0,0) > f(0,0)
  bool phi_increasing = false;   ///< phi strictly increasing along the grid
};

/// Exhaustive search of Pi(k) = sum_{i>=k} (f_ii + f_kk) / n; ties go to the smaller cutoff.
ExclusionResult optimal_exclusion(const TypeGrid& grid, const ProductionFunction& f,
                                  kernels::Exec exec = kernels::Exec::parallel);

/// (1 - eps) G_padded + eps / n on all n nodes; rows of excluded nodes are
/// padded with a unit diagonal. Accepts eps in [0, 1]. The result has cutoff 0
/// and keeps the original transfers (zero on previously excluded nodes).
Platform glitch_kernel_mix(const Platform& platform, double eps);
Platform glitch(const Platform& platform, const GlitchSpec& eps);

struct DesignResult {
  Platform platform;
  DSEState dse;
  double profit = 0.0;
  double rent_total = 0.0;
  double exclusion = 0.0;
  std::vector<double> rent;
};

/// Mass-weighted sum of transfers over included nodes.
double platform_profit(const Platform& platform);

/// First-best platform on [x_cutoff, 1] with screening transfers, solved by the DSE solver.
DesignResult design_platform(const TypeGrid& grid, const ProductionFunction& f, const SearchParams& params,
                             std::size_t cutoff, const SolverConfig& cfg = {});

}  // namespace matchlab
