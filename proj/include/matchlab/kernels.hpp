#pragma once

// Data-parallel kernels behind the solver, designer and verifier.
//
// Every kernel exists twice: `serial` is the reference loop, `parallel` runs
// the same per-row body under OpenMP. Rows are independent and each row is
// reduced in a fixed order, so both variants produce bit-identical output for
// any thread count.

#include <cstddef>
#include <cstdint>
#include <span>

#include "matchlab/core.hpp"

namespace matchlab::kernels {

enum class Exec { serial, parallel };

/// Inputs shared by the per-row sweeps over the included block.
/// f_entry[e] = f(x_i, x_col(e)) for every stored kernel entry e;
/// w and u are block-local (length m).
struct BlockSweep {
  const KernelCsr& csr;
  std::span<const double> f_entry;
};

#define MATCHLAB_KERNEL_DECLS                                                                        \
  /* acc[e] = [f_e - w_i - w_col >= 0] on stored kernel entries. */                                 \
  void support_acceptance(const BlockSweep& b, std::span<const double> w, std::span<std::uint8_t> acc); \
  /* mass_i = sum acc G u;  gain_i = sum acc (f - w_j) G u. */                                       \
  void row_sums(const BlockSweep& b, std::span<const std::uint8_t> acc, std::span<const double> w,  \
                std::span<const double> u, std::span<double> mass, std::span<double> gain);         \
  /* rhs_i = theta sum acc (f - w_i - w_j) G u. */                                                   \
  void bellman_rhs(const BlockSweep& b, std::span<const std::uint8_t> acc, std::span<const double> w, \
                   std::span<const double> u, double theta, std::span<double> rhs);                 \
  /* Jacobi step for alpha u_i + rho sum_j K_ij u_j = alpha; resid_i evaluated at u_in. */          \
  void linear_balance_sweep(const KernelCsr& csr, std::span<const std::uint8_t> acc,               \
                            std::span<const double> u_in, double alpha, double rho,                 \
                            std::span<double> u_out, std::span<double> resid);                      \
  /* u_out_i = alpha / (alpha + rho sum_j K_ij u_j); resid_i evaluated at u_in. */                  \
  void quadratic_balance_sweep(const KernelCsr& csr, std::span<const std::uint8_t> acc,            \
                               std::span<const double> u_in, double alpha, double rho,              \
                               std::span<double> u_out, std::span<double> resid);                   \
  /* Full n x n acceptance matrix from an n x n production matrix. */                               \
  void acceptance_full(std::span<const double> F, std::span<const double> w,                        \
                       std::span<std::uint8_t> out);                                                \
  /* out[i*n+j] = misreport value of true type i reporting j (0 for excluded reports). */          \
  void misreport_matrix(std::span<const double> F, std::span<const std::uint8_t> accept,            \
                        std::span<const double> w, std::span<const double> u, const KernelCsr& csr, \
                        std::size_t cutoff, double theta, std::span<double> out);                   \
  /* out[k] = (sum_{i>=k} diag_i + (n-k) diag_k) / n. */                                             \
  void exclusion_profit(std::span<const double> diag, std::span<double> out);

namespace serial {
MATCHLAB_KERNEL_DECLS
}  // namespace serial

namespace parallel {
MATCHLAB_KERNEL_DECLS
}  // namespace parallel

#undef MATCHLAB_KERNEL_DECLS

/// Maximum of a residual vector, reduced left to right.
double max_abs(std::span<const double> v);

}  // namespace matchlab::kernels
