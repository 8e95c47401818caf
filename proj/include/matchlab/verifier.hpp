#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "matchlab/core.hpp"
#include "matchlab/designer.hpp"
#include "matchlab/kernels.hpp"

namespace matchlab {

struct AuditTolerances {
  double consistency = Platform::kConsistencyTolerance;
  double ir = 1e-12;
  double ic = 1e-8;
  double bellman = 1e-8;
  double balance = 1e-8;
};

struct AuditReport {
  double consistency_defect = 0.0;
  double ir_min_slack = 0.0;
  double ic_max_violation = 0.0;
  /// Max violation per deviation class (true type -> report):
  /// included->included, included->excluded, excluded->included, excluded->excluded.
  /// -inf for an empty class.
  std::array<double, 4> ic_by_class{};
  std::size_t worst_true = 0;    ///< node index of the best-gaining deviator
  std::size_t worst_report = 0;  ///< node index of its report
  double worst_x = 0.0;
  double worst_x_hat = 0.0;
  double bellman_residual = 0.0;
  double balance_residual = 0.0;
  std::size_t acceptance_violations = 0;
  bool upper_set_ok = true;
  /// Max over adjacent kernel rows of W1(row_i, row_{i+1}) / spacing.
  double row_smoothness = 0.0;
  /// Discrete single crossing of the misreport matrix (diagnostic, not certified).
  bool single_crossing_ok = true;

  bool certified(const AuditTolerances& tol = {}) const;
};

/// theta sum_k M_ik (f_ik - w_i - w_k) G_jk u_k for an included report j; 0 for an excluded one.
double misreport_value(const Platform& platform, const ProductionFunction& f, const SearchParams& params,
                       const DSEState& dse, std::size_t i, std::size_t j);

/// n x n matrix of misreport values, row = true type.
std::vector<double> misreport_matrix(const Platform& platform, const ProductionFunction& f,
                                     const SearchParams& params, const DSEState& dse,
                                     kernels::Exec exec = kernels::Exec::parallel);

/// Consistency, IR, IC over all four deviation classes (included/excluded
/// true type x included/excluded report), equilibrium residuals and diagnostics.
AuditReport audit(const Platform& platform, const ProductionFunction& f, const SearchParams& params,
                  const DSEState& dse, kernels::Exec exec = kernels::Exec::parallel);

struct MaskAudit {
  double ic_max_violation = 0.0;
  std::array<double, 4> ic_by_class{};
  std::size_t worst_true = 0;
  std::size_t worst_report = 0;
  double ir_min_slack = 0.0;
  bool upper_set = true;
};

/// IC audit of a deterministic platform on an arbitrary inclusion mask.
/// nu pairs the included nodes (in index order); wages take the involution
/// closed form, transfers come from the envelope condition integrated over
/// the included nodes with IR binding at the lowest one.
MaskAudit audit_deterministic(const TypeGrid& grid, const ProductionFunction& f, const SearchParams& params,
                              const std::vector<bool>& included, const Involution& nu);

struct Prop4Result {
  bool holds = true;           ///< no IC-certified non-upper-set configuration
  bool premise_holds = true;   ///< f strictly increasing in x on the grid
  std::size_t configurations = 0;
  std::size_t certified = 0;
  std::size_t certified_non_upper = 0;
};

/// Exhaustive small-grid check that IC forces an upper inclusion set.
/// Returns holds = true vacuously when f is not strictly increasing in x.
Prop4Result prop4_oracle(std::size_t n_small, const ProductionFunction& f, const SearchParams& params,
                         double ic_tolerance = 1e-8);

}  // namespace matchlab
