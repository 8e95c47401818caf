#include "matchlab/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <stdexcept>

#include "matchlab/solver.hpp"

namespace matchlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct IcScan {
  double max_violation = kNegInf;
  std::array<double, 4> by_class{kNegInf, kNegInf, kNegInf, kNegInf};
  std::size_t i = 0;
  std::size_t j = 0;
};

// dev(i, j) = wt(i, j) - t_j versus truthful w_i - t_i; the diagonal is skipped.
// Excluded reports have wt = 0 and t = 0, excluded true types have w = 0.
IcScan scan_ic(std::span<const double> wt, std::span<const double> w, std::span<const double> t,
               const std::vector<bool>& included) {
  const std::size_t n = w.size();
  IcScan s;
  for (std::size_t i = 0; i < n; ++i) {
    const double truthful = w[i] - t[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dev = included[j] ? wt[i * n + j] - t[j] : 0.0;
      const double v = dev - truthful;
      double& cls = s.by_class[(included[i] ? 0 : 2) + (included[j] ? 0 : 1)];
      cls = std::max(cls, v);
      if (v > s.max_violation) {
        s.max_violation = v;
        s.i = i;
        s.j = j;
      }
    }
  }
  if (n < 2) s.max_violation = 0.0;
  return s;
}

void check_shapes(const Platform& platform, const DSEState& dse) {
  const std::size_t n = platform.size();
  if (dse.w.size() != n || dse.u.size() != n || dse.accept.size() != n * n) {
    throw std::invalid_argument("equilibrium state does not match the platform grid");
  }
}

double row_smoothness(const Platform& platform) {
  const std::size_t m = platform.included_count();
  const std::vector<double>& g = platform.kernel_block();
  double worst = 0.0;
  for (std::size_t a = 0; a + 1 < m; ++a) {
    double ca = 0.0, cb = 0.0, dist = 0.0;
    for (std::size_t b = 0; b < m; ++b) {
      ca += g[a * m + b];
      cb += g[(a + 1) * m + b];
      dist += std::abs(ca - cb);
    }
    worst = std::max(worst, dist);
  }
  return worst;
}

bool single_crossing(std::span<const double> wt, std::size_t n, std::size_t k) {
  constexpr double tol = 1e-12;
  for (std::size_t j = k; j + 1 < n; ++j) {
    for (std::size_t i = k; i + 1 < n; ++i) {
      const double lo = wt[i * n + j + 1] - wt[i * n + j];
      const double hi = wt[(i + 1) * n + j + 1] - wt[(i + 1) * n + j];
      if (hi < lo - tol) return false;
    }
  }
  return true;
}

}  // namespace

bool AuditReport::certified(const AuditTolerances& tol) const {
  return consistency_defect <= tol.consistency && ir_min_slack >= -tol.ir && ic_max_violation <= tol.ic &&
         bellman_residual <= tol.bellman && balance_residual <= tol.balance && acceptance_violations == 0 &&
         upper_set_ok;
}

double misreport_value(const Platform& platform, const ProductionFunction& f, const SearchParams& params,
                       const DSEState& dse, std::size_t i, std::size_t j) {
  check_shapes(platform, dse);
  const std::size_t n = platform.size();
  if (i >= n || j >= n) throw std::out_of_range(fmt::format("node pair ({}, {}) outside grid of {}", i, j, n));
  if (!platform.is_included(j)) return 0.0;
  const TypeGrid& grid = platform.grid();
  const KernelCsr& csr = platform.sparse();
  const std::size_t k0 = platform.cutoff();
  const std::size_t row = j - k0;
  double s = 0.0;
  for (std::size_t e = csr.row_ptr[row]; e < csr.row_ptr[row + 1]; ++e) {
    const std::size_t k = csr.col[e] + k0;
    if (!dse.accepts(i, k)) continue;
    s += ((f.at(grid, i, k) - dse.w[i]) - dse.w[k]) * csr.val[e] * dse.u[k];
  }
  return params.theta() * s;
}

std::vector<double> misreport_matrix(const Platform& platform, const ProductionFunction& f,
                                     const SearchParams& params, const DSEState& dse, kernels::Exec exec) {
  check_shapes(platform, dse);
  const std::size_t n = platform.size();
  const std::vector<double> F = production_matrix(f, platform.grid());
  std::vector<double> out(n * n);
  if (exec == kernels::Exec::parallel) {
    kernels::parallel::misreport_matrix(F, dse.accept, dse.w, dse.u, platform.sparse(), platform.cutoff(),
                                        params.theta(), out);
  } else {
    kernels::serial::misreport_matrix(F, dse.accept, dse.w, dse.u, platform.sparse(), platform.cutoff(),
                                      params.theta(), out);
  }
  return out;
}

AuditReport audit(const Platform& platform, const ProductionFunction& f, const SearchParams& params,
                  const DSEState& dse, kernels::Exec exec) {
  check_shapes(platform, dse);
  const std::size_t n = platform.size();
  const std::size_t k = platform.cutoff();
  const std::vector<double>& t = platform.transfers();

  AuditReport rep;
  rep.consistency_defect = platform.consistency_defect();
  const DSEResiduals res = dse_residuals(platform, f, params, dse);
  rep.bellman_residual = res.bellman;
  rep.balance_residual = res.balance;
  rep.acceptance_violations = res.acceptance_violations;

  rep.ir_min_slack = k < n ? std::numeric_limits<double>::infinity() : 0.0;
  for (std::size_t i = k; i < n; ++i) rep.ir_min_slack = std::min(rep.ir_min_slack, dse.w[i] - t[i]);

  const std::vector<double> wt = misreport_matrix(platform, f, params, dse, exec);
  std::vector<bool> included(n);
  for (std::size_t i = 0; i < n; ++i) included[i] = platform.is_included(i);
  const IcScan ic = scan_ic(wt, dse.w, t, included);
  rep.ic_max_violation = ic.max_violation;
  rep.ic_by_class = ic.by_class;
  rep.worst_true = ic.i;
  rep.worst_report = ic.j;
  rep.worst_x = platform.grid().node(ic.i);
  rep.worst_x_hat = platform.grid().node(ic.j);

  // The cutoff representation makes the included set an upper set; what can
  // still break it is a transfer charged to an excluded node or a wage there.
  rep.upper_set_ok = true;
  for (std::size_t i = 0; i < k; ++i) rep.upper_set_ok = rep.upper_set_ok && t[i] == 0.0 && dse.w[i] == 0.0;

  rep.row_smoothness = row_smoothness(platform);
  rep.single_crossing_ok = single_crossing(wt, n, k);
  return rep;
}

MaskAudit audit_deterministic(const TypeGrid& grid, const ProductionFunction& f, const SearchParams& params,
                              const std::vector<bool>& included, const Involution& nu) {
  const std::size_t n = grid.size();
  if (included.size() != n) throw std::invalid_argument("inclusion mask does not match the grid");
  std::vector<std::size_t> nodes;
  for (std::size_t i = 0; i < n; ++i) {
    if (included[i]) nodes.push_back(i);
  }
  if (nodes.size() != nu.size()) throw std::invalid_argument("involution does not match the included nodes");
  const std::size_t m = nodes.size();

  const double theta = params.theta(), alpha = params.alpha(), rho = params.rho();
  const double coef = theta * alpha / (alpha + rho + 2.0 * theta * alpha);
  const double u_in = first_best_unmatched(params);
  std::vector<double> w(n, 0.0), u(n, 1.0);
  for (std::size_t a = 0; a < m; ++a) {
    w[nodes[a]] = coef * f.at(grid, nodes[a], nodes[nu[a]]);
    u[nodes[a]] = u_in;
  }
  const std::vector<std::uint8_t> accept = acceptance_matrix(f, grid, w);

  // Envelope transfers along the included nodes in index order.
  std::vector<double> slope(m, 0.0);
  for (std::size_t a = 0; a < m; ++a) {
    double dw = 0.0;
    if (m >= 2) {
      const std::size_t lo = a == 0 ? 0 : a - 1;
      const std::size_t hi = a + 1 == m ? a : a + 1;
      dw = (w[nodes[hi]] - w[nodes[lo]]) / (grid.node(nodes[hi]) - grid.node(nodes[lo]));
    }
    const std::size_t i = nodes[a], j = nodes[nu[a]];
    if (accept[i * n + j]) slope[a] = theta * (f.dx_at(grid, i, j) - dw) * u[j];
  }
  std::vector<double> t(n, 0.0);
  double integral = 0.0;
  for (std::size_t a = 0; a < m; ++a) {
    if (a > 0) integral += 0.5 * (grid.node(nodes[a]) - grid.node(nodes[a - 1])) * (slope[a - 1] + slope[a]);
    t[nodes[a]] = w[nodes[a]] - integral;
  }

  // Kernel rows in global indices; excluded reports have empty rows.
  KernelCsr csr;
  csr.row_ptr.assign(n + 1, 0);
  std::vector<std::size_t> partner(n, n);
  for (std::size_t a = 0; a < m; ++a) partner[nodes[a]] = nodes[nu[a]];
  for (std::size_t i = 0; i < n; ++i) {
    if (partner[i] < n) {
      csr.col.push_back(partner[i]);
      csr.val.push_back(1.0);
    }
    csr.row_ptr[i + 1] = csr.col.size();
  }
  const std::vector<double> F = production_matrix(f, grid);
  std::vector<double> wt(n * n);
  kernels::serial::misreport_matrix(F, accept, w, u, csr, 0, theta, wt);

  const IcScan ic = scan_ic(wt, w, t, included);
  MaskAudit out;
  out.ic_max_violation = ic.max_violation;
  out.ic_by_class = ic.by_class;
  out.worst_true = ic.i;
  out.worst_report = ic.j;
  out.ir_min_slack = m > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  for (std::size_t i : nodes) out.ir_min_slack = std::min(out.ir_min_slack, w[i] - t[i]);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (included[i] && !included[i + 1]) out.upper_set = false;
  }
  return out;
}

Prop4Result prop4_oracle(std::size_t n_small, const ProductionFunction& f, const SearchParams& params,
                         double ic_tolerance) {
  if (n_small < 2 || n_small > 6) {
    throw std::invalid_argument(fmt::format("oracle grid size must lie in [2, 6], got {}", n_small));
  }
  const TypeGrid grid(n_small);
  Prop4Result out;
  out.premise_holds = f.is_strictly_increasing_on(grid);
  if (!out.premise_holds) return out;

  for (unsigned mask = 1; mask < (1u << n_small); ++mask) {
    std::vector<bool> included(n_small);
    std::size_t m = 0;
    for (std::size_t i = 0; i < n_small; ++i) {
      included[i] = (mask >> i) & 1u;
      m += included[i] ? 1 : 0;
    }
    for (const Involution& nu : enumerate_involutions(m)) {
      const MaskAudit a = audit_deterministic(grid, f, params, included, nu);
      ++out.configurations;
      if (a.ic_max_violation <= ic_tolerance) {
        ++out.certified;
        if (!a.upper_set) ++out.certified_non_upper;
      }
    }
  }
  out.holds = out.certified_non_upper == 0;
  return out;
}

}  // namespace matchlab
