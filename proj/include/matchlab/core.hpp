#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace matchlab {

/// Raised when an iterative solve exhausts its iteration budget.
class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, double bellman, double balance,
                      std::size_t iterations)
      : std::runtime_error(what),
        bellman_(bellman),
        balance_(balance),
        iterations_(iterations) {}

  double bellman_residual() const noexcept { return bellman_; }
  double balance_residual() const noexcept { return balance_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  double bellman_;
  double balance_;
  std::size_t iterations_;
};

/// Raised when the steady-state balance has no solution with densities in [0, 1].
class InfeasibleDensityError : public std::runtime_error {
 public:
  InfeasibleDensityError(const std::string& what, std::size_t node, double u)
      : std::runtime_error(what), node_(node), u_(u) {}

  std::size_t node() const noexcept { return node_; }
  double density() const noexcept { return u_; }

 private:
  std::size_t node_;
  double u_;
};

/// Raised when an operation needs at least one included type.
class EmptyMarketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Meeting rate rho, divorce rate alpha and discount rate r.
/// theta = rho / (2 (r + alpha)) is always derived, never set.
class SearchParams {
 public:
  SearchParams(double rho, double alpha, double r);

  double rho() const noexcept { return rho_; }
  double alpha() const noexcept { return alpha_; }
  double r() const noexcept { return r_; }
  double theta() const noexcept { return theta_; }

 private:
  double rho_;
  double alpha_;
  double r_;
  double theta_;
};

/// Midpoint discretization of [0,1]: x_i = (i + 0.5) / n, each node carrying mass 1/n.
class TypeGrid {
 public:
  explicit TypeGrid(std::size_t n);

  std::size_t size() const noexcept { return nodes_.size(); }
  double node(std::size_t i) const { return nodes_[i]; }
  std::span<const double> nodes() const noexcept { return nodes_; }
  double mass() const noexcept { return 1.0 / static_cast<double>(nodes_.size()); }
  double spacing() const noexcept { return mass(); }

  /// First node index with x_i >= x_tilde (size() if none).
  std::size_t cutoff_for(double x_tilde) const;

  friend bool operator==(const TypeGrid& a, const TypeGrid& b) { return a.nodes_.size() == b.nodes_.size(); }

 private:
  std::vector<double> nodes_;
};

TypeGrid make_grid(std::size_t n);

enum class ProductionKind { multiplicative, multiplicative_plus_constant, tabulated };

/// Symmetric flow output f(x, y).
///
/// Built-ins are f = xy and f = xy + c with analytic derivatives. Tabulated
/// functions hold an n x n table on the midpoint grid; off-grid values are
/// bilinear (linearly extrapolated past the outer nodes) and d/dx is a central
/// difference with step 1/(4n) unless a derivative table is supplied.
class ProductionFunction {
 public:
  static ProductionFunction multiplicative();
  static ProductionFunction multiplicative_plus_constant(double c);
  /// Throws std::invalid_argument unless the table is symmetric within 1e-12.
  static ProductionFunction tabulated(const TypeGrid& grid, std::vector<double> values,
                                      std::optional<std::vector<double>> d_dx = std::nullopt);

  ProductionKind kind() const noexcept { return kind_; }
  double constant() const noexcept { return c_; }
  /// "xy", "xy+c" or "table".
  std::string kind_name() const;

  double eval(double x, double y) const;
  double d_dx(double x, double y) const;

  /// Value at grid nodes (i, j); exact table entries for a tabulated function on its own grid.
  double at(const TypeGrid& grid, std::size_t i, std::size_t j) const;
  double dx_at(const TypeGrid& grid, std::size_t i, std::size_t j) const;

  /// Row-major table for tabulated functions (empty otherwise).
  const std::vector<double>& table() const noexcept { return table_; }
  std::size_t table_size() const noexcept { return table_n_; }

  // Grid diagnostics. Built-ins pass all three on every grid.
  double symmetry_defect(const TypeGrid& grid) const;
  bool is_monotone_on(const TypeGrid& grid) const;
  /// Checks f(x,y)+f(x',y') > f(x,y')+f(x',y) for x>x', y>y' over nodes taken every `stride`.
  bool is_strictly_supermodular_on(const TypeGrid& grid, std::size_t stride = 1) const;
  /// f strictly increasing in its first argument at every pair of grid nodes.
  bool is_strictly_increasing_on(const TypeGrid& grid) const;

 private:
  ProductionFunction() = default;
  double table_bilinear(const std::vector<double>& tab, double x, double y) const;

  ProductionKind kind_ = ProductionKind::multiplicative;
  double c_ = 0.0;
  std::size_t table_n_ = 0;
  std::vector<double> table_;
  std::vector<double> dx_table_;
};

/// Compressed rows of a kernel block; column indices are block-local.
struct KernelCsr {
  std::vector<std::size_t> row_ptr;
  std::vector<std::size_t> col;
  std::vector<double> val;

  std::size_t rows() const noexcept { return row_ptr.empty() ? 0 : row_ptr.size() - 1; }
};

/// Inclusion cutoff, meeting kernel over included nodes and flow transfers.
///
/// Nodes 0..cutoff-1 are excluded; the kernel is an m x m row-stochastic
/// matrix (m = n - cutoff) in block-local indices. Transfers have length n and
/// vanish on excluded nodes.
class Platform {
 public:
  static constexpr double kRowSumTolerance = 1e-12;
  static constexpr double kConsistencyTolerance = 1e-10;

  Platform(TypeGrid grid, std::size_t cutoff, std::vector<double> kernel,
           std::vector<double> transfers = {});

  const TypeGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return grid_.size(); }
  std::size_t cutoff() const noexcept { return cutoff_; }
  std::size_t included_count() const noexcept { return grid_.size() - cutoff_; }
  bool is_included(std::size_t i) const noexcept { return i >= cutoff_ && i < grid_.size(); }
  /// Type value at the cutoff node (1 when nothing is included).
  double exclusion_level() const;

  /// Kernel entry for global node indices; zero when either node is excluded.
  double kernel(std::size_t i, std::size_t j) const;
  const std::vector<double>& kernel_block() const noexcept { return kernel_; }
  const KernelCsr& sparse() const noexcept { return csr_; }
  const std::vector<double>& transfers() const noexcept { return transfers_; }

  Platform with_transfers(std::vector<double> transfers) const;

  double consistency_defect() const noexcept { return defect_; }
  bool is_consistent() const noexcept { return defect_ <= kConsistencyTolerance; }

 private:
  TypeGrid grid_;
  std::size_t cutoff_;
  std::vector<double> kernel_;
  std::vector<double> transfers_;
  KernelCsr csr_;
  double defect_ = 0.0;
};

/// Steady-state balance used by the solver.
///
/// `linear`: alpha (1 - u_i) = rho sum_j M_ij G_ij u_j, the steady-state
/// condition of the equilibrium definition (first-best u = alpha/(alpha+rho)).
/// `quadratic`: alpha (1 - u_i) = rho u_i sum_j M_ij G_ij u_j, the flow balance
/// of bilateral quadratic search, which is what the simulator realizes.
enum class BalanceRule { linear, quadratic };

/// Reservation wages, unmatched densities and the acceptance matrix.
struct DSEState {
  std::vector<double> w;
  std::vector<double> u;
  std::vector<std::uint8_t> accept;  ///< n x n, row-major
  double bellman_residual = 0.0;
  double balance_residual = 0.0;
  std::size_t iterations = 0;
  BalanceRule balance = BalanceRule::linear;

  std::size_t size() const noexcept { return w.size(); }
  bool accepts(std::size_t i, std::size_t j) const { return accept[i * w.size() + j] != 0; }
};

/// Mixing weight of an epsilon-glitch, strictly inside (0, 1).
class GlitchSpec {
 public:
  explicit GlitchSpec(double epsilon);
  double epsilon() const noexcept { return epsilon_; }

 private:
  double epsilon_;
};

/// f(x_i, x_j) - w_i - w_j.
double surplus(const ProductionFunction& f, const TypeGrid& grid, std::span<const double> w,
               std::size_t i, std::size_t j);

/// n x n matrix of f(x_i, x_j).
std::vector<double> production_matrix(const ProductionFunction& f, const TypeGrid& grid);

/// M_ij = [f_ij - w_i - w_j >= 0] for all node pairs (accept at equality).
std::vector<std::uint8_t> acceptance_matrix(const ProductionFunction& f, const TypeGrid& grid,
                                            std::span<const double> w);

}  // namespace matchlab
