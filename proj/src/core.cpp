#include "matchlab/core.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace matchlab {

SearchParams::SearchParams(double rho, double alpha, double r) : rho_(rho), alpha_(alpha), r_(r) {
  if (!(rho > 0.0) || !(alpha > 0.0) || !(r > 0.0) || !std::isfinite(rho) ||
      !std::isfinite(alpha) || !std::isfinite(r)) {
    throw std::invalid_argument(
        fmt::format("search parameters must be positive and finite (rho={}, alpha={}, r={})", rho,
                    alpha, r));
  }
  theta_ = rho_ / (2.0 * (r_ + alpha_));
}

TypeGrid::TypeGrid(std::size_t n) {
  if (n < 2) {
    throw std::invalid_argument(fmt::format("type grid needs at least 2 nodes, got {}", n));
  }
  nodes_.resize(n);
  const double dn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) nodes_[i] = (static_cast<double>(i) + 0.5) / dn;
}

std::size_t TypeGrid::cutoff_for(double x_tilde) const {
  const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), x_tilde);
  return static_cast<std::size_t>(it - nodes_.begin());
}

TypeGrid make_grid(std::size_t n) { return TypeGrid(n); }

// ---------------------------------------------------------------------------
// ProductionFunction

ProductionFunction ProductionFunction::multiplicative() {
  ProductionFunction f;
  f.kind_ = ProductionKind::multiplicative;
  return f;
}

ProductionFunction ProductionFunction::multiplicative_plus_constant(double c) {
  if (!(c >= 0.0) || !std::isfinite(c)) {
    throw std::invalid_argument(fmt::format("production constant must be >= 0, got {}", c));
  }
  ProductionFunction f;
  f.kind_ = ProductionKind::multiplicative_plus_constant;
  f.c_ = c;
  return f;
}

ProductionFunction ProductionFunction::tabulated(const TypeGrid& grid, std::vector<double> values,
                                                 std::optional<std::vector<double>> d_dx) {
  const std::size_t n = grid.size();
  if (values.size() != n * n) {
    throw std::invalid_argument(
        fmt::format("production table has {} entries, expected {}x{}", values.size(), n, n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = values[i * n + j];
      if (!std::isfinite(a)) throw std::invalid_argument("production table has non-finite entries");
      if (std::abs(a - values[j * n + i]) > 1e-12) {
        throw std::invalid_argument(
            fmt::format("production table is not symmetric at ({}, {}): {} vs {}", i, j, a,
                        values[j * n + i]));
      }
    }
  }
  ProductionFunction f;
  f.kind_ = ProductionKind::tabulated;
  f.table_n_ = n;
  f.table_ = std::move(values);
  if (d_dx) {
    if (d_dx->size() != n * n) {
      throw std::invalid_argument("derivative table must match the production table size");
    }
    f.dx_table_ = std::move(*d_dx);
  }
  return f;
}

std::string ProductionFunction::kind_name() const {
  switch (kind_) {
    case ProductionKind::multiplicative: return "xy";
    case ProductionKind::multiplicative_plus_constant: return "xy+c";
    case ProductionKind::tabulated: return "table";
  }
  return "unknown";
}

double ProductionFunction::table_bilinear(const std::vector<double>& tab, double x, double y) const {
  const std::size_t n = table_n_;
  const double dn = static_cast<double>(n);
  // Position in node coordinates: node i sits at s = i.
  const double sx = x * dn - 0.5;
  const double sy = y * dn - 0.5;
  const auto cell = [n](double s) {
    const double fl = std::floor(s);
    const double hi = static_cast<double>(n - 2);
    return static_cast<std::size_t>(std::clamp(fl, 0.0, hi));
  };
  const std::size_t ix = cell(sx);
  const std::size_t iy = cell(sy);
  const double tx = sx - static_cast<double>(ix);
  const double ty = sy - static_cast<double>(iy);
  const double f00 = tab[ix * n + iy];
  const double f10 = tab[(ix + 1) * n + iy];
  const double f01 = tab[ix * n + iy + 1];
  const double f11 = tab[(ix + 1) * n + iy + 1];
  return (1 - tx) * (1 - ty) * f00 + tx * (1 - ty) * f10 + (1 - tx) * ty * f01 + tx * ty * f11;
}

double ProductionFunction::eval(double x, double y) const {
  switch (kind_) {
    case ProductionKind::multiplicative: return x * y;
    case ProductionKind::multiplicative_plus_constant: return x * y + c_;
    case ProductionKind::tabulated: return table_bilinear(table_, x, y);
  }
  return 0.0;
}

double ProductionFunction::d_dx(double x, double y) const {
  switch (kind_) {
    case ProductionKind::multiplicative:
    case ProductionKind::multiplicative_plus_constant: return y;
    case ProductionKind::tabulated: {
      if (!dx_table_.empty()) return table_bilinear(dx_table_, x, y);
      const double h = 1.0 / (4.0 * static_cast<double>(table_n_));
      return (eval(x + h, y) - eval(x - h, y)) / (2.0 * h);
    }
  }
  return 0.0;
}

double ProductionFunction::at(const TypeGrid& grid, std::size_t i, std::size_t j) const {
  if (kind_ == ProductionKind::tabulated && grid.size() == table_n_) return table_[i * table_n_ + j];
  return eval(grid.node(i), grid.node(j));
}

double ProductionFunction::dx_at(const TypeGrid& grid, std::size_t i, std::size_t j) const {
  if (kind_ == ProductionKind::tabulated && grid.size() == table_n_ && !dx_table_.empty()) {
    return dx_table_[i * table_n_ + j];
  }
  return d_dx(grid.node(i), grid.node(j));
}

double ProductionFunction::symmetry_defect(const TypeGrid& grid) const {
  double defect = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      defect = std::max(defect, std::abs(at(grid, i, j) - at(grid, j, i)));
    }
  }
  return defect;
}

bool ProductionFunction::is_monotone_on(const TypeGrid& grid) const {
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (at(grid, i + 1, j) < at(grid, i, j)) return false;
    }
  }
  return true;
}

bool ProductionFunction::is_strictly_increasing_on(const TypeGrid& grid) const {
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (!(at(grid, i + 1, j) > at(grid, i, j))) return false;
    }
  }
  return true;
}

bool ProductionFunction::is_strictly_supermodular_on(const TypeGrid& grid, std::size_t stride) const {
  stride = std::max<std::size_t>(stride, 1);
  const std::size_t n = grid.size();
  for (std::size_t lo_x = 0; lo_x < n; lo_x += stride) {
    for (std::size_t hi_x = lo_x + stride; hi_x < n; hi_x += stride) {
      for (std::size_t lo_y = 0; lo_y < n; lo_y += stride) {
        for (std::size_t hi_y = lo_y + stride; hi_y < n; hi_y += stride) {
          const double lhs = at(grid, hi_x, hi_y) + at(grid, lo_x, lo_y);
          const double rhs = at(grid, hi_x, lo_y) + at(grid, lo_x, hi_y);
          if (!(lhs > rhs)) return false;
        }
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Platform

Platform::Platform(TypeGrid grid, std::size_t cutoff, std::vector<double> kernel,
                   std::vector<double> transfers)
    : grid_(std::move(grid)), cutoff_(cutoff), kernel_(std::move(kernel)), transfers_(std::move(transfers)) {
  const std::size_t n = grid_.size();
  if (cutoff_ > n) {
    throw std::invalid_argument(fmt::format("cutoff {} exceeds grid size {}", cutoff_, n));
  }
  const std::size_t m = n - cutoff_;
  if (kernel_.size() != m * m) {
    throw std::invalid_argument(
        fmt::format("kernel has {} entries, expected {}x{} for cutoff {}", kernel_.size(), m, m, cutoff_));
  }
  if (transfers_.empty()) transfers_.assign(n, 0.0);
  if (transfers_.size() != n) {
    throw std::invalid_argument(fmt::format("transfer vector has {} entries, expected {}", transfers_.size(), n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(transfers_[i])) throw std::invalid_argument("transfers must be finite");
    if (i < cutoff_ && transfers_[i] != 0.0) {
      throw std::invalid_argument(fmt::format("excluded node {} has nonzero transfer {}", i, transfers_[i]));
    }
  }

  csr_.row_ptr.assign(m + 1, 0);
  for (std::size_t a = 0; a < m; ++a) {
    double row_sum = 0.0;
    for (std::size_t b = 0; b < m; ++b) {
      const double g = kernel_[a * m + b];
      if (!(g >= 0.0) || !std::isfinite(g)) {
        throw std::invalid_argument(fmt::format("kernel entry ({}, {}) = {} is not a probability", a, b, g));
      }
      row_sum += g;
      if (g > 0.0) {
        csr_.col.push_back(b);
        csr_.val.push_back(g);
      }
      if (b > a) defect_ = std::max(defect_, std::abs(g - kernel_[b * m + a]));
    }
    if (std::abs(row_sum - 1.0) > kRowSumTolerance) {
      throw std::invalid_argument(fmt::format("kernel row {} sums to {:.17g}, not 1", a, row_sum));
    }
    csr_.row_ptr[a + 1] = csr_.col.size();
  }
}

double Platform::exclusion_level() const {
  return cutoff_ < grid_.size() ? grid_.node(cutoff_) : 1.0;
}

double Platform::kernel(std::size_t i, std::size_t j) const {
  if (!is_included(i) || !is_included(j)) return 0.0;
  const std::size_t m = included_count();
  return kernel_[(i - cutoff_) * m + (j - cutoff_)];
}

Platform Platform::with_transfers(std::vector<double> transfers) const {
  return Platform(grid_, cutoff_, kernel_, std::move(transfers));
}

GlitchSpec::GlitchSpec(double epsilon) : epsilon_(epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument(fmt::format("glitch weight must lie in (0, 1), got {}", epsilon));
  }
}

// ---------------------------------------------------------------------------

double surplus(const ProductionFunction& f, const TypeGrid& grid, std::span<const double> w,
               std::size_t i, std::size_t j) {
  return f.at(grid, i, j) - w[i] - w[j];
}

std::vector<double> production_matrix(const ProductionFunction& f, const TypeGrid& grid) {
  const std::size_t n = grid.size();
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = f.at(grid, i, j);
  }
  return out;
}

std::vector<std::uint8_t> acceptance_matrix(const ProductionFunction& f, const TypeGrid& grid,
                                            std::span<const double> w) {
  const std::size_t n = grid.size();
  if (w.size() != n) throw std::invalid_argument("wage vector does not match the grid");
  std::vector<std::uint8_t> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = (f.at(grid, i, j) - w[i] - w[j] >= 0.0) ? 1 : 0;
  }
  return out;
}

}  // namespace matchlab
