#include "matchlab/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace matchlab::kernels {

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

namespace serial {

#define MATCHLAB_ROW_LOOP
#include "kernels_impl.inc"
#undef MATCHLAB_ROW_LOOP

}  // namespace serial
}  // namespace matchlab::kernels
