#include "matchlab/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace matchlab::kernels::parallel {

#define MATCHLAB_ROW_LOOP _Pragma("omp parallel for schedule(static)")
#include "kernels_impl.inc"
#undef MATCHLAB_ROW_LOOP

}  // namespace matchlab::kernels::parallel
