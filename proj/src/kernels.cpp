#include "grokscale/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace grokscale::kernels {

void set_kernel_threads(int threads) {
#ifdef _OPENMP
  omp_set_num_threads(threads < 1 ? 1 : threads);
#else
  (void)threads;
#endif
}

int kernel_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace grokscale::kernels
