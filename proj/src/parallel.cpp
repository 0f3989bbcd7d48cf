#include "qif/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qif {

namespace detail {

void omp_for_impl(int count, void* ctx, void (*fn)(void*, int)) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (int i = 0; i < count; ++i) fn(ctx, i);
#else
  for (int i = 0; i < count; ++i) fn(ctx, i);
#endif
}

}  // namespace detail

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace qif
