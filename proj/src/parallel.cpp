#include "pdball/parallel.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pdball {

namespace {
int g_jobs = 0;  // 0 = runtime default
}

int max_jobs() {
#ifdef _OPENMP
  return g_jobs > 0 ? g_jobs : omp_get_max_threads();
#else
  return 1;
#endif
}

void set_max_jobs(int jobs) {
  g_jobs = std::max(1, jobs);
#ifdef _OPENMP
  omp_set_num_threads(g_jobs);
#endif
}

}  // namespace pdball
