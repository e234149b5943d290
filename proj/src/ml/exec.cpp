#include "edgepipe/ml/exec.hpp"

#include <omp.h>

namespace edgepipe {

void set_kernel_threads(int n) { omp_set_num_threads(n > 0 ? n : omp_get_num_procs()); }

int kernel_threads() { return omp_get_max_threads(); }

}  // namespace edgepipe
