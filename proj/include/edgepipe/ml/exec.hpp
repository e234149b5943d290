#pragma once

namespace edgepipe {

// Kernels with an OpenMP path keep the plain loop as a reference; tests
// compare the two bit for bit.
enum class Exec { serial, parallel };

// Sets the OpenMP thread count for parallel kernels (0 = runtime default).
void set_kernel_threads(int n);
int kernel_threads();

}  // namespace edgepipe
