#include "vector_math.hpp"

#include <cmath>

namespace covevo::detail {

// This file is built with -ffast-math so that glibc exposes its vector sin/cos
// variants. Keep it free of anything that depends on IEEE special values.
void sin_cos(const double* x, double w, double* s, double* c, std::ptrdiff_t n) {
#pragma omp simd
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    s[i] = std::sin(w * x[i]);
    c[i] = std::cos(w * x[i]);
  }
}

}  // namespace covevo::detail
