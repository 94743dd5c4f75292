#pragma once

#include <cstddef>

namespace covevo::detail {

/// s[i] = sin(w x[i]), c[i] = cos(w x[i]). Vectorized through the C
/// library's SIMD math routines where available.
void sin_cos(const double* x, double w, double* s, double* c, std::ptrdiff_t n);

}  // namespace covevo::detail
