#pragma once

#include <cstddef>
#include <vector>

#include "ganaug/parallel.hpp"

namespace ganaug::detail {

// C[M,N] += A[M,K] * B[K,N], all row-major. i-k-j order: the inner j loop is
// an axpy over independent output elements, so it vectorizes without
// reordering any per-element accumulation. Rows of C are independent, which
// keeps threaded runs bit-identical to serial ones.
inline void gemm_nn(int m, int k, int n, const float* a, const float* b, float* c) {
  auto row = [=](std::int64_t i) {
    float* crow = c + static_cast<std::size_t>(i) * n;
    const float* arow = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      float av = arow[p];
      if (av == 0.0f) continue;
      const float* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  };
  if (static_cast<std::int64_t>(m) * k * n >= (1 << 16)) {
    parallel_for(0, m, row);
  } else {
    for (int i = 0; i < m; ++i) row(i);
  }
}

// B[N,M] = A[M,N] transposed, row-major.
inline void transpose(int m, int n, const float* a, float* out) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<std::size_t>(j) * m + i] = a[static_cast<std::size_t>(i) * n + j];
}

inline std::vector<float> transposed(int m, int n, const float* a) {
  std::vector<float> out(static_cast<std::size_t>(m) * n);
  transpose(m, n, a, out.data());
  return out;
}

}  // namespace ganaug::detail
