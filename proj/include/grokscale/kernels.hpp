#pragma once

// Dense row-major kernels used by the transformer and the probe covariance.
//
// Two implementations of every kernel live here:
//   kernels::serial::*  textbook loops, kept as the reference for tests;
//   kernels::*          register-blocked loops parallelized over output rows.
//
// The parallel versions never split a reduction across threads. Each output
// element is accumulated by exactly one thread in a fixed order, so results
// are bit-identical for any thread count.

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace grokscale::kernels {

/// Rows below which the parallel kernels stay on the calling thread.
inline constexpr std::size_t kParallelRowThreshold = 64;

namespace serial {

/// C[m x n] (+)= A[m x k] * B[k x n]
template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a, std::span<const T> b,
             std::span<T> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T sum = accumulate ? c[i * n + j] : T{0};
      for (std::size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[p * n + j];
      c[i * n + j] = sum;
    }
  }
}

/// C[m x n] (+)= A[k x m]^T * B[k x n]
template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a, std::span<const T> b,
             std::span<T> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T sum = accumulate ? c[i * n + j] : T{0};
      for (std::size_t p = 0; p < k; ++p) sum += a[p * m + i] * b[p * n + j];
      c[i * n + j] = sum;
    }
  }
}

/// C[m x n] (+)= A[m x k] * B[n x k]^T
template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a, std::span<const T> b,
             std::span<T> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T sum = accumulate ? c[i * n + j] : T{0};
      for (std::size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[j * k + p];
      c[i * n + j] = sum;
    }
  }
}

}  // namespace serial

namespace detail {

// Register tile: MR rows by NR columns of C, accumulated over the full k range.
template <class T>
inline constexpr std::size_t kTileRows = 6;
template <class T>
inline constexpr std::size_t kTileCols = 256 / sizeof(T);

// C tile (+)= A tile * B panel, where A(i, p) = a[i * rs + p * cs]. The
// compile-time path covers full tiles; mr/nr bound the edges.
template <class T, bool Full>
void gemm_tile(std::size_t k, const T* a, std::size_t rs, std::size_t cs, const T* b, std::size_t ldb, T* c,
               std::size_t ldc, std::size_t mr, std::size_t nr, bool accumulate) {
  constexpr std::size_t MR = kTileRows<T>;
  constexpr std::size_t NR = kTileCols<T>;
  if constexpr (Full) {
    mr = MR;
    nr = NR;
  }
  T acc[MR][NR];
  for (std::size_t r = 0; r < mr; ++r) {
    for (std::size_t j = 0; j < nr; ++j) acc[r][j] = accumulate ? c[r * ldc + j] : T{0};
  }
  for (std::size_t p = 0; p < k; ++p) {
    const T* bp = b + p * ldb;
    for (std::size_t r = 0; r < mr; ++r) {
      const T x = a[r * rs + p * cs];
#pragma omp simd
      for (std::size_t j = 0; j < nr; ++j) acc[r][j] += x * bp[j];
    }
  }
  for (std::size_t r = 0; r < mr; ++r) {
    for (std::size_t j = 0; j < nr; ++j) c[r * ldc + j] = acc[r][j];
  }
}

template <class T>
void gemm_strided(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t rs, std::size_t cs,
                  const T* b, T* c, bool accumulate) {
  constexpr std::size_t MR = kTileRows<T>;
  constexpr std::size_t NR = kTileCols<T>;
  const std::size_t blocks = (m + MR - 1) / MR;
#pragma omp parallel for schedule(static) if (m >= kParallelRowThreshold)
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    const std::size_t i = blk * MR;
    const std::size_t mr = std::min(MR, m - i);
    for (std::size_t j = 0; j < n; j += NR) {
      const std::size_t nr = std::min(NR, n - j);
      T* ct = c + i * n + j;
      if (mr == MR && nr == NR) {
        gemm_tile<T, true>(k, a + i * rs, rs, cs, b + j, n, ct, n, mr, nr, accumulate);
      } else {
        gemm_tile<T, false>(k, a + i * rs, rs, cs, b + j, n, ct, n, mr, nr, accumulate);
      }
    }
  }
}

}  // namespace detail

/// C[m x n] (+)= A[m x k] * B[k x n], all row-major.
template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a, std::span<const T> b,
             std::span<T> c, bool accumulate) {
  detail::gemm_strided<T>(m, n, k, a.data(), k, 1, b.data(), c.data(), accumulate);
}

/// C[m x n] (+)= A[k x m]^T * B[k x n]. Every entry of C is summed over k in
/// order, so results do not depend on the thread count.
template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a, std::span<const T> b,
             std::span<T> c, bool accumulate) {
  detail::gemm_strided<T>(m, n, k, a.data(), 1, m, b.data(), c.data(), accumulate);
}

/// C[m x n] (+)= A[m x k] * B[n x k]^T via an explicit transpose of B.
template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a, std::span<const T> b,
             std::span<T> c, bool accumulate, std::vector<T>& scratch) {
  scratch.resize(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) scratch[p * n + j] = b[j * k + p];
  }
  gemm_nn<T>(m, n, k, a, std::span<const T>(scratch), c, accumulate);
}

/// out[j] (+)= sum_i x[i, j] over the rows of a [rows x n] matrix.
template <class T>
void column_sums(std::size_t rows, std::size_t n, std::span<const T> x, std::span<T> out, bool accumulate) {
  if (!accumulate) std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(n), T{0});
  for (std::size_t i = 0; i < rows; ++i) {
    const T* xi = x.data() + i * n;
#pragma omp simd
    for (std::size_t j = 0; j < n; ++j) out[j] += xi[j];
  }
}

/// Set the OpenMP team size for kernels launched from this thread. No-op
/// without OpenMP.
void set_kernel_threads(int threads);
int kernel_threads();

}  // namespace grokscale::kernels
