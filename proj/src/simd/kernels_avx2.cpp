// AVX2 + FMA kernels. Compiled with -mavx2 -mfma; only reached after the
// dispatcher has confirmed CPU support.

#include <immintrin.h>

#include <cmath>

#include "kernels_internal.hpp"

namespace rformer::simd {
namespace avx2 {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_max_sd(lo, sh));
}

// Cephes-style exp: x = n*ln2 + r, |r| <= ln2/2, rational approximation on r,
// then scale by 2^n through the exponent bits. Inputs below the normal range
// flush to zero; inputs above overflow to +inf.
inline __m256d exp_pd(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d lo_limit = _mm256_set1_pd(-708.0);
  const __m256d hi_limit = _mm256_set1_pd(709.0);

  const __m256d underflow = _mm256_cmp_pd(x, lo_limit, _CMP_LT_OQ);
  const __m256d overflow = _mm256_cmp_pd(x, hi_limit, _CMP_GT_OQ);
  x = _mm256_max_pd(_mm256_min_pd(x, hi_limit), lo_limit);

  __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, c1, x);
  r = _mm256_fnmadd_pd(n, c2, r);

  // exp(r) for |r| <= ln2 / 2: Taylor series to degree 12, Horner form.
  __m256d e = _mm256_set1_pd(1.0 / 479001600.0);
  e = _mm256_fmadd_pd(e, r, _mm256_set1_pd(1.0 / 39916800.0));
  e = _mm256_fmadd_pd(e, r, _mm256_set1_pd(1.0 / 3628800.0));
  e = _mm256_fmadd_pd(e, r, _mm256_set1_pd(1.0 / 362880.0));
  e = _mm256_fmadd_pd(e, r, _mm256_set1_pd(1.0 / 40320.0));
  e = _mm256_fmadd_pd(e, r, _mm256_set1_pd(1.0 / 5040.0));
  e = _mm256_fmadd_pd(e, r, _mm256_set1_pd(1.0 / 720.0));
  e = _mm256_fmadd_pd(e, r, _mm256_set1_pd(1.0 / 120.0));
  e = _mm256_fmadd_pd(e, r, _mm256_set1_pd(1.0 / 24.0));
  e = _mm256_fmadd_pd(e, r, _mm256_set1_pd(1.0 / 6.0));
  e = _mm256_fmadd_pd(e, r, _mm256_set1_pd(0.5));
  e = _mm256_fmadd_pd(e, r, _mm256_set1_pd(1.0));
  e = _mm256_fmadd_pd(e, r, _mm256_set1_pd(1.0));

  // 2^n: n is integral and within [-1022, 1023]; the magic-number add leaves
  // it in the low mantissa bits.
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);  // 2^52 + 2^51
  __m256i ni = _mm256_castpd_si256(_mm256_add_pd(n, magic));
  ni = _mm256_sub_epi64(ni, _mm256_castpd_si256(magic));
  ni = _mm256_slli_epi64(ni, 52);
  e = _mm256_castsi256_pd(_mm256_add_epi64(_mm256_castpd_si256(e), ni));

  e = _mm256_andnot_pd(underflow, e);
  e = _mm256_blendv_pd(e, _mm256_set1_pd(HUGE_VAL), overflow);
  return e;
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                           _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// 4x8 register block: eight accumulators, two B loads and four broadcasts per
// k step. A(i, p) lives at a[i * lda + p], or at a[p * lda + i] when TransA.
template <bool TransA>
inline const double* a_at(const double* a, std::size_t lda, std::size_t i, std::size_t p) {
  return TransA ? a + p * lda + i : a + i * lda + p;
}

template <bool TransA>
inline void block_4x8(std::size_t k, const double* a, std::size_t lda,
                      const double* b, std::size_t ldb, double* c,
                      std::size_t ldc) {
  __m256d c00 = _mm256_loadu_pd(c), c01 = _mm256_loadu_pd(c + 4);
  __m256d c10 = _mm256_loadu_pd(c + ldc), c11 = _mm256_loadu_pd(c + ldc + 4);
  __m256d c20 = _mm256_loadu_pd(c + 2 * ldc),
          c21 = _mm256_loadu_pd(c + 2 * ldc + 4);
  __m256d c30 = _mm256_loadu_pd(c + 3 * ldc),
          c31 = _mm256_loadu_pd(c + 3 * ldc + 4);
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * ldb);
    const __m256d b1 = _mm256_loadu_pd(b + p * ldb + 4);
    __m256d av = _mm256_broadcast_sd(a_at<TransA>(a, lda, 0, p));
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(a_at<TransA>(a, lda, 1, p));
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(a_at<TransA>(a, lda, 2, p));
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(a_at<TransA>(a, lda, 3, p));
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  _mm256_storeu_pd(c, c00);
  _mm256_storeu_pd(c + 4, c01);
  _mm256_storeu_pd(c + ldc, c10);
  _mm256_storeu_pd(c + ldc + 4, c11);
  _mm256_storeu_pd(c + 2 * ldc, c20);
  _mm256_storeu_pd(c + 2 * ldc + 4, c21);
  _mm256_storeu_pd(c + 3 * ldc, c30);
  _mm256_storeu_pd(c + 3 * ldc + 4, c31);
}

// One row i of C, columns [j0, n): 4-wide vectors then a scalar tail.
template <bool TransA>
inline void row_tail(std::size_t j0, std::size_t n, std::size_t k, const double* a,
                     std::size_t lda, std::size_t i, const double* b, std::size_t ldb,
                     double* crow) {
  std::size_t j = j0;
  for (; j + 4 <= n; j += 4) {
    __m256d acc = _mm256_loadu_pd(crow + j);
    for (std::size_t p = 0; p < k; ++p)
      acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a_at<TransA>(a, lda, i, p)),
                            _mm256_loadu_pd(b + p * ldb + j), acc);
    _mm256_storeu_pd(crow + j, acc);
  }
  for (; j < n; ++j) {
    double acc = crow[j];
    for (std::size_t p = 0; p < k; ++p)
      acc = std::fma(*a_at<TransA>(a, lda, i, p), b[p * ldb + j], acc);
    crow[j] = acc;
  }
}

template <bool TransA>
void gemm_impl(std::size_t m, std::size_t n, std::size_t k, const double* a,
               std::size_t lda, const double* b, std::size_t ldb, double* c,
               std::size_t ldc) {
  const std::size_t n8 = n - n % 8;
  const std::size_t m4 = m - m % 4;
  // Keep the panel of the larger operand hot in L1 across the inner loop.
  if (n > m) {
    for (std::size_t j = 0; j < n8; j += 8)
      for (std::size_t i = 0; i < m4; i += 4)
        block_4x8<TransA>(k, a_at<TransA>(a, lda, i, 0), lda, b + j, ldb, c + i * ldc + j, ldc);
  } else {
    for (std::size_t i = 0; i < m4; i += 4)
      for (std::size_t j = 0; j < n8; j += 8)
        block_4x8<TransA>(k, a_at<TransA>(a, lda, i, 0), lda, b + j, ldb, c + i * ldc + j, ldc);
  }
  if (n8 < n) {
    for (std::size_t i = 0; i < m4; ++i)
      row_tail<TransA>(n8, n, k, a, lda, i, b, ldb, c + i * ldc);
  }
  for (std::size_t i = m4; i < m; ++i) row_tail<TransA>(0, n, k, a, lda, i, b, ldb, c + i * ldc);
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a,
          std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc) {
  gemm_impl<false>(m, n, k, a, lda, b, ldb, c, ldc);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc) {
  gemm_impl<true>(m, n, k, a, lda, b, ldb, c, ldc);
}

void exp(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp_pd(_mm256_loadu_pd(x + i)));
  if (i < n) {
    alignas(32) double buf[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t j = i; j < n; ++j) buf[j - i] = x[j];
    _mm256_store_pd(buf, exp_pd(_mm256_load_pd(buf)));
    for (std::size_t j = i; j < n; ++j) out[j] = buf[j - i];
  }
}

void softmax_rows(double* x, std::size_t rows, std::size_t cols,
                  std::size_t ld) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = x + r * ld;
    std::size_t j = 0;
    double mx = row[0];
    if (cols >= 4) {
      __m256d vmax = _mm256_loadu_pd(row);
      for (j = 4; j + 4 <= cols; j += 4)
        vmax = _mm256_max_pd(vmax, _mm256_loadu_pd(row + j));
      mx = hmax(vmax);
    } else {
      j = 1;
    }
    for (; j < cols; ++j) mx = mx > row[j] ? mx : row[j];

    const __m256d vm = _mm256_set1_pd(mx);
    __m256d vsum = _mm256_setzero_pd();
    j = 0;
    for (; j + 4 <= cols; j += 4) {
      const __m256d e = exp_pd(_mm256_sub_pd(_mm256_loadu_pd(row + j), vm));
      _mm256_storeu_pd(row + j, e);
      vsum = _mm256_add_pd(vsum, e);
    }
    double sum = hsum(vsum);
    for (; j < cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    const double inv = 1.0 / sum;
    const __m256d vs = _mm256_set1_pd(inv);
    j = 0;
    for (; j + 4 <= cols; j += 4)
      _mm256_storeu_pd(row + j, _mm256_mul_pd(_mm256_loadu_pd(row + j), vs));
    for (; j < cols; ++j) row[j] *= inv;
  }
}

}  // namespace
}  // namespace avx2

const KernelTable& avx2_table_unchecked() {
  static const KernelTable table{Isa::kAvx2,       "avx2",
                                 avx2::dot,        avx2::axpy,
                                 avx2::gemm,       avx2::gemm_tn,
                                 avx2::softmax_rows,
                                 avx2::exp};
  return table;
}

}  // namespace rformer::simd
