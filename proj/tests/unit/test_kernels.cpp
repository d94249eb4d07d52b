#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "rformer/simd/kernels.hpp"
#include "test_util.hpp"

using rformer::simd::KernelTable;

namespace {

// Every available table, scalar first.
std::vector<const KernelTable*> tables() {
  std::vector<const KernelTable*> out{&rformer::simd::scalar_kernels()};
  if (const auto* v = rformer::simd::avx2_kernels()) out.push_back(v);
  return out;
}

// Naive triple loop with long double accumulation, independent of both tables.
std::vector<double> reference_gemm(std::size_t m, std::size_t n, std::size_t k,
                                   const std::vector<double>& a, bool trans_a,
                                   const std::vector<double>& b, const std::vector<double>& c0) {
  std::vector<double> c = c0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      long double acc = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) {
        const double av = trans_a ? a[p * m + i] : a[i * k + p];
        acc += static_cast<long double>(av) * b[p * n + j];
      }
      c[i * n + j] = static_cast<double>(acc);
    }
  return c;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("dot and axpy agree with a plain loop for every length mod 4") {
    std::mt19937_64 rng(11);
    for (const auto* t : tables()) {
      for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 8u, 13u, 64u, 1001u}) {
        const auto x = testutil::random_vector(rng, n);
        const auto y = testutil::random_vector(rng, n);
        long double ref = 0.0L;
        for (std::size_t i = 0; i < n; ++i) ref += static_cast<long double>(x[i]) * y[i];
        CHECK(t->dot(x.data(), y.data(), n) ==
              doctest::Approx(static_cast<double>(ref)).epsilon(1e-12).scale(n + 1.0));

        auto z = y;
        t->axpy(-0.75, x.data(), z.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(z[i] == doctest::Approx(y[i] - 0.75 * x[i]));
      }
    }
  }

  TEST_CASE("gemm and gemm_tn match a long double reference on ragged shapes") {
    std::mt19937_64 rng(12);
    for (const auto* t : tables()) {
      for (std::size_t m : {1u, 3u, 4u, 7u, 9u, 16u})
        for (std::size_t n : {1u, 5u, 8u, 12u, 17u})
          for (std::size_t k : {1u, 2u, 6u, 33u}) {
            const auto a = testutil::random_vector(rng, m * k);
            const auto b = testutil::random_vector(rng, k * n);
            const auto c0 = testutil::random_vector(rng, m * n);
            for (bool trans : {false, true}) {
              auto c = c0;
              if (trans)
                t->gemm_tn(m, n, k, a.data(), m, b.data(), n, c.data(), n);
              else
                t->gemm(m, n, k, a.data(), k, b.data(), n, c.data(), n);
              const auto ref = reference_gemm(m, n, k, a, trans, b, c0);
              INFO(t->name << " m=" << m << " n=" << n << " k=" << k << " trans=" << trans);
              CHECK(testutil::max_abs_diff(c, ref) <= 1e-13 * (k + 1));
            }
          }
    }
  }

  TEST_CASE("gemm honours leading dimensions larger than the logical width") {
    std::mt19937_64 rng(13);
    const std::size_t m = 6, n = 9, k = 5, lda = 11, ldb = 14, ldc = 10;
    const auto a = testutil::random_vector(rng, m * lda);
    const auto b = testutil::random_vector(rng, k * ldb);
    for (const auto* t : tables()) {
      std::vector<double> c(m * ldc, 0.5);
      t->gemm(m, n, k, a.data(), lda, b.data(), ldb, c.data(), ldc);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double ref = 0.5;
          for (std::size_t p = 0; p < k; ++p) ref += a[i * lda + p] * b[p * ldb + j];
          CHECK(c[i * ldc + j] == doctest::Approx(ref).epsilon(1e-13));
        }
        for (std::size_t j = n; j < ldc; ++j) CHECK(c[i * ldc + j] == 0.5);  // padding untouched
      }
    }
  }

  TEST_CASE("vector exp stays within a few ulp of std::exp and handles the range ends") {
    std::vector<double> x;
    for (double v = -745.0; v <= 709.0; v += 0.173) x.push_back(v);
    for (double v : {0.0, -0.0, 1e-300, -1e-300, 0.5 * std::log(2.0), -0.5 * std::log(2.0)})
      x.push_back(v);
    for (const auto* t : tables()) {
      std::vector<double> out(x.size());
      t->exp(x.data(), out.data(), x.size());
      double worst = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double ref = std::exp(x[i]);
        if (ref < 1e-300) {  // subnormal region: flushing to zero is allowed
          CHECK(out[i] <= 1e-300);
          continue;
        }
        worst = std::max(worst, std::abs(out[i] - ref) / ref);
      }
      INFO(t->name);
      CHECK(worst < 1e-15);
    }
  }

  TEST_CASE("exp overflows to +inf above the double range") {
    for (const auto* t : tables()) {
      const double x[5] = {710.0, 800.0, 1e6, 709.5, 0.0};
      double out[5];
      t->exp(x, out, 5);
      CHECK(std::isinf(out[0]));
      CHECK(std::isinf(out[1]));
      CHECK(std::isinf(out[2]));
      CHECK(out[4] == 1.0);
    }
  }

  TEST_CASE("softmax rows sum to one and agree across tables") {
    std::mt19937_64 rng(14);
    const std::size_t rows = 7, cols = 37, ld = 40;
    auto base = testutil::random_vector(rng, rows * ld, 5.0);
    base[3] = 800.0;  // large logits must not overflow
    std::vector<std::vector<double>> results;
    for (const auto* t : tables()) {
      auto x = base;
      t->softmax_rows(x.data(), rows, cols, ld);
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          CHECK(x[r * ld + c] >= 0.0);
          s += x[r * ld + c];
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
        for (std::size_t c = cols; c < ld; ++c) CHECK(x[r * ld + c] == base[r * ld + c]);
      }
      results.push_back(x);
    }
    for (std::size_t i = 1; i < results.size(); ++i)
      CHECK(testutil::max_abs_diff(results[0], results[i]) < 1e-15);
  }

  TEST_CASE("select switches the active table and rejects unavailable variants") {
    using rformer::simd::Isa;
    const Isa before = rformer::simd::active().isa;
    CHECK(rformer::simd::select(Isa::kScalar));
    CHECK(rformer::simd::active().isa == Isa::kScalar);
    const bool has_avx2 = rformer::simd::avx2_kernels() != nullptr;
    CHECK(rformer::simd::select(Isa::kAvx2) == has_avx2);
    rformer::simd::select(before);

    Isa parsed = Isa::kScalar;
    CHECK(rformer::simd::parse_isa("avx2", parsed));
    CHECK(parsed == Isa::kAvx2);
    CHECK_FALSE(rformer::simd::parse_isa("neon", parsed));
  }
}
