#pragma once
// Dense double-precision kernels used by the signature and attention code.
//
// Every kernel has a scalar reference implementation. Vector variants are
// compiled into separate translation units with their own target flags and
// selected once at startup from CPUID. The RFORMER_SIMD environment variable
// (scalar | avx2 | auto) overrides the choice.

#include <cstddef>
#include <string_view>

namespace rformer::simd {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  Isa isa;
  const char* name;

  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);

  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  // C(m x n) += A(m x k) * B(k x n), all row-major with explicit leading
  // dimensions. Per output element the products are summed in increasing k.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a,
               std::size_t lda, const double* b, std::size_t ldb, double* c,
               std::size_t ldc);

  // C(m x n) += A^T * B with A stored k x m. Same summation order as gemm.
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc);

  // Row-wise softmax in place with max subtraction.
  void (*softmax_rows)(double* x, std::size_t rows, std::size_t cols,
                       std::size_t ld);

  // out[i] = exp(x[i]); out may alias x.
  void (*exp)(const double* x, double* out, std::size_t n);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks support.
const KernelTable* avx2_kernels();

// The table chosen for this process. Stable for the lifetime of the process
// unless select() is called.
const KernelTable& active();

// Forces a specific ISA. Returns false (and leaves the selection untouched)
// when the ISA is unavailable.
bool select(Isa isa);

bool parse_isa(std::string_view name, Isa& out);

}  // namespace rformer::simd
