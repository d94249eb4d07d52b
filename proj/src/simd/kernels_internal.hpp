#pragma once

#include "rformer/simd/kernels.hpp"

namespace rformer::simd {

#if defined(RFORMER_HAVE_AVX2)
// Defined in kernels_avx2.cpp, which is the only unit built with -mavx2.
const KernelTable& avx2_table_unchecked();
#endif

}  // namespace rformer::simd
