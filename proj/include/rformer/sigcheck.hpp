#pragma once
// Randomized self-test of the signature identities: Chen split consistency,
// associativity, invariance under collinear subdivision, and factorial decay.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace rformer {

struct SigCheckConfig {
  std::size_t trials = 200;
  std::size_t max_dim = 4;
  std::size_t max_depth = 5;
  std::size_t max_segments = 50;
  double tolerance = 1e-12;  // max relative error per level
  std::uint64_t seed = 0;
};

struct PropertyResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double max_error = 0.0;  // relative error, or bound ratio excess for decay
  bool passed() const { return failures == 0; }
};

class TruncatedSignature;

// Level-wise relative error max_k |a_k - b_k|_inf / s_k with
// s_k = max(|b_k|_inf, one_var^k / k!). The second term is the magnitude of
// the terms summed into level k, which bounds the rounding error of any
// evaluation order; with one_var = 0 this is the plain relative error.
double relative_level_error(const TruncatedSignature& a, const TruncatedSignature& b,
                            double one_var = 0.0);

std::vector<PropertyResult> run_signature_checks(const SigCheckConfig& cfg);

}  // namespace rformer
