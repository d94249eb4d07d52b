#pragma once
// On-disk container for precomputed feature matrices.
//
// Little-endian binary layout:
//   "RFMCACHE" | u32 version | u64 dataset hash | config | grid | samples |
//   u64 FNV-1a checksum of every preceding byte.
// Doubles are stored as their raw IEEE-754 bits, so a write/read cycle is
// bit-exact.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "rformer/features.hpp"

namespace rformer {

struct CacheError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FeatureCache {
  std::uint64_t dataset_hash = 0;
  FeatureConfig config;
  WindowGrid grid;
  std::vector<std::uint64_t> series_hashes;
  std::vector<FeatureMatrix> features;
};

std::uint64_t dataset_hash(std::span<const TimeSeries> series);

std::vector<unsigned char> encode_feature_cache(const FeatureCache& cache);
FeatureCache decode_feature_cache(std::span<const unsigned char> bytes);

void write_feature_cache(const std::filesystem::path& path, const FeatureCache& cache);
FeatureCache read_feature_cache(const std::filesystem::path& path);

}  // namespace rformer
