#pragma once
// Synthetic generators for the controlled sinusoid tasks, dataset splits, and
// CSV interchange.
//
// CSV schema (UTF-8, comma separated, '.' decimal point):
//   series_id,t,x1,...,xd[,y | ,y1,...,yk]
// One row per sample point. Targets repeat on every row of a series.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "rformer/features.hpp"
#include "rformer/net.hpp"

namespace rformer {

struct Splits {
  std::vector<std::size_t> train, val, test;
};

struct Dataset {
  std::vector<TimeSeries> samples;
  Task task = Task::kClassify;
  std::size_t num_outputs = 0;  // classes, or regression dims
  Splits splits;
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t dim() const { return samples.empty() ? 0 : samples.front().dim; }
  // Throws std::invalid_argument on mixed dims, bad targets, or splits that
  // overlap or fail to cover every sample exactly once.
  void validate() const;
};

// splitmix64 mixing of (seed, a, b); used for every derived sub-seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

struct SplitFractions {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

// Stratified by class for classification. Same seed, same partition.
Splits make_splits(const Dataset& ds, const SplitFractions& fractions, std::uint64_t seed);

struct SinusoidConfig {
  std::size_t num_classes = 100;
  std::size_t samples_per_class = 10;
  std::size_t length = 2000;  // points per series
  double t_end = 1.0;
  double noise_sigma = 0.1;
  std::vector<double> trend_coeffs{1.0, 0.0, 0.5};  // g(t) = sum c_p t^p
  double omega_min = 10.0;
  double omega_max = 500.0;
  bool random_phase = true;
  std::uint64_t seed = 0;
  SplitFractions fractions;
};

nlohmann::json to_json(const SinusoidConfig& cfg);

// Class frequencies evenly spaced over [omega_min, omega_max].
std::vector<double> class_frequencies(const SinusoidConfig& cfg);

Dataset gen_sinusoidal(const SinusoidConfig& cfg);

// Frequency omega_0 (class) for t < t0 = switch_frac * t_end, then omega_1
// drawn uniformly over the same range. switch_frac == 1 never switches.
Dataset gen_long_sinusoidal(const SinusoidConfig& cfg, double switch_frac);

struct SpatialConfig {
  std::size_t num_samples = 1000;
  std::size_t length = 200;  // points per series
  double t_end = 1.0;
  double equal_frac = 0.01;
  std::uint64_t seed = 0;
  SplitFractions fractions;
};

nlohmann::json to_json(const SpatialConfig& cfg);

// Number of trailing points copied from channel 1 into channel 2 for
// positive samples: ceil(equal_frac * length).
std::size_t spatial_tail_points(const SpatialConfig& cfg);

// Two channels sin(w_i t + v_i), w_i, v_i ~ U[0, 2 pi). Even sample indices
// are positive (label 1): their trailing points are identical in both
// channels.
Dataset gen_spatial_pair(const SpatialConfig& cfg);

struct CsvSchema {
  Task task = Task::kClassify;
  std::size_t num_outputs = 0;  // 0: infer (classes = max label + 1)
};

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema,
                 std::uint64_t split_seed = 0, const SplitFractions& fractions = {});
Dataset parse_csv(const std::string& text, const CsvSchema& schema,
                  std::uint64_t split_seed = 0, const SplitFractions& fractions = {});

std::string to_csv(const Dataset& ds);
void write_csv(const std::filesystem::path& path, const Dataset& ds);

}  // namespace rformer
