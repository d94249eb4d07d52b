#pragma once
// Small helpers shared by the unit tests: seeded generators and comparisons.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "rformer/features.hpp"

namespace testutil {

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

// Strictly increasing, irregular timestamps on [t0, t1] with both endpoints.
inline std::vector<double> irregular_times(std::mt19937_64& rng, std::size_t n, double t0 = 0.0,
                                           double t1 = 1.0) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<double> gaps(n - 1);
  double total = 0.0;
  for (auto& g : gaps) total += (g = u(rng));
  std::vector<double> t(n);
  t[0] = t0;
  double acc = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    acc += gaps[i - 1];
    t[i] = t0 + (t1 - t0) * acc / total;
  }
  t[n - 1] = t1;
  return t;
}

inline rformer::TimeSeries random_series(std::mt19937_64& rng, std::size_t n, std::size_t dim,
                                         double t0 = 0.0, double t1 = 1.0) {
  rformer::TimeSeries ts;
  ts.times = irregular_times(rng, n, t0, t1);
  ts.dim = dim;
  ts.values = random_vector(rng, n * dim);
  return ts;
}

}  // namespace testutil
