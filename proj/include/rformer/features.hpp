#pragma once
// Multi-view signature transform over a fixed time-window grid.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rformer/sigcore.hpp"

namespace rformer {

// Classification targets are class indices; regression targets are vectors.
using Target = std::variant<std::monostate, int, std::vector<double>>;

struct TimeSeries {
  std::vector<double> times;
  std::vector<double> values;  // points x dim, row-major
  std::size_t dim = 0;
  Target target;

  std::size_t points() const { return times.size(); }
  std::span<const double> point(std::size_t i) const {
    return std::span<const double>(values).subspan(i * dim, dim);
  }
  PathView path() const { return PathView{values, dim}; }
  double start_time() const { return times.front(); }
  double end_time() const { return times.back(); }

  // Throws std::invalid_argument when times are not strictly increasing,
  // values are non-finite, or there are fewer than 2 points.
  void validate() const;
};

// FNV-1a over dim, times and values.
std::uint64_t series_hash(const TimeSeries& ts);

struct WindowGrid {
  std::vector<double> boundaries;

  std::size_t num_windows() const {
    return boundaries.empty() ? 0 : boundaries.size() - 1;
  }
};

// Uniform in time: b_k = start + k (end - start) / num_windows.
WindowGrid make_grid(double domain_start, double domain_end,
                     std::size_t num_windows);

enum class FeatureMode { kLocal, kGlobal, kMultiview, kRawTokens };

std::string_view to_string(FeatureMode mode);
FeatureMode parse_feature_mode(std::string_view name);

struct FeatureMeta {
  FeatureMode mode = FeatureMode::kMultiview;
  std::size_t depth = 2;
  bool univariate = false;
  bool time_augmented = false;
};

struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // rows x cols, row-major
  FeatureMeta meta;

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data).subspan(r * cols, cols);
  }
};

struct FeatureConfig {
  FeatureMode mode = FeatureMode::kMultiview;
  std::size_t depth = 2;
  std::size_t num_windows = 40;
  bool univariate = false;
  bool time_augment = false;
};

// Piecewise-linear interpolation; clamps outside [t_0, t_L].
std::vector<double> eval_at(const TimeSeries& ts, double t);
void eval_at_into(const TimeSeries& ts, double t, std::span<double> out);

// Signature over [a, b] of the interpolated path: interpolated endpoints plus
// every sample strictly inside the window.
TruncatedSignature window_signature(const TimeSeries& ts, double a, double b,
                                    std::size_t depth);

// Columns per window row for the given configuration and raw dimension.
std::size_t feature_width(std::size_t dim, std::size_t depth, FeatureMode mode,
                          bool univariate, bool time_augment);

// Appends the sampling times as channel 0: the path becomes (t, X(t)).
TimeSeries time_augmented(const TimeSeries& ts);

FeatureMatrix multiview_transform(const TimeSeries& ts, const WindowGrid& grid,
                                  std::size_t depth, FeatureMode mode,
                                  bool time_augment);

// Per channel i, the transform of the 2-D path (t, X_i(t)); channel blocks
// are concatenated in channel order.
FeatureMatrix univariate_transform(const TimeSeries& ts, const WindowGrid& grid,
                                   std::size_t depth, FeatureMode mode);

// One token per sample: (t, x_1, ..., x_d). The input for the raw-token
// attention baseline.
FeatureMatrix raw_tokens(const TimeSeries& ts);

// Dispatches on cfg.mode / cfg.univariate.
FeatureMatrix compute_features(const TimeSeries& ts, const WindowGrid& grid,
                               const FeatureConfig& cfg);

// Transforms every series; threads == 0 uses the hardware concurrency. Output
// order matches input order regardless of thread count.
std::vector<FeatureMatrix> compute_features_all(std::span<const TimeSeries> series,
                                                const WindowGrid& grid,
                                                const FeatureConfig& cfg,
                                                unsigned threads = 0);

// Keeps each interior point independently with probability keep_prob. The
// first and last points are always kept.
TimeSeries random_drop(const TimeSeries& ts, double keep_prob,
                       std::uint64_t seed);

// Per-column z-score with statistics from a fitting set.
class Standardizer {
 public:
  void fit(std::span<const FeatureMatrix> mats);
  void apply(FeatureMatrix& m) const;
  bool fitted() const { return !mean_.empty(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }
  void set(std::vector<double> mean, std::vector<double> scale);

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

}  // namespace rformer
