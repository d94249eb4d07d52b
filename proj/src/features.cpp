#include "rformer/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

namespace rformer {

void TimeSeries::validate() const {
  if (dim == 0) throw std::invalid_argument("time series has zero dimension");
  if (times.size() < 2) throw std::invalid_argument("time series needs at least 2 points");
  if (values.size() != times.size() * dim)
    throw std::invalid_argument("time series values do not match times x dim");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]))
      throw std::invalid_argument("non-finite timestamp at index " + std::to_string(i));
    if (i > 0 && !(times[i] > times[i - 1]))
      throw std::invalid_argument("timestamps not strictly increasing at index " +
                                  std::to_string(i));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw std::invalid_argument("non-finite value at point " + std::to_string(i / dim));
  }
}

std::uint64_t series_hash(const TimeSeries& ts) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  const std::uint64_t d = ts.dim;
  mix(&d, sizeof d);
  mix(ts.times.data(), ts.times.size() * sizeof(double));
  mix(ts.values.data(), ts.values.size() * sizeof(double));
  return h;
}

WindowGrid make_grid(double domain_start, double domain_end,
                     std::size_t num_windows) {
  if (!(domain_start < domain_end))
    throw std::invalid_argument("make_grid: degenerate domain");
  if (num_windows == 0) throw std::invalid_argument("make_grid: need at least one window");
  WindowGrid g;
  g.boundaries.resize(num_windows + 1);
  const double span = domain_end - domain_start;
  for (std::size_t k = 0; k <= num_windows; ++k)
    g.boundaries[k] = domain_start + static_cast<double>(k) * span /
                                         static_cast<double>(num_windows);
  g.boundaries.back() = domain_end;
  return g;
}

std::string_view to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::kLocal: return "local";
    case FeatureMode::kGlobal: return "global";
    case FeatureMode::kMultiview: return "multiview";
    case FeatureMode::kRawTokens: return "raw";
  }
  return "?";
}

FeatureMode parse_feature_mode(std::string_view name) {
  if (name == "local") return FeatureMode::kLocal;
  if (name == "global") return FeatureMode::kGlobal;
  if (name == "multiview") return FeatureMode::kMultiview;
  if (name == "raw") return FeatureMode::kRawTokens;
  throw std::invalid_argument("unknown feature mode '" + std::string(name) + "'");
}

void eval_at_into(const TimeSeries& ts, double t, std::span<double> out) {
  const std::size_t d = ts.dim;
  if (t <= ts.times.front()) {
    auto p = ts.point(0);
    std::copy(p.begin(), p.end(), out.begin());
    return;
  }
  if (t >= ts.times.back()) {
    auto p = ts.point(ts.points() - 1);
    std::copy(p.begin(), p.end(), out.begin());
    return;
  }
  // first sample strictly after t; t lies in [times[hi-1], times[hi])
  const auto it = std::upper_bound(ts.times.begin(), ts.times.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - ts.times.begin());
  const std::size_t lo = hi - 1;
  if (ts.times[lo] == t) {
    auto p = ts.point(lo);
    std::copy(p.begin(), p.end(), out.begin());
    return;
  }
  const double w = (t - ts.times[lo]) / (ts.times[hi] - ts.times[lo]);
  auto p0 = ts.point(lo);
  auto p1 = ts.point(hi);
  for (std::size_t c = 0; c < d; ++c) out[c] = p0[c] + w * (p1[c] - p0[c]);
}

std::vector<double> eval_at(const TimeSeries& ts, double t) {
  std::vector<double> out(ts.dim);
  eval_at_into(ts, t, out);
  return out;
}

namespace {

// Fills `buf` with the window's point list: X(a), samples in (a, b), X(b).
void window_points(const TimeSeries& ts, double a, double b,
                   std::vector<double>& buf) {
  const std::size_t d = ts.dim;
  const auto first = std::upper_bound(ts.times.begin(), ts.times.end(), a);
  const auto last = std::lower_bound(first, ts.times.end(), b);
  const std::size_t i0 = static_cast<std::size_t>(first - ts.times.begin());
  const std::size_t i1 = static_cast<std::size_t>(last - ts.times.begin());
  buf.resize((i1 - i0 + 2) * d);
  eval_at_into(ts, a, std::span<double>(buf).first(d));
  if (i1 > i0)
    std::memcpy(buf.data() + d, ts.values.data() + i0 * d, (i1 - i0) * d * sizeof(double));
  eval_at_into(ts, b, std::span<double>(buf).last(d));
}

void check_grid(const TimeSeries& ts, const WindowGrid& grid) {
  if (grid.num_windows() == 0) throw std::invalid_argument("window grid is empty");
  for (std::size_t k = 1; k < grid.boundaries.size(); ++k) {
    if (!(grid.boundaries[k] > grid.boundaries[k - 1]))
      throw std::invalid_argument("window grid boundaries must be strictly increasing");
  }
  const double t0 = ts.times.front();
  const double t1 = ts.times.back();
  const double tol = 1e-9 * std::max(1.0, std::abs(t1 - t0));
  if (grid.boundaries.front() < t0 - tol || grid.boundaries.back() > t1 + tol)
    throw std::invalid_argument("window grid [" + std::to_string(grid.boundaries.front()) +
                                ", " + std::to_string(grid.boundaries.back()) +
                                "] lies outside the series domain [" +
                                std::to_string(t0) + ", " + std::to_string(t1) + "]");
}

}  // namespace

TruncatedSignature window_signature(const TimeSeries& ts, double a, double b,
                                    std::size_t depth) {
  if (!(a < b)) throw std::invalid_argument("window_signature: need a < b");
  std::vector<double> buf;
  window_points(ts, a, b, buf);
  return sig_path(PathView{buf, ts.dim}, depth);
}

std::size_t feature_width(std::size_t dim, std::size_t depth, FeatureMode mode,
                          bool univariate, bool time_augment) {
  if (mode == FeatureMode::kRawTokens) return dim + 1;
  const std::size_t views = mode == FeatureMode::kMultiview ? 2 : 1;
  if (univariate) return views * dim * TruncatedSignature::feature_count(2, depth);
  const std::size_t d = time_augment ? dim + 1 : dim;
  return views * TruncatedSignature::feature_count(d, depth);
}

TimeSeries time_augmented(const TimeSeries& ts) {
  TimeSeries out;
  out.dim = ts.dim + 1;
  out.times = ts.times;
  out.target = ts.target;
  out.values.resize(ts.points() * out.dim);
  for (std::size_t i = 0; i < ts.points(); ++i) {
    double* dst = out.values.data() + i * out.dim;
    dst[0] = ts.times[i];
    auto p = ts.point(i);
    std::copy(p.begin(), p.end(), dst + 1);
  }
  return out;
}

FeatureMatrix multiview_transform(const TimeSeries& ts, const WindowGrid& grid,
                                  std::size_t depth, FeatureMode mode,
                                  bool time_augment) {
  if (depth < 1) throw std::invalid_argument("multiview_transform: depth must be >= 1");
  if (mode == FeatureMode::kRawTokens)
    throw std::invalid_argument("multiview_transform: raw mode is not a signature view");
  ts.validate();
  check_grid(ts, grid);

  const TimeSeries augmented = time_augment ? time_augmented(ts) : TimeSeries{};
  const TimeSeries& path = time_augment ? augmented : ts;
  const std::size_t block = TruncatedSignature::feature_count(path.dim, depth);

  FeatureMatrix out;
  out.rows = grid.num_windows();
  out.cols = feature_width(ts.dim, depth, mode, false, time_augment);
  out.data.assign(out.rows * out.cols, 0.0);
  out.meta = FeatureMeta{mode, depth, false, time_augment};

  TruncatedSignature global(path.dim, depth);
  TruncatedSignature next(path.dim, depth);
  std::vector<double> buf;
  for (std::size_t k = 0; k < out.rows; ++k) {
    window_points(path, grid.boundaries[k], grid.boundaries[k + 1], buf);
    const TruncatedSignature local = sig_path(PathView{buf, path.dim}, depth);
    double* row = out.data.data() + k * out.cols;
    if (mode != FeatureMode::kLocal) {
      chen_product_into(global, local, next);
      std::swap(global, next);
      std::copy(global.flat().begin(), global.flat().end(), row);
    }
    if (mode != FeatureMode::kGlobal) {
      double* dst = mode == FeatureMode::kMultiview ? row + block : row;
      std::copy(local.flat().begin(), local.flat().end(), dst);
    }
  }
  return out;
}

FeatureMatrix univariate_transform(const TimeSeries& ts, const WindowGrid& grid,
                                   std::size_t depth, FeatureMode mode) {
  if (mode == FeatureMode::kRawTokens)
    throw std::invalid_argument("univariate_transform: raw mode is not a signature view");
  ts.validate();
  FeatureMatrix out;
  out.rows = grid.num_windows();
  out.cols = feature_width(ts.dim, depth, mode, true, true);
  out.data.assign(out.rows * out.cols, 0.0);
  out.meta = FeatureMeta{mode, depth, true, true};

  TimeSeries channel;
  channel.dim = 1;
  channel.times = ts.times;
  channel.values.resize(ts.points());
  std::size_t col0 = 0;
  for (std::size_t c = 0; c < ts.dim; ++c) {
    for (std::size_t i = 0; i < ts.points(); ++i) channel.values[i] = ts.values[i * ts.dim + c];
    const FeatureMatrix block = multiview_transform(channel, grid, depth, mode, true);
    for (std::size_t r = 0; r < out.rows; ++r)
      std::copy_n(block.data.data() + r * block.cols, block.cols,
                  out.data.data() + r * out.cols + col0);
    col0 += block.cols;
  }
  return out;
}

FeatureMatrix raw_tokens(const TimeSeries& ts) {
  ts.validate();
  FeatureMatrix out;
  out.rows = ts.points();
  out.cols = ts.dim + 1;
  out.meta = FeatureMeta{FeatureMode::kRawTokens, 0, false, true};
  const TimeSeries aug = time_augmented(ts);
  out.data = aug.values;
  return out;
}

FeatureMatrix compute_features(const TimeSeries& ts, const WindowGrid& grid,
                               const FeatureConfig& cfg) {
  if (cfg.mode == FeatureMode::kRawTokens) return raw_tokens(ts);
  if (cfg.univariate) return univariate_transform(ts, grid, cfg.depth, cfg.mode);
  return multiview_transform(ts, grid, cfg.depth, cfg.mode, cfg.time_augment);
}

std::vector<FeatureMatrix> compute_features_all(std::span<const TimeSeries> series,
                                                const WindowGrid& grid,
                                                const FeatureConfig& cfg,
                                                unsigned threads) {
  std::vector<FeatureMatrix> out(series.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, series.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < series.size(); ++i)
      out[i] = compute_features(series[i], grid, cfg);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (series.size() + threads - 1) / threads;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(series.size(), lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) out[i] = compute_features(series[i], grid, cfg);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

TimeSeries random_drop(const TimeSeries& ts, double keep_prob, std::uint64_t seed) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0))
    throw std::invalid_argument("random_drop: keep_prob must lie in (0, 1]");
  if (ts.points() < 3) throw std::invalid_argument("random_drop: need at least 3 points");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TimeSeries out;
  out.dim = ts.dim;
  out.target = ts.target;
  out.times.reserve(ts.points());
  out.values.reserve(ts.values.size());
  const std::size_t last = ts.points() - 1;
  for (std::size_t i = 0; i <= last; ++i) {
    const bool keep = i == 0 || i == last || u(rng) < keep_prob;
    if (!keep) continue;
    out.times.push_back(ts.times[i]);
    auto p = ts.point(i);
    out.values.insert(out.values.end(), p.begin(), p.end());
  }
  return out;
}

void Standardizer::fit(std::span<const FeatureMatrix> mats) {
  if (mats.empty()) throw std::invalid_argument("Standardizer::fit: no matrices");
  const std::size_t cols = mats.front().cols;
  std::vector<double> sum(cols, 0.0);
  std::size_t count = 0;
  for (const auto& m : mats) {
    if (m.cols != cols) throw std::invalid_argument("Standardizer::fit: column mismatch");
    for (std::size_t r = 0; r < m.rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) sum[c] += m.at(r, c);
    count += m.rows;
  }
  mean_.assign(cols, 0.0);
  for (std::size_t c = 0; c < cols; ++c) mean_[c] = sum[c] / static_cast<double>(count);
  std::vector<double> sq(cols, 0.0);
  for (const auto& m : mats)
    for (std::size_t r = 0; r < m.rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        const double dv = m.at(r, c) - mean_[c];
        sq[c] += dv * dv;
      }
  scale_.assign(cols, 1.0);
  for (std::size_t c = 0; c < cols; ++c) {
    const double sd = std::sqrt(sq[c] / static_cast<double>(count));
    scale_[c] = sd > 1e-12 ? sd : 1.0;
  }
}

void Standardizer::apply(FeatureMatrix& m) const {
  if (m.cols != mean_.size())
    throw std::invalid_argument("Standardizer::apply: column mismatch");
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c)
      m.at(r, c) = (m.at(r, c) - mean_[c]) / scale_[c];
}

void Standardizer::set(std::vector<double> mean, std::vector<double> scale) {
  if (mean.size() != scale.size())
    throw std::invalid_argument("Standardizer::set: size mismatch");
  mean_ = std::move(mean);
  scale_ = std::move(scale);
}

}  // namespace rformer
