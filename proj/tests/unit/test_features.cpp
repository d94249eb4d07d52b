#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "rformer/features.hpp"
#include "test_util.hpp"

using rformer::FeatureMode;
using rformer::TimeSeries;

namespace {

// Signature over [a, b] built from scratch: the interpolated endpoints and
// the samples strictly inside, passed straight to sig_path.
rformer::TruncatedSignature oracle_window(const TimeSeries& ts, double a, double b,
                                          std::size_t depth) {
  std::vector<std::vector<double>> pts;
  pts.push_back(rformer::eval_at(ts, a));
  for (std::size_t i = 0; i < ts.points(); ++i)
    if (ts.times[i] > a && ts.times[i] < b) {
      auto p = ts.point(i);
      pts.emplace_back(p.begin(), p.end());
    }
  pts.push_back(rformer::eval_at(ts, b));
  return rformer::sig_path(pts, depth);
}

double max_row_diff(const rformer::FeatureMatrix& m, std::size_t r, std::size_t c0,
                    std::span<const double> ref) {
  double worst = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(m.at(r, c0 + i) - ref[i]));
  return worst;
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("feature widths follow the view and augmentation rules") {
    for (std::size_t d = 1; d <= 6; ++d)
      for (std::size_t n = 1; n <= 4; ++n) {
        const auto fc = [](std::size_t dd, std::size_t nn) {
          std::size_t s = 0, p = 1;
          for (std::size_t k = 1; k <= nn; ++k) s += (p *= dd);
          return s;
        };
        CHECK(rformer::feature_width(d, n, FeatureMode::kLocal, false, false) == fc(d, n));
        CHECK(rformer::feature_width(d, n, FeatureMode::kGlobal, false, true) == fc(d + 1, n));
        CHECK(rformer::feature_width(d, n, FeatureMode::kMultiview, false, false) == 2 * fc(d, n));
        CHECK(rformer::feature_width(d, n, FeatureMode::kMultiview, true, true) == 2 * d * fc(2, n));
        CHECK(rformer::feature_width(d, n, FeatureMode::kRawTokens, false, true) == d + 1);
      }
    // Worked example: d=1 time-augmented at depth 2 gives 6 per view.
    CHECK(rformer::feature_width(1, 2, FeatureMode::kMultiview, false, true) == 12);
  }

  TEST_CASE("grid is uniform and pinned to the domain ends") {
    const auto g = rformer::make_grid(1.0, 4.0, 3);
    REQUIRE(g.num_windows() == 3);
    CHECK(g.boundaries[0] == 1.0);
    CHECK(g.boundaries[1] == doctest::Approx(2.0));
    CHECK(g.boundaries[3] == 4.0);
    CHECK_THROWS_AS(rformer::make_grid(1.0, 1.0, 3), std::invalid_argument);
    CHECK_THROWS_AS(rformer::make_grid(0.0, 1.0, 0), std::invalid_argument);
  }

  TEST_CASE("linear interpolation and clamping") {
    TimeSeries ts;
    ts.dim = 2;
    ts.times = {0.0, 1.0, 3.0};
    ts.values = {0.0, 10.0, 2.0, 10.0, 6.0, 0.0};
    CHECK(rformer::eval_at(ts, -1.0) == std::vector<double>{0.0, 10.0});
    CHECK(rformer::eval_at(ts, 0.5) == std::vector<double>{1.0, 10.0});
    CHECK(rformer::eval_at(ts, 2.0) == std::vector<double>{4.0, 5.0});
    CHECK(rformer::eval_at(ts, 1.0) == std::vector<double>{2.0, 10.0});
    CHECK(rformer::eval_at(ts, 9.0) == std::vector<double>{6.0, 0.0});
  }

  TEST_CASE("local and global rows match window signatures built independently") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t d = 1 + trial % 3, depth = 1 + trial % 3;
      const auto ts = testutil::random_series(rng, 30 + trial * 7, d, 0.0, 2.0);
      const auto grid = rformer::make_grid(0.0, 2.0, 5 + trial);
      for (bool aug : {false, true}) {
        const auto m = rformer::multiview_transform(ts, grid, depth, FeatureMode::kMultiview, aug);
        const TimeSeries path = aug ? rformer::time_augmented(ts) : ts;
        const std::size_t block = rformer::TruncatedSignature::feature_count(path.dim, depth);
        REQUIRE(m.cols == 2 * block);
        REQUIRE(m.rows == grid.num_windows());
        for (std::size_t k = 0; k < m.rows; ++k) {
          const auto g = oracle_window(path, grid.boundaries[0], grid.boundaries[k + 1], depth);
          const auto l = oracle_window(path, grid.boundaries[k], grid.boundaries[k + 1], depth);
          CHECK(max_row_diff(m, k, 0, g.flat()) < 1e-10 * (1.0 + testutil::max_abs(g.flat())));
          CHECK(max_row_diff(m, k, block, l.flat()) < 1e-12 * (1.0 + testutil::max_abs(l.flat())));
        }
      }
    }
  }

  TEST_CASE("multiview is the concatenation of global and local") {
    std::mt19937_64 rng(32);
    const auto ts = testutil::random_series(rng, 50, 2);
    const auto grid = rformer::make_grid(0.0, 1.0, 8);
    const auto mv = rformer::multiview_transform(ts, grid, 3, FeatureMode::kMultiview, true);
    const auto gl = rformer::multiview_transform(ts, grid, 3, FeatureMode::kGlobal, true);
    const auto lo = rformer::multiview_transform(ts, grid, 3, FeatureMode::kLocal, true);
    REQUIRE(mv.cols == gl.cols + lo.cols);
    for (std::size_t r = 0; r < mv.rows; ++r) {
      CHECK(max_row_diff(mv, r, 0, gl.row(r)) == 0.0);
      CHECK(max_row_diff(mv, r, gl.cols, lo.row(r)) == 0.0);
    }
  }

  TEST_CASE("last global row is the signature of the whole series") {
    std::mt19937_64 rng(33);
    const auto ts = testutil::random_series(rng, 40, 3);
    const auto grid = rformer::make_grid(0.0, 1.0, 6);
    const auto g = rformer::multiview_transform(ts, grid, 3, FeatureMode::kGlobal, false);
    const auto whole = rformer::sig_path(ts.path(), 3);
    CHECK(max_row_diff(g, g.rows - 1, 0, whole.flat()) < 1e-12);
  }

  TEST_CASE("univariate transform on one channel equals the time-augmented multivariate one") {
    std::mt19937_64 rng(34);
    const auto ts = testutil::random_series(rng, 60, 1);
    const auto grid = rformer::make_grid(0.0, 1.0, 10);
    for (auto mode : {FeatureMode::kLocal, FeatureMode::kGlobal, FeatureMode::kMultiview}) {
      const auto u = rformer::univariate_transform(ts, grid, 3, mode);
      const auto m = rformer::multiview_transform(ts, grid, 3, mode, true);
      REQUIRE(u.cols == m.cols);
      CHECK(testutil::max_abs_diff(u.data, m.data) == 0.0);
    }
  }

  TEST_CASE("univariate channel blocks are per-channel transforms") {
    std::mt19937_64 rng(35);
    const auto ts = testutil::random_series(rng, 25, 3);
    const auto grid = rformer::make_grid(0.0, 1.0, 4);
    const auto u = rformer::univariate_transform(ts, grid, 2, FeatureMode::kMultiview);
    const std::size_t per = u.cols / 3;
    for (std::size_t c = 0; c < 3; ++c) {
      TimeSeries ch;
      ch.dim = 1;
      ch.times = ts.times;
      for (std::size_t i = 0; i < ts.points(); ++i) ch.values.push_back(ts.point(i)[c]);
      const auto m = rformer::multiview_transform(ch, grid, 2, FeatureMode::kMultiview, true);
      for (std::size_t r = 0; r < u.rows; ++r) CHECK(max_row_diff(u, r, c * per, m.row(r)) == 0.0);
    }
  }

  TEST_CASE("raw tokens carry time in column 0") {
    TimeSeries ts;
    ts.dim = 2;
    ts.times = {0.0, 0.5, 1.0};
    ts.values = {1, 2, 3, 4, 5, 6};
    const auto m = rformer::raw_tokens(ts);
    CHECK(m.rows == 3);
    CHECK(m.cols == 3);
    CHECK(m.data == std::vector<double>{0.0, 1, 2, 0.5, 3, 4, 1.0, 5, 6});
  }

  TEST_CASE("window count is independent of series length") {
    std::mt19937_64 rng(36);
    const auto grid = rformer::make_grid(0.0, 1.0, 40);
    for (std::size_t n : {10u, 500u, 5000u}) {
      const auto m = rformer::multiview_transform(testutil::random_series(rng, n, 1), grid, 2,
                                                  FeatureMode::kMultiview, true);
      CHECK(m.rows == 40);
      CHECK(m.cols == 12);
    }
  }

  TEST_CASE("windows with no interior samples still get a signature") {
    TimeSeries ts;
    ts.dim = 1;
    ts.times = {0.0, 1.0};
    ts.values = {0.0, 4.0};
    const auto grid = rformer::make_grid(0.0, 1.0, 4);
    const auto m = rformer::multiview_transform(ts, grid, 2, FeatureMode::kLocal, false);
    for (std::size_t r = 0; r < 4; ++r) {
      CHECK(m.at(r, 0) == doctest::Approx(1.0));
      CHECK(m.at(r, 1) == doctest::Approx(0.5));
    }
  }

  TEST_CASE("bad inputs are rejected with a message") {
    TimeSeries ts;
    ts.dim = 1;
    ts.times = {0.0, 0.0, 1.0};
    ts.values = {0.0, 1.0, 2.0};
    const auto grid = rformer::make_grid(0.0, 1.0, 2);
    CHECK_THROWS_AS(rformer::multiview_transform(ts, grid, 2, FeatureMode::kLocal, false),
                    std::invalid_argument);
    ts.times = {0.0, 0.5, 1.0};
    ts.values[1] = std::nan("");
    CHECK_THROWS_AS(rformer::multiview_transform(ts, grid, 2, FeatureMode::kLocal, false),
                    std::invalid_argument);
    ts.values[1] = 1.0;
    const auto wide = rformer::make_grid(-1.0, 1.0, 2);
    CHECK_THROWS_AS(rformer::multiview_transform(ts, wide, 2, FeatureMode::kLocal, false),
                    std::invalid_argument);
    CHECK_THROWS_AS(rformer::multiview_transform(ts, grid, 2, FeatureMode::kRawTokens, false),
                    std::invalid_argument);
    CHECK_THROWS_AS(rformer::parse_feature_mode("both"), std::invalid_argument);
    CHECK(rformer::parse_feature_mode("multiview") == FeatureMode::kMultiview);
  }

  TEST_CASE("random drop keeps endpoints and is deterministic per seed") {
    std::mt19937_64 rng(37);
    const auto ts = testutil::random_series(rng, 200, 2);
    const auto a = rformer::random_drop(ts, 0.5, 99);
    const auto b = rformer::random_drop(ts, 0.5, 99);
    const auto c = rformer::random_drop(ts, 0.5, 100);
    CHECK(a.times == b.times);
    CHECK(a.values == b.values);
    CHECK(a.times != c.times);
    CHECK(a.times.front() == ts.times.front());
    CHECK(a.times.back() == ts.times.back());
    CHECK_NOTHROW(a.validate());
    // Kept points are a subsequence with their original values.
    std::size_t j = 0;
    for (std::size_t i = 0; i < a.points(); ++i) {
      while (ts.times[j] != a.times[i]) ++j;
      CHECK(ts.point(j)[0] == a.point(i)[0]);
      CHECK(ts.point(j)[1] == a.point(i)[1]);
    }
    CHECK(rformer::random_drop(ts, 1.0, 5).times == ts.times);
  }

  TEST_CASE("random drop keep count is binomial within three sigma") {
    std::mt19937_64 rng(38);
    const auto ts = testutil::random_series(rng, 1002, 1);
    const std::size_t interior = 1000;
    for (double p : {0.2, 0.5, 0.9}) {
      double total = 0.0;
      const int reps = 200;
      for (int s = 0; s < reps; ++s)
        total += static_cast<double>(rformer::random_drop(ts, p, 1000 + s).points() - 2);
      const double mean = total / reps;
      const double sigma = std::sqrt(interior * p * (1 - p) / reps);
      CHECK(std::abs(mean - interior * p) <= 3.0 * sigma);
    }
    CHECK_THROWS_AS(rformer::random_drop(ts, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(rformer::random_drop(ts, 1.5, 1), std::invalid_argument);
  }

  TEST_CASE("standardizer gives zero mean unit variance on the fit set") {
    std::mt19937_64 rng(39);
    std::vector<rformer::FeatureMatrix> mats(5);
    for (auto& m : mats) {
      m.rows = 7;
      m.cols = 4;
      m.data = testutil::random_vector(rng, 28, 3.0);
      for (std::size_t r = 0; r < m.rows; ++r) {
        m.at(r, 1) += 10.0;
        m.at(r, 3) = 2.5;  // constant column keeps scale 1
      }
    }
    rformer::Standardizer st;
    st.fit(mats);
    CHECK(st.scale()[3] == 1.0);
    for (auto& m : mats) st.apply(m);
    for (std::size_t c = 0; c < 4; ++c) {
      double s = 0.0, s2 = 0.0;
      for (const auto& m : mats)
        for (std::size_t r = 0; r < m.rows; ++r) {
          s += m.at(r, c);
          s2 += m.at(r, c) * m.at(r, c);
        }
      CHECK(s / 35.0 == doctest::Approx(0.0).scale(1.0));
      if (c != 3) CHECK(s2 / 35.0 == doctest::Approx(1.0));
    }
    rformer::FeatureMatrix wrong;
    wrong.cols = 3;
    CHECK_THROWS_AS(st.apply(wrong), std::invalid_argument);
  }

  TEST_CASE("batch transform is independent of the thread count") {
    std::mt19937_64 rng(40);
    std::vector<TimeSeries> series;
    for (int i = 0; i < 13; ++i) series.push_back(testutil::random_series(rng, 40 + i, 2));
    const auto grid = rformer::make_grid(0.0, 1.0, 6);
    rformer::FeatureConfig cfg;
    cfg.depth = 3;
    cfg.time_augment = true;
    const auto one = rformer::compute_features_all(series, grid, cfg, 1);
    for (unsigned t : {2u, 4u, 16u}) {
      const auto many = rformer::compute_features_all(series, grid, cfg, t);
      REQUIRE(many.size() == one.size());
      for (std::size_t i = 0; i < one.size(); ++i) CHECK(many[i].data == one[i].data);
    }
    series[7].times[3] = series[7].times[2];
    CHECK_THROWS_AS(rformer::compute_features_all(series, grid, cfg, 4), std::invalid_argument);
  }
}
