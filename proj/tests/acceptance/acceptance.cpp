// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance --only 5   run a single criterion
//
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gradcheck.hpp"
#include "rformer/data.hpp"
#include "rformer/features.hpp"
#include "rformer/sigcore.hpp"
#include "rformer/simd/kernels.hpp"
#include "rformer/train.hpp"

using namespace rformer;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void progress(const std::string& s) {
  std::printf("  %s\n", s.c_str());
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------
// Criterion 1: signature identities on random piecewise-linear paths.

std::vector<double> random_path(std::mt19937_64& rng, std::size_t points, std::size_t dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> p(points * dim, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = (i >= dim ? p[i - dim] : 0.0) + g(rng);
  return p;
}

// Per-level error scaled by the size of the terms that make up the level:
// max(|b_k|, L^k / k!) with L the 1-variation.
double level_error(const TruncatedSignature& a, const TruncatedSignature& b, double one_var) {
  double worst = 0.0, term = 1.0;
  for (std::size_t k = 1; k <= a.depth(); ++k) {
    term *= one_var / static_cast<double>(k);
    double diff = 0.0, mag = 0.0;
    for (std::size_t i = 0; i < a.level(k).size(); ++i) {
      diff = std::max(diff, std::abs(a.level(k)[i] - b.level(k)[i]));
      mag = std::max(mag, std::abs(b.level(k)[i]));
    }
    const double scale = std::max(mag, term);
    if (scale > 0.0) worst = std::max(worst, diff / scale);
  }
  return worst;
}

Outcome criterion_signature_identities() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  const std::size_t paths = 240;
  double chen = 0.0, collinear = 0.0;
  std::size_t decay_failures = 0;
  for (std::size_t trial = 0; trial < paths; ++trial) {
    const std::size_t d = 1 + rng() % 4;
    const std::size_t n = 1 + rng() % 5;
    const std::size_t segs = 2 + rng() % 49;  // 2..50 segments
    const auto path = random_path(rng, segs + 1, d);
    const PathView full{path, d};
    const double l1 = one_variation(full);
    const auto whole = sig_path(full, n);

    const std::size_t cut = 1 + rng() % (segs - 1);
    const auto left = sig_path(PathView{std::span<const double>(path).first((cut + 1) * d), d}, n);
    const auto right = sig_path(PathView{std::span<const double>(path).subspan(cut * d), d}, n);
    chen = std::max(chen, level_error(chen_product(left, right), whole, l1));

    std::vector<double> refined;
    const std::size_t at = rng() % segs;
    const double lambda = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
    for (std::size_t i = 0; i <= segs; ++i) {
      for (std::size_t c = 0; c < d; ++c) refined.push_back(path[i * d + c]);
      if (i == at)
        for (std::size_t c = 0; c < d; ++c)
          refined.push_back(path[i * d + c] + lambda * (path[(i + 1) * d + c] - path[i * d + c]));
    }
    collinear = std::max(collinear, level_error(sig_path(PathView{refined, d}, n), whole, l1));

    // |S_k| <= L^k / k! at every level, checked here independently of decay_bound.
    double bound = 1.0;
    for (std::size_t k = 1; k <= n; ++k) {
      bound *= l1 / static_cast<double>(k);
      for (double v : whole.level(k))
        if (std::abs(v) > bound * (1.0 + 1e-12)) ++decay_failures;
    }
    if (!decay_bound(whole, l1)) ++decay_failures;
  }
  const double secs = since(t0);
  const bool ok = chen <= 1e-12 && collinear <= 1e-12 && decay_failures == 0 && secs <= 10.0;
  return {ok, fmt("%zu paths, chen max rel err %.2e, collinear %.2e, decay violations %zu, %.2f s",
                  paths, chen, collinear, decay_failures, secs)};
}

// ---------------------------------------------------------------------------
// Criterion 2: level-2 signature against midpoint quadrature.

double quadrature_error(const std::vector<std::vector<double>>& pts, std::size_t substeps) {
  const std::size_t d = pts[0].size();
  std::vector<double> s(d * d, 0.0);
  for (std::size_t seg = 0; seg + 1 < pts.size(); ++seg)
    for (std::size_t q = 0; q < substeps; ++q) {
      const double a = static_cast<double>(q) / substeps, b = static_cast<double>(q + 1) / substeps;
      for (std::size_t i = 0; i < d; ++i) {
        const double dxi = pts[seg + 1][i] - pts[seg][i];
        const double mid = pts[seg][i] + 0.5 * (a + b) * dxi - pts[0][i];
        for (std::size_t j = 0; j < d; ++j) s[i * d + j] += mid * (b - a) * (pts[seg + 1][j] - pts[seg][j]);
      }
    }
  const auto sig = sig_path(pts, 2);
  double err = 0.0;
  for (std::size_t i = 0; i < d * d; ++i) err = std::max(err, std::abs(sig.level(2)[i] - s[i]));
  return err;
}

Outcome criterion_quadrature() {
  // Corner path (0,0) -> (1,0) -> (1,1): S11 = 1/2, S12 = 1, S21 = 0, S22 = 1/2.
  const std::vector<std::vector<double>> corner{{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}};
  const auto s = sig_path(corner, 2);
  const double closed = std::max({std::abs(s.level(2)[0] - 0.5), std::abs(s.level(2)[1] - 1.0),
                                  std::abs(s.level(2)[2]), std::abs(s.level(2)[3] - 0.5)});
  double quad = quadrature_error(corner, 1000);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (int t = 0; t < 20; ++t) {
    std::vector<std::vector<double>> pts(3 + t % 8, std::vector<double>(2));
    for (auto& p : pts) p = {g(rng), g(rng)};
    quad = std::max(quad, quadrature_error(pts, 200));
  }
  return {closed <= 1e-8 && quad <= 1e-8,
          fmt("corner path closed-form err %.1e, quadrature max err %.1e", closed, quad)};
}

// ---------------------------------------------------------------------------
// Criterion 3: feature widths, exact integer equality.

std::size_t geometric(std::size_t d, std::size_t n) {
  if (d == 1) return n;
  std::size_t p = 1;
  for (std::size_t k = 0; k < n; ++k) p *= d;
  return d * (p - 1) / (d - 1);
}

Outcome criterion_widths() {
  std::mt19937_64 rng(3);
  std::size_t checked = 0, wrong = 0;
  const auto grid = make_grid(0.0, 1.0, 3);
  for (std::size_t d = 1; d <= 6; ++d)
    for (std::size_t n = 1; n <= 4; ++n) {
      TimeSeries ts;
      ts.dim = d;
      for (int i = 0; i < 8; ++i) ts.times.push_back(i / 7.0);
      ts.values.resize(8 * d);
      for (auto& v : ts.values) v = std::normal_distribution<double>()(rng);
      const std::size_t multi = geometric(d, n), uni = 2 * ((std::size_t{1} << n) - 1);
      const std::pair<FeatureMode, std::size_t> views[] = {
          {FeatureMode::kLocal, 1}, {FeatureMode::kGlobal, 1}, {FeatureMode::kMultiview, 2}};
      for (const auto& [mode, v] : views) {
        const auto m = multiview_transform(ts, grid, n, mode, false);
        const auto u = univariate_transform(ts, grid, n, mode);
        wrong += m.cols != v * multi;
        wrong += u.cols != v * d * uni;
        wrong += feature_width(d, n, mode, false, false) != v * multi;
        wrong += feature_width(d, n, mode, true, true) != v * d * uni;
        wrong += TruncatedSignature::feature_count(d, n) != multi;
        checked += 5;
      }
    }
  return {wrong == 0, fmt("%zu width checks over d<=6, n<=4, %zu mismatches", checked, wrong)};
}

// ---------------------------------------------------------------------------
// Criterion 4: central finite differences on every tensor.

Outcome criterion_gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  std::size_t tensors = 0;
  for (auto task : {Task::kClassify, Task::kRegress})
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      std::mt19937_64 rng(seed * 7919);
      ModelConfig cfg;
      cfg.input_dim = 5;
      cfg.model_dim = 8;
      cfg.ff_dim = 16;
      cfg.output_dim = task == Task::kClassify ? 4 : 2;
      cfg.num_layers = 2;
      cfg.task = task;
      ModelParams p(cfg);
      p.init(seed);
      std::normal_distribution<double> g(0.0, 0.1);
      for (auto& t : p.tensors())
        if (t.shape.size() == 1)
          for (auto& v : t.value) v += g(rng);
      p.bump_version();
      FeatureMatrix x;
      x.rows = 12;
      x.cols = 5;
      for (int i = 0; i < 60; ++i) x.data.push_back(std::normal_distribution<double>()(rng));
      Target y;
      if (task == Task::kClassify)
        y = static_cast<int>(seed % 4);
      else
        y = std::vector<double>{std::normal_distribution<double>()(rng), std::normal_distribution<double>()(rng)};
      for (const auto& e : testutil::gradient_check(x, p, y, 1e-5)) {
        ++tensors;
        if (e.rel_error > worst) {
          worst = e.rel_error;
          worst_name = e.name;
        }
      }
    }
  const double secs = since(t0);
  return {worst <= 1e-4 && secs <= 60.0,
          fmt("%zu tensor checks (5 seeds x 2 heads), worst rel err %.2e (%s), %.1f s", tensors, worst,
              worst_name.c_str(), secs)};
}

// ---------------------------------------------------------------------------
// Shared settings for the learning criteria.

constexpr std::size_t kModelDim = 8;
constexpr std::size_t kEpochs = 500;

SinusoidConfig frequency_task(std::uint64_t seed) {
  SinusoidConfig sc;
  sc.num_classes = 20;
  sc.samples_per_class = 20;
  sc.length = 500;
  sc.seed = seed;
  return sc;
}

TrainConfig learning_config(FeatureMode mode, std::uint64_t seed) {
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.epochs = kEpochs;
  tc.seed = seed;
  tc.model_dim = kModelDim;
  tc.val_every = 0;  // the criteria score the test split themselves
  tc.features.mode = mode;
  tc.features.depth = 2;
  tc.features.num_windows = 40;
  tc.features.time_augment = true;
  return tc;
}

struct Curve {
  std::vector<std::pair<std::size_t, double>> checkpoints;  // (epoch, test accuracy)
  double final_acc = 0.0;
  double final_drop_acc = 0.0;
  double seconds = 0.0;
};

constexpr std::uint64_t kEvalDropSeed = 0xACCE55;

Curve run_curve(const Dataset& ds, const TrainConfig& tc, const std::string& label,
                std::size_t every = 100) {
  Curve c;
  const auto t0 = Clock::now();
  const auto hook = [&](const EpochRecord& r, const TrainedModel& m) {
    if (r.epoch % every != 0 && r.epoch != tc.epochs) return;
    const double acc = evaluate(ds, ds.splits.test, m).accuracy;
    c.checkpoints.emplace_back(r.epoch, acc);
    progress(fmt("%-22s epoch %4zu  train loss %.4f  test acc %.3f  (%.0f s)", label.c_str(), r.epoch,
                 r.train_loss, acc, since(t0)));
  };
  const auto res = train(ds, tc, hook);
  c.final_acc = evaluate(ds, ds.splits.test, res.model).accuracy;
  c.final_drop_acc = evaluate(ds, ds.splits.test, res.model, {0.5, kEvalDropSeed}).accuracy;
  c.seconds = since(t0);
  return c;
}

// ---------------------------------------------------------------------------
// Criterion 5: frequency classification, RFormer vs raw-token attention.

Outcome criterion_frequency() {
  const auto t0 = Clock::now();
  const Dataset ds = gen_sinusoidal(frequency_task(0));
  const auto sig = run_curve(ds, learning_config(FeatureMode::kMultiview, 0), "rformer");
  const auto raw = run_curve(ds, learning_config(FeatureMode::kRawTokens, 0), "raw-token baseline");
  bool dominated = true;
  double best = 0.0;
  std::string table;
  for (std::size_t i = 0; i < sig.checkpoints.size(); ++i) {
    const auto [epoch, a] = sig.checkpoints[i];
    const double b = raw.checkpoints.at(i).second;
    best = std::max(best, a);
    if (epoch % 100 == 0) {
      dominated = dominated && a >= b;
      table += fmt(" %zu:%.2f/%.2f", epoch, a, b);
    }
  }
  const double secs = since(t0);
  return {best >= 0.90 && dominated && secs <= 15 * 60,
          fmt("best %.3f within %zu epochs; epoch:rformer/baseline%s; %.0f s", best, kEpochs,
              table.c_str(), secs)};
}

// ---------------------------------------------------------------------------
// Criterion 6: 50% point dropping every epoch.

Outcome criterion_drop() {
  const auto t0 = Clock::now();
  const Dataset ds = gen_sinusoidal(frequency_task(0));
  auto full_cfg = learning_config(FeatureMode::kMultiview, 0);
  auto drop_cfg = full_cfg;
  drop_cfg.drop_prob = 0.5;
  drop_cfg.schedule = FeatureSchedule::kOnline;
  auto raw_cfg = learning_config(FeatureMode::kRawTokens, 0);
  raw_cfg.drop_prob = 0.5;
  raw_cfg.schedule = FeatureSchedule::kOnline;

  const auto full = run_curve(ds, full_cfg, "rformer full", kEpochs);
  const auto drop = run_curve(ds, drop_cfg, "rformer dropped", kEpochs);
  const auto raw = run_curve(ds, raw_cfg, "baseline dropped", kEpochs);
  // Dropped runs are scored on test series with 50% of their points dropped.
  const double degradation = full.final_acc - drop.final_drop_acc;
  const double margin = drop.final_drop_acc - raw.final_drop_acc;
  const double secs = since(t0);
  return {degradation <= 0.20 && margin >= 0.20 && secs <= 20 * 60,
          fmt("rformer full %.3f, dropped %.3f (degradation %.1f pp); baseline dropped %.3f "
              "(margin %.1f pp); on full test data: rformer dropped %.3f, baseline dropped %.3f; %.0f s",
              full.final_acc, drop.final_drop_acc, 100 * degradation, raw.final_drop_acc, 100 * margin,
              drop.final_acc, raw.final_acc, secs)};
}

// ---------------------------------------------------------------------------
// Criterion 7: view ablation on the long sinusoid task.

Outcome criterion_ablation() {
  const auto t0 = Clock::now();
  constexpr std::uint64_t kSeeds = 3;
  const FeatureMode modes[3] = {FeatureMode::kMultiview, FeatureMode::kLocal, FeatureMode::kGlobal};
  double acc[3] = {};
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const Dataset ds = gen_long_sinusoidal(frequency_task(seed), 0.1);
    per_seed += fmt(" seed %llu:", static_cast<unsigned long long>(seed));
    for (int i = 0; i < 3; ++i) {
      const double a =
          run_curve(ds, learning_config(modes[i], seed), std::string(to_string(modes[i])), kEpochs).final_acc;
      acc[i] += a / kSeeds;
      per_seed += fmt(" %.2f", a);
    }
  }
  const double secs = since(t0);
  return {acc[0] >= acc[1] && acc[0] >= acc[2] - 0.02 && secs <= 30 * 60,
          fmt("mean final test acc over %llu seeds multiview %.3f, local %.3f, global %.3f (m/l/g%s); %.0f s",
              static_cast<unsigned long long>(kSeeds), acc[0], acc[1], acc[2], per_seed.c_str(), secs)};
}

// ---------------------------------------------------------------------------
// Criterion 8: epoch time against input length at fixed window count.

Outcome criterion_scaling() {
  const auto t0 = Clock::now();
  BenchConfig bc;
  bc.num_classes = 10;
  bc.samples_per_class = 10;
  bc.warmup_epochs = 1;
  bc.timed_epochs = 5;
  bc.train = learning_config(FeatureMode::kMultiview, 0);
  const std::vector<std::size_t> lengths{1000, 5000, 20000};
  const auto rows = bench_epoch_time(lengths, bc);
  bool increasing = true, same_macs = true;
  std::string table;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) {
      increasing = increasing && rows[i].online_seconds_per_epoch > rows[i - 1].online_seconds_per_epoch;
      same_macs = same_macs && rows[i].attention_macs_per_epoch == rows[0].attention_macs_per_epoch;
    }
    table += fmt(" L=%zu: off %.4f on %.4f;", rows[i].length, rows[i].offline_seconds_per_epoch,
                 rows[i].online_seconds_per_epoch);
  }
  const double ratio = rows.back().offline_seconds_per_epoch / rows.front().offline_seconds_per_epoch;
  const double secs = since(t0);
  return {ratio <= 2.0 && increasing && same_macs && secs <= 10 * 60,
          fmt("s/epoch%s offline ratio 20000/1000 = %.2f, attention MACs/epoch %llu at every L; %.0f s",
              table.c_str(), ratio, static_cast<unsigned long long>(rows.front().attention_macs_per_epoch),
              secs)};
}

// ---------------------------------------------------------------------------
// Criterion 9: two-channel equality task.

constexpr std::size_t kSpatialEpochs = 200;

Outcome criterion_spatial() {
  const auto t0 = Clock::now();
  SpatialConfig sc;
  sc.num_samples = 700;
  sc.length = 500;
  sc.fractions = {5.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0};
  const Dataset ds = gen_spatial_pair(sc);
  auto sig_cfg = learning_config(FeatureMode::kMultiview, 0);
  sig_cfg.epochs = kSpatialEpochs;
  auto raw_cfg = learning_config(FeatureMode::kRawTokens, 0);
  raw_cfg.epochs = kSpatialEpochs;
  const auto sig = run_curve(ds, sig_cfg, "rformer", 50);
  const auto raw = run_curve(ds, raw_cfg, "raw-token baseline", 50);
  const double secs = since(t0);
  return {sig.final_acc >= 0.85 && sig.final_acc >= raw.final_acc + 0.15 && secs <= 15 * 60,
          fmt("%zu train samples, %zu epochs: rformer %.3f, baseline %.3f; %.0f s", ds.splits.train.size(),
              kSpatialEpochs, sig.final_acc, raw.final_acc, secs)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  int only = 0;
  app.add_option("--only", only, "run a single criterion (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"signature identities on random paths", criterion_signature_identities},
      {"level-2 signature vs quadrature", criterion_quadrature},
      {"feature width formulas", criterion_widths},
      {"finite-difference gradients", criterion_gradients},
      {"frequency classification vs raw tokens", criterion_frequency},
      {"robustness to 50% point drop", criterion_drop},
      {"view ablation on long sinusoids", criterion_ablation},
      {"epoch time vs input length", criterion_scaling},
      {"two-channel equality task", criterion_spatial},
  };
  std::printf("kernels: %s\n", simd::active().name);
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<std::size_t>(only) != i + 1) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %zu (%s): %s  %s\n", i + 1, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
