#pragma once
// Deterministic training and evaluation.
//
// All randomness derives from TrainConfig::seed: parameter init, per-epoch
// shuffles, and per-(epoch, sample) drop masks. Gradients within a batch are
// accumulated sequentially in sample-index order.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "rformer/data.hpp"
#include "rformer/features.hpp"
#include "rformer/net.hpp"

namespace rformer {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

// Bias-corrected Adam on one tensor; `step` is the 1-based step number.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::uint64_t step, double lr, const AdamConfig& cfg);

// One step over every tensor in `params`, using their gradient buffers.
void adam_step(ModelParams& params, AdamState& state, double lr, const AdamConfig& cfg);

enum class FeatureSchedule { kOffline, kOnline };

std::string_view to_string(FeatureSchedule s);
FeatureSchedule parse_feature_schedule(std::string_view name);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  AdamConfig adam;
  double drop_prob = 0.0;  // probability of removing each interior point
  FeatureConfig features;
  FeatureSchedule schedule = FeatureSchedule::kOffline;
  bool standardize = true;
  std::size_t patience = 0;  // early stopping on val loss; 0 disables
  std::size_t val_every = 1;  // validate every k epochs (and the last); 0 never
  std::size_t model_dim = 32;
  std::size_t ff_dim = 0;
  std::size_t num_layers = 1;
  bool positional_encoding = true;
  unsigned threads = 1;  // feature transform fan-out

  // Throws std::invalid_argument on invalid values.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;    // NaN on epochs without validation
  double val_metric = 0.0;  // accuracy in [0, 1] or RMSE
  double seconds = 0.0;          // training pass, including online features
  double feature_seconds = 0.0;  // online feature recomputation share
  std::uint64_t attention_macs = 0;
};

nlohmann::json to_json(const EpochRecord& r);

// Everything needed to run inference on raw series.
struct TrainedModel {
  ModelParams params;
  Standardizer standardizer;
  WindowGrid grid;
  FeatureConfig features;
  bool standardize = true;

  FeatureMatrix featurize(const TimeSeries& ts) const;
};

struct TrainResult {
  TrainedModel model;
  AdamState optimizer;
  std::vector<EpochRecord> records;
  double feature_seconds = 0.0;  // one-off transform of the whole dataset
};

// Raised when a loss turns non-finite; carries the model as it was after the
// last completed epoch.
struct TrainingDiverged : std::runtime_error {
  TrainingDiverged(const std::string& what, TrainedModel last_good, std::size_t epoch)
      : std::runtime_error(what), last_good(std::move(last_good)), epoch(epoch) {}
  TrainedModel last_good;
  std::size_t epoch;
};

using EpochHook = std::function<void(const EpochRecord&, const TrainedModel&)>;

// Grid shared by all samples: uniform over [max start time, min end time].
WindowGrid dataset_grid(const Dataset& ds, std::size_t num_windows);

TrainResult train(const Dataset& ds, const TrainConfig& cfg, const EpochHook& hook = {});

struct EvalOptions {
  double drop_prob = 0.0;  // eval-time dropping, for robustness measurement
  std::uint64_t seed = 0;
};

struct MetricReport {
  std::size_t count = 0;
  double mean_loss = 0.0;
  double accuracy = 0.0;  // classification
  double rmse = 0.0;      // regression
  double metric() const;  // accuracy or rmse
  Task task = Task::kClassify;
};

nlohmann::json to_json(const MetricReport& r);

MetricReport evaluate(const Dataset& ds, std::span<const std::size_t> indices,
                      const TrainedModel& model, const EvalOptions& opts = {});

// Evaluates already-featurized inputs.
MetricReport evaluate_features(std::span<const FeatureMatrix> features,
                               std::span<const Target> targets, const ModelParams& params);

struct BenchConfig {
  std::size_t num_classes = 10;
  std::size_t samples_per_class = 10;
  std::size_t warmup_epochs = 1;
  std::size_t timed_epochs = 5;
  TrainConfig train;  // features, model size, batch size
};

struct BenchRow {
  std::size_t length = 0;
  double offline_seconds_per_epoch = 0.0;
  double online_seconds_per_epoch = 0.0;
  double precompute_seconds = 0.0;
  std::uint64_t attention_macs_per_epoch = 0;
};

nlohmann::json to_json(const BenchRow& r);

std::vector<BenchRow> bench_epoch_time(std::span<const std::size_t> lengths,
                                       const BenchConfig& cfg);

}  // namespace rformer
