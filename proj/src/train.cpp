#include "rformer/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace rformer {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kShuffleStream = 0x5eed;
constexpr std::uint64_t kDropStream = 0xd409;

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::uint64_t step, double lr, const AdamConfig& cfg) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size())
    throw std::invalid_argument("adam_update: shape mismatch");
  if (step == 0) throw std::invalid_argument("adam_update: step numbers start at 1");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

void adam_step(ModelParams& params, AdamState& state, double lr, const AdamConfig& cfg) {
  auto& tensors = params.tensors();
  if (state.m.empty()) {
    for (const auto& p : tensors) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != tensors.size())
    throw std::invalid_argument("adam_step: optimizer state does not match parameters");
  ++state.step;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (state.m[i].size() != tensors[i].size())
      throw std::invalid_argument("adam_step: moment shape mismatch for " + tensors[i].name);
    adam_update(tensors[i].value, tensors[i].grad, state.m[i], state.v[i], state.step, lr, cfg);
  }
  params.bump_version();
}

std::string_view to_string(FeatureSchedule s) {
  return s == FeatureSchedule::kOffline ? "offline" : "online";
}

FeatureSchedule parse_feature_schedule(std::string_view name) {
  if (name == "offline") return FeatureSchedule::kOffline;
  if (name == "online") return FeatureSchedule::kOnline;
  throw std::invalid_argument("unknown feature mode '" + std::string(name) +
                              "' (expected online or offline)");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("learning rate must be finite and >= 0");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(drop_prob >= 0.0 && drop_prob < 1.0))
    throw std::invalid_argument("drop probability must lie in [0, 1)");
  if (features.mode != FeatureMode::kRawTokens && features.depth == 0)
    throw std::invalid_argument("signature depth must be >= 1");
  if (features.num_windows == 0) throw std::invalid_argument("number of windows must be >= 1");
  if (model_dim == 0) throw std::invalid_argument("model dim must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  if (!(adam.eps > 0.0)) throw std::invalid_argument("Adam eps must be positive");
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate},
          {"batch_size", cfg.batch_size},
          {"epochs", cfg.epochs},
          {"seed", cfg.seed},
          {"beta1", cfg.adam.beta1},
          {"beta2", cfg.adam.beta2},
          {"eps", cfg.adam.eps},
          {"drop_prob", cfg.drop_prob},
          {"mode", std::string(to_string(cfg.features.mode))},
          {"depth", cfg.features.depth},
          {"windows", cfg.features.num_windows},
          {"univariate", cfg.features.univariate},
          {"time_augment", cfg.features.time_augment},
          {"feature_mode", std::string(to_string(cfg.schedule))},
          {"standardize", cfg.standardize},
          {"patience", cfg.patience},
          {"val_every", cfg.val_every},
          {"model_dim", cfg.model_dim},
          {"ff_dim", cfg.ff_dim},
          {"num_layers", cfg.num_layers},
          {"positional_encoding", cfg.positional_encoding}};
}

namespace {
nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}
}  // namespace

nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"train_loss", r.train_loss},
          {"val_loss", finite_or_null(r.val_loss)},
          {"val_metric", finite_or_null(r.val_metric)},
          {"seconds", r.seconds},
          {"feature_seconds", r.feature_seconds},
          {"attention_macs", r.attention_macs}};
}

FeatureMatrix TrainedModel::featurize(const TimeSeries& ts) const {
  FeatureMatrix fm = compute_features(ts, grid, features);
  if (standardize) standardizer.apply(fm);
  return fm;
}

WindowGrid dataset_grid(const Dataset& ds, std::size_t num_windows) {
  if (ds.samples.empty()) throw std::invalid_argument("dataset_grid: empty dataset");
  double start = -std::numeric_limits<double>::infinity();
  double end = std::numeric_limits<double>::infinity();
  for (const auto& s : ds.samples) {
    start = std::max(start, s.start_time());
    end = std::min(end, s.end_time());
  }
  if (!(start < end))
    throw std::invalid_argument("dataset_grid: sample time domains do not overlap");
  return make_grid(start, end, num_windows);
}

double MetricReport::metric() const { return task == Task::kClassify ? accuracy : rmse; }

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j = {{"count", r.count}, {"mean_loss", r.mean_loss}};
  if (r.task == Task::kClassify)
    j["accuracy"] = r.accuracy;
  else
    j["rmse"] = r.rmse;
  return j;
}

MetricReport evaluate_features(std::span<const FeatureMatrix> features,
                               std::span<const Target> targets, const ModelParams& params) {
  if (features.size() != targets.size())
    throw std::invalid_argument("evaluate_features: feature/target count mismatch");
  MetricReport rep;
  rep.task = params.config().task;
  rep.count = features.size();
  if (features.empty()) return rep;
  ForwardCache cache;
  double loss_sum = 0.0, sq_sum = 0.0;
  std::size_t correct = 0, sq_count = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto out = model_forward(features[i], params, cache);
    const LossResult l = loss(out, targets[i], rep.task);
    loss_sum += l.value;
    if (rep.task == Task::kClassify) {
      if (static_cast<int>(argmax(out)) == std::get<int>(targets[i])) ++correct;
    } else {
      const auto& y = std::get<std::vector<double>>(targets[i]);
      for (std::size_t c = 0; c < y.size(); ++c) sq_sum += (out[c] - y[c]) * (out[c] - y[c]);
      sq_count += y.size();
    }
  }
  rep.mean_loss = loss_sum / static_cast<double>(features.size());
  if (rep.task == Task::kClassify)
    rep.accuracy = static_cast<double>(correct) / static_cast<double>(features.size());
  else
    rep.rmse = std::sqrt(sq_sum / static_cast<double>(sq_count));
  return rep;
}

MetricReport evaluate(const Dataset& ds, std::span<const std::size_t> indices,
                      const TrainedModel& model, const EvalOptions& opts) {
  if (ds.task != model.params.config().task)
    throw std::invalid_argument("evaluate: dataset task does not match the model task");
  if (!(opts.drop_prob >= 0.0 && opts.drop_prob < 1.0))
    throw std::invalid_argument("evaluate: drop probability must lie in [0, 1)");
  std::vector<FeatureMatrix> feats;
  std::vector<Target> targets;
  feats.reserve(indices.size());
  for (std::size_t idx : indices) {
    const TimeSeries& ts = ds.samples.at(idx);
    if (opts.drop_prob > 0.0 && ts.points() >= 3)
      feats.push_back(model.featurize(
          random_drop(ts, 1.0 - opts.drop_prob, derive_seed(opts.seed, kDropStream, idx))));
    else
      feats.push_back(model.featurize(ts));
    targets.push_back(ts.target);
  }
  return evaluate_features(feats, targets, model.params);
}

TrainResult train(const Dataset& ds, const TrainConfig& cfg, const EpochHook& hook) {
  cfg.validate();
  ds.validate();
  if (ds.splits.train.empty()) throw std::invalid_argument("train: empty training split");

  const WindowGrid grid = dataset_grid(ds, cfg.features.num_windows);
  const bool online = cfg.schedule == FeatureSchedule::kOnline || cfg.drop_prob > 0.0;

  auto gather = [&](const std::vector<std::size_t>& idx) {
    std::vector<TimeSeries> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(ds.samples[i]);
    return out;
  };
  const std::vector<TimeSeries> train_series = gather(ds.splits.train);
  const std::vector<TimeSeries> val_series = gather(ds.splits.val);
  std::vector<Target> val_targets;
  for (const auto& s : val_series) val_targets.push_back(s.target);

  ModelConfig mc;
  mc.input_dim = feature_width(ds.dim(), cfg.features.depth, cfg.features.mode,
                               cfg.features.univariate, cfg.features.time_augment);
  mc.model_dim = cfg.model_dim;
  mc.ff_dim = cfg.ff_dim;
  mc.output_dim = ds.num_outputs;
  mc.num_layers = cfg.num_layers;
  mc.positional_encoding = cfg.positional_encoding;
  mc.task = ds.task;

  TrainResult result{TrainedModel{ModelParams(mc), Standardizer{}, grid, cfg.features,
                                  cfg.standardize},
                     AdamState{}, {}, 0.0};
  TrainedModel& model = result.model;
  ModelParams& params = model.params;
  params.init(derive_seed(cfg.seed, kInitStream));

  const auto t_feat = Clock::now();
  std::vector<FeatureMatrix> train_feats =
      compute_features_all(train_series, grid, cfg.features, cfg.threads);
  std::vector<FeatureMatrix> val_feats =
      compute_features_all(val_series, grid, cfg.features, cfg.threads);
  result.feature_seconds = seconds_since(t_feat);
  if (cfg.standardize) {
    model.standardizer.fit(train_feats);
    for (auto& f : train_feats) model.standardizer.apply(f);
    for (auto& f : val_feats) model.standardizer.apply(f);
  }

  const std::size_t n_train = train_series.size();
  std::vector<double> sample_loss(n_train, 0.0);
  std::vector<std::size_t> order(n_train);
  ForwardCache cache;
  TrainedModel last_good = model;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    const auto t_epoch = Clock::now();

    if (online) {
      const auto t_online = Clock::now();
      for (std::size_t i = 0; i < n_train; ++i) {
        const TimeSeries& ts = train_series[i];
        if (cfg.drop_prob > 0.0 && ts.points() >= 3) {
          const std::uint64_t s = derive_seed(cfg.seed, kDropStream + epoch, ds.splits.train[i]);
          train_feats[i] = compute_features(random_drop(ts, 1.0 - cfg.drop_prob, s), grid,
                                            cfg.features);
        } else {
          train_feats[i] = compute_features(ts, grid, cfg.features);
        }
        if (cfg.standardize) model.standardizer.apply(train_feats[i]);
      }
      rec.feature_seconds = seconds_since(t_online);
    }

    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, kShuffleStream, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    try {
      for (std::size_t b0 = 0; b0 < n_train; b0 += cfg.batch_size) {
        const std::size_t b1 = std::min(n_train, b0 + cfg.batch_size);
        std::sort(order.begin() + static_cast<std::ptrdiff_t>(b0),
                  order.begin() + static_cast<std::ptrdiff_t>(b1));
        const double inv_b = 1.0 / static_cast<double>(b1 - b0);
        params.zero_grad();
        for (std::size_t j = b0; j < b1; ++j) {
          const std::size_t i = order[j];
          const auto out = model_forward(train_feats[i], params, cache);
          rec.attention_macs += cache.attention_macs;
          LossResult l = loss(out, train_series[i].target, ds.task);
          if (!std::isfinite(l.value)) throw std::runtime_error("non-finite training loss");
          sample_loss[i] = l.value;
          for (auto& g : l.grad) g *= inv_b;
          model_backward(cache, l.grad, params);
        }
        adam_step(params, result.optimizer, cfg.learning_rate, cfg.adam);
      }
    } catch (const std::runtime_error& e) {
      throw TrainingDiverged(std::string("training diverged in epoch ") + std::to_string(epoch) +
                                 ": " + e.what(),
                             std::move(last_good), epoch);
    }
    rec.seconds = seconds_since(t_epoch);

    double total = 0.0;
    for (double l : sample_loss) total += l;
    rec.train_loss = total / static_cast<double>(n_train);
    const bool validate_now =
        cfg.val_every > 0 && (epoch % cfg.val_every == 0 || epoch == cfg.epochs);
    rec.val_loss = rec.val_metric = std::numeric_limits<double>::quiet_NaN();
    if (validate_now && !val_feats.empty()) {
      const MetricReport vr = evaluate_features(val_feats, val_targets, params);
      rec.val_loss = vr.mean_loss;
      rec.val_metric = vr.metric();
    }
    result.records.push_back(rec);
    last_good = model;
    if (hook) hook(rec, model);

    if (cfg.patience > 0 && std::isfinite(rec.val_loss)) {
      if (rec.val_loss < best_val) {
        best_val = rec.val_loss;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
  }
  return result;
}

nlohmann::json to_json(const BenchRow& r) {
  return {{"length", r.length},
          {"offline_seconds_per_epoch", r.offline_seconds_per_epoch},
          {"online_seconds_per_epoch", r.online_seconds_per_epoch},
          {"precompute_seconds", r.precompute_seconds},
          {"attention_macs_per_epoch", r.attention_macs_per_epoch}};
}

}  // namespace rformer
