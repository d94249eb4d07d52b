#include <stdexcept>

#include "rformer/train.hpp"

namespace rformer {

namespace {

struct Timing {
  double seconds_per_epoch = 0.0;
  double precompute_seconds = 0.0;
  std::uint64_t macs_per_epoch = 0;
};

Timing time_schedule(const Dataset& ds, const BenchConfig& cfg, FeatureSchedule schedule) {
  TrainConfig tc = cfg.train;
  tc.schedule = schedule;
  tc.epochs = cfg.warmup_epochs + cfg.timed_epochs;
  tc.patience = 0;
  const TrainResult r = train(ds, tc);
  Timing t;
  t.precompute_seconds = r.feature_seconds;
  for (std::size_t e = cfg.warmup_epochs; e < r.records.size(); ++e) {
    t.seconds_per_epoch += r.records[e].seconds;
    t.macs_per_epoch = r.records[e].attention_macs;
  }
  t.seconds_per_epoch /= static_cast<double>(cfg.timed_epochs);
  return t;
}

}  // namespace

std::vector<BenchRow> bench_epoch_time(std::span<const std::size_t> lengths,
                                       const BenchConfig& cfg) {
  if (cfg.timed_epochs == 0) throw std::invalid_argument("bench: need at least one timed epoch");
  std::vector<BenchRow> rows;
  for (std::size_t length : lengths) {
    SinusoidConfig sc;
    sc.num_classes = cfg.num_classes;
    sc.samples_per_class = cfg.samples_per_class;
    sc.length = length;
    sc.seed = cfg.train.seed;
    const Dataset ds = gen_sinusoidal(sc);

    const Timing off = time_schedule(ds, cfg, FeatureSchedule::kOffline);
    const Timing on = time_schedule(ds, cfg, FeatureSchedule::kOnline);
    BenchRow row;
    row.length = length;
    row.offline_seconds_per_epoch = off.seconds_per_epoch;
    row.online_seconds_per_epoch = on.seconds_per_epoch;
    row.precompute_seconds = off.precompute_seconds;
    row.attention_macs_per_epoch = off.macs_per_epoch;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace rformer
