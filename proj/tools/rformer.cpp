// rformer: command-line front end.
//
//   rformer generate   synthetic dataset -> CSV + provenance
//   rformer features   signature features -> binary cache keyed by dataset hash
//   rformer train      training run -> epoch stream, summary, checkpoint
//   rformer eval       checkpoint + dataset split -> metric report
//   rformer bench      seconds per epoch over sequence lengths
//   rformer check-sig  randomized signature identity checks
//
// Every command reads an optional JSON config (--config), applies flag
// overrides, and writes the resolved config to <out-dir>/config.json.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rformer/checkpoint.hpp"
#include "rformer/feature_cache.hpp"
#include "rformer/run_config.hpp"
#include "rformer/sigcheck.hpp"
#include "rformer/simd/kernels.hpp"
#include "rformer/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rformer;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> task, mode, feature_mode, data, target;
  std::optional<std::size_t> depth, windows, classes, per_class, length, samples, epochs,
      batch_size, model_dim, trials, max_depth, bench_classes;
  std::optional<bool> univariate, time_augment;
  std::optional<double> drop_prob, lr;
  std::vector<std::size_t> lengths;
};

struct Common {
  std::string config;
  std::string out_dir = "rformer_out";
  Overrides o;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--out-dir", c.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--seed", c.o.seed, "base seed for every random stream");
}

void add_dataset_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--task", c.o.task, "dataset: sine, long-sine, spatial or csv")
      ->check(CLI::IsMember({"sine", "long-sine", "spatial", "csv"}));
  cmd->add_option("--data", c.o.data, "CSV dataset (implies --task csv)");
  cmd->add_option("--target", c.o.target, "CSV target kind")
      ->check(CLI::IsMember({"classify", "regress"}));
  cmd->add_option("--classes", c.o.classes, "sinusoid classes");
  cmd->add_option("--per-class", c.o.per_class, "sinusoid samples per class");
  cmd->add_option("--length", c.o.length, "points per series");
  cmd->add_option("--samples", c.o.samples, "spatial task sample count");
}

void add_feature_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--mode", c.o.mode, "signature view")
      ->check(CLI::IsMember({"local", "global", "multiview", "raw"}));
  cmd->add_option("--depth", c.o.depth, "signature truncation depth");
  cmd->add_option("--windows", c.o.windows, "number of windows");
  cmd->add_flag("--univariate,!--no-univariate", c.o.univariate,
                "per-channel (time, x_i) signatures");
  cmd->add_flag("--time-augment,!--no-time-augment", c.o.time_augment,
                "add time as channel 0");
}

void add_train_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--drop-prob", c.o.drop_prob, "per-epoch point drop probability");
  cmd->add_option("--feature-mode", c.o.feature_mode, "feature schedule")
      ->check(CLI::IsMember({"online", "offline"}));
  cmd->add_option("--epochs", c.o.epochs, "training epochs");
  cmd->add_option("--lr", c.o.lr, "learning rate");
  cmd->add_option("--batch-size", c.o.batch_size, "mini-batch size");
  cmd->add_option("--model-dim", c.o.model_dim, "embedding width");
}

template <class T>
void apply(const std::optional<T>& v, T& dst) {
  if (v) dst = *v;
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  const Overrides& o = c.o;
  apply(o.seed, cfg.seed);
  apply(o.task, cfg.dataset.task);
  if (o.data) {
    cfg.dataset.csv = *o.data;
    cfg.dataset.task = "csv";
  }
  apply(o.target, cfg.dataset.target);
  apply(o.classes, cfg.dataset.classes);
  apply(o.per_class, cfg.dataset.per_class);
  apply(o.length, cfg.dataset.length);
  apply(o.samples, cfg.dataset.samples);
  apply(o.mode, cfg.features.mode);
  apply(o.depth, cfg.features.depth);
  apply(o.windows, cfg.features.windows);
  apply(o.univariate, cfg.features.univariate);
  apply(o.time_augment, cfg.features.time_augment);
  apply(o.drop_prob, cfg.train.drop_prob);
  apply(o.feature_mode, cfg.train.feature_mode);
  apply(o.epochs, cfg.train.epochs);
  apply(o.lr, cfg.train.lr);
  apply(o.batch_size, cfg.train.batch_size);
  apply(o.model_dim, cfg.model.dim);
  apply(o.trials, cfg.check_sig.trials);
  apply(o.max_depth, cfg.check_sig.max_depth);
  apply(o.bench_classes, cfg.bench.classes);
  if (!o.lengths.empty()) cfg.bench.lengths = o.lengths;
  cfg.validate();
  return cfg;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path prepare(const Common& c, const RunConfig& cfg) {
  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  write_json(dir / "config.json", to_json(cfg));
  return dir;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json split_sizes(const Dataset& ds) {
  return {{"train", ds.splits.train.size()},
          {"val", ds.splits.val.size()},
          {"test", ds.splits.test.size()}};
}

int cmd_generate(const Common& c) {
  const RunConfig cfg = resolve(c);
  if (cfg.dataset.task == "csv")
    throw std::invalid_argument("generate needs a synthetic task (sine, long-sine, spatial)");
  const fs::path dir = prepare(c, cfg);
  const Dataset ds = make_dataset(cfg);
  write_csv(dir / "dataset.csv", ds);

  json labels = json::object();
  if (ds.task == Task::kClassify) {
    std::vector<std::size_t> counts(ds.num_outputs, 0);
    for (const auto& s : ds.samples) ++counts[static_cast<std::size_t>(std::get<int>(s.target))];
    labels = counts;
  }
  json prov = {{"generator", ds.provenance},
               {"seed", cfg.seed},
               {"series", ds.samples.size()},
               {"points_per_series", cfg.dataset.length},
               {"dim", ds.dim()},
               {"task", std::string(to_string(ds.task))},
               {"outputs", ds.num_outputs},
               {"label_counts", labels},
               {"splits",
                {{"train", ds.splits.train}, {"val", ds.splits.val}, {"test", ds.splits.test}}},
               {"dataset_hash", dataset_hash(ds.samples)}};
  write_json(dir / "provenance.json", prov);
  std::printf("wrote %zu series (dim %zu) to %s\n", ds.samples.size(), ds.dim(),
              (dir / "dataset.csv").c_str());
  return 0;
}

bool same_features(const FeatureConfig& a, const FeatureConfig& b) {
  return a.mode == b.mode && a.depth == b.depth && a.num_windows == b.num_windows &&
         a.univariate == b.univariate && a.time_augment == b.time_augment;
}

int cmd_features(const Common& c) {
  const RunConfig cfg = resolve(c);
  const fs::path dir = prepare(c, cfg);
  const Dataset ds = make_dataset(cfg);
  const FeatureConfig fc = feature_config(cfg);
  const WindowGrid grid = dataset_grid(ds, fc.num_windows);
  const std::uint64_t hash = dataset_hash(ds.samples);
  const fs::path cache_path = dir / "features.cache";

  std::string status = "computed";
  std::optional<FeatureCache> cache;
  if (fs::exists(cache_path)) {
    try {
      FeatureCache cached = read_feature_cache(cache_path);
      if (cached.dataset_hash == hash && same_features(cached.config, fc) &&
          cached.grid.boundaries == grid.boundaries) {
        cache = std::move(cached);
        status = "cache hit";
      } else {
        status = "stale cache replaced";
      }
    } catch (const CacheError& e) {
      std::fprintf(stderr, "warning: feature cache %s is corrupted (%s); recomputing\n",
                   cache_path.c_str(), e.what());
      status = "corrupt cache recomputed";
    }
  }
  double seconds = 0.0;
  if (!cache) {
    const auto t0 = std::chrono::steady_clock::now();
    FeatureCache fresh{hash, fc, grid, {}, compute_features_all(ds.samples, grid, fc, cfg.features.threads)};
    seconds = seconds_since(t0);
    for (const auto& s : ds.samples) fresh.series_hashes.push_back(series_hash(s));
    write_feature_cache(cache_path, fresh);
    cache = std::move(fresh);
  }
  const std::size_t rows = cache->features.empty() ? 0 : cache->features.front().rows;
  const std::size_t width = cache->features.empty() ? 0 : cache->features.front().cols;
  const json report = {{"status", status},
                       {"samples", cache->features.size()},
                       {"windows", rows},
                       {"width", width},
                       {"transform_seconds", seconds},
                       {"dataset_hash", hash},
                       {"cache", cache_path.string()}};
  write_json(dir / "features.json", report);
  std::printf("%s: %zu samples, L_bar=%zu, d_bar=%zu, transform %.3f s\n", status.c_str(),
              cache->features.size(), rows, width, seconds);
  return 0;
}

json metrics_json(const MetricReport& r) { return to_json(r); }

int cmd_train(const Common& c) {
  const RunConfig cfg = resolve(c);
  const fs::path dir = prepare(c, cfg);
  const Dataset ds = make_dataset(cfg);
  const TrainConfig tc = train_config(cfg);

  std::ofstream stream(dir / "epochs.jsonl");
  if (!stream) throw std::runtime_error("cannot write " + (dir / "epochs.jsonl").string());
  auto hook = [&](const EpochRecord& r, const TrainedModel&) {
    stream << to_json(r).dump() << '\n';
    stream.flush();
    if (std::isfinite(r.val_metric))
      std::printf("epoch %zu  train_loss %.6f  val_loss %.6f  val_%s %.4f  (%.3f s)\n", r.epoch,
                  r.train_loss, r.val_loss, ds.task == Task::kClassify ? "acc" : "rmse",
                  r.val_metric, r.seconds);
    else
      std::printf("epoch %zu  train_loss %.6f  (%.3f s)\n", r.epoch, r.train_loss, r.seconds);
    std::fflush(stdout);
  };

  json summary = {{"config", to_json(cfg)},
                  {"simd", simd::active().name},
                  {"dataset", {{"series", ds.samples.size()}, {"splits", split_sizes(ds)}}}};
  const auto t0 = std::chrono::steady_clock::now();
  try {
    TrainResult res = train(ds, tc, hook);
    summary["train_seconds"] = seconds_since(t0);
    summary["feature_seconds"] = res.feature_seconds;
    summary["epochs_run"] = res.records.size();
    summary["parameters"] = res.model.params.parameter_count();
    if (!res.records.empty()) summary["last_epoch"] = to_json(res.records.back());
    if (!ds.splits.val.empty())
      summary["val"] = metrics_json(evaluate(ds, ds.splits.val, res.model));
    if (!ds.splits.test.empty()) {
      summary["test"] = metrics_json(evaluate(ds, ds.splits.test, res.model));
      if (cfg.train.eval_drop_prob > 0.0)
        summary["test_dropped"] = metrics_json(evaluate(
            ds, ds.splits.test, res.model, {cfg.train.eval_drop_prob, derive_seed(cfg.seed, 0xE7A1)}));
    }
    json extra = model_extra(res.model);
    extra["run_config"] = to_json(cfg);
    extra["optimizer_step"] = res.optimizer.step;
    write_checkpoint(dir / "checkpoint.json", res.model.params, extra);
    summary["checkpoint"] = (dir / "checkpoint.json").string();
    write_json(dir / "summary.json", summary);
    if (summary.contains("test"))
      std::printf("test: %s\n", summary["test"].dump().c_str());
    return 0;
  } catch (const TrainingDiverged& e) {
    json extra = model_extra(e.last_good);
    extra["run_config"] = to_json(cfg);
    write_checkpoint(dir / "checkpoint.json", e.last_good.params, extra);
    summary["diverged"] = {{"epoch", e.epoch}, {"message", e.what()}};
    summary["checkpoint"] = (dir / "checkpoint.json").string();
    write_json(dir / "summary.json", summary);
    std::fprintf(stderr, "error: %s; last good model written to %s\n", e.what(),
                 (dir / "checkpoint.json").c_str());
    return kExitDiverged;
  }
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& split) {
  const RunConfig cfg = resolve(c);
  const fs::path dir = prepare(c, cfg);
  const fs::path ck = checkpoint.empty() ? dir / "checkpoint.json" : fs::path(checkpoint);
  const TrainedModel model = trained_model_from_checkpoint(ck);
  const Dataset ds = make_dataset(cfg);
  const auto& idx = split == "train" ? ds.splits.train
                    : split == "val" ? ds.splits.val
                                     : ds.splits.test;
  const EvalOptions opts{c.o.drop_prob.value_or(0.0), derive_seed(cfg.seed, 0xE7A1)};
  const MetricReport r = evaluate(ds, idx, model, opts);
  json report = metrics_json(r);
  report["split"] = split;
  report["drop_prob"] = opts.drop_prob;
  report["checkpoint"] = ck.string();
  write_json(dir / "eval.json", report);
  std::printf("%s\n", report.dump().c_str());
  return 0;
}

int cmd_bench(const Common& c) {
  const RunConfig cfg = resolve(c);
  const fs::path dir = prepare(c, cfg);
  const BenchConfig bc = bench_config(cfg);
  const auto rows = bench_epoch_time(cfg.bench.lengths, bc);
  json out = json::array();
  std::ofstream csv(dir / "bench.csv");
  csv << "length,offline_seconds_per_epoch,online_seconds_per_epoch,precompute_seconds,"
         "attention_macs_per_epoch\n";
  std::printf("%10s %14s %14s %14s %16s\n", "L", "offline s/ep", "online s/ep", "precompute s",
              "attn MACs/ep");
  for (const auto& r : rows) {
    out.push_back(to_json(r));
    csv << r.length << ',' << r.offline_seconds_per_epoch << ',' << r.online_seconds_per_epoch
        << ',' << r.precompute_seconds << ',' << r.attention_macs_per_epoch << '\n';
    std::printf("%10zu %14.4f %14.4f %14.4f %16llu\n", r.length, r.offline_seconds_per_epoch,
                r.online_seconds_per_epoch, r.precompute_seconds,
                static_cast<unsigned long long>(r.attention_macs_per_epoch));
  }
  write_json(dir / "bench.json", out);
  return 0;
}

int cmd_check_sig(const Common& c) {
  const RunConfig cfg = resolve(c);
  const fs::path dir = prepare(c, cfg);
  const auto results = run_signature_checks(sigcheck_config(cfg));
  json out = json::array();
  bool ok = true;
  for (const auto& r : results) {
    const bool is_decay = r.name == "factorial_decay";
    std::printf("%-20s %s  cases=%zu  %s=%.3e\n", r.name.c_str(), r.passed() ? "PASS" : "FAIL",
                r.cases, is_decay ? "max_ratio" : "max_rel_err", r.max_error);
    out.push_back({{"property", r.name},
                   {"passed", r.passed()},
                   {"cases", r.cases},
                   {"failures", r.failures},
                   {"max_error", r.max_error}});
    ok = ok && r.passed();
  }
  write_json(dir / "check_sig.json", out);
  return ok ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Signature-feature transformer for irregular time series"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "rformer 1.0");

  Common gen, feat, tr, ev, be, cs;
  std::string checkpoint, split = "test";

  auto* g = app.add_subcommand("generate", "write a synthetic dataset as CSV");
  add_common(g, gen);
  add_dataset_flags(g, gen);

  auto* f = app.add_subcommand("features", "compute and cache signature features");
  add_common(f, feat);
  add_dataset_flags(f, feat);
  add_feature_flags(f, feat);

  auto* t = app.add_subcommand("train", "train a model");
  add_common(t, tr);
  add_dataset_flags(t, tr);
  add_feature_flags(t, tr);
  add_train_flags(t, tr);

  auto* e = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
  add_common(e, ev);
  add_dataset_flags(e, ev);
  e->add_option("--checkpoint", checkpoint, "checkpoint (default <out-dir>/checkpoint.json)");
  e->add_option("--split", split, "split to evaluate")
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  e->add_option("--drop-prob", ev.o.drop_prob, "eval-time point drop probability");

  auto* b = app.add_subcommand("bench", "seconds per epoch against sequence length");
  add_common(b, be);
  add_feature_flags(b, be);
  add_train_flags(b, be);
  b->add_option("--lengths", be.o.lengths, "comma-separated lengths")->delimiter(',');
  b->add_option("--classes", be.o.bench_classes, "sinusoid classes per benchmark dataset");

  auto* s = app.add_subcommand("check-sig", "randomized signature identity checks");
  add_common(s, cs);
  s->add_option("--trials", cs.o.trials, "random paths");
  s->add_option("--max-depth", cs.o.max_depth, "largest truncation depth");

  CLI11_PARSE(app, argc, argv);

  try {
    if (g->parsed()) return cmd_generate(gen);
    if (f->parsed()) return cmd_features(feat);
    if (t->parsed()) return cmd_train(tr);
    if (e->parsed()) return cmd_eval(ev, checkpoint, split);
    if (b->parsed()) return cmd_bench(be);
    if (s->parsed()) return cmd_check_sig(cs);
  } catch (const std::invalid_argument& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kExitUsage;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kExitFailure;
  }
  return kExitUsage;
}
