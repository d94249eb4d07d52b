#include "rformer/run_config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "rformer/checkpoint.hpp"

namespace rformer {

namespace {

using nlohmann::json;

// Each section lists its fields once; the visitors below serialize and parse.
template <class V>
void visit(DatasetSection& s, V& v) {
  v("task", s.task);
  v("classes", s.classes);
  v("per_class", s.per_class);
  v("length", s.length);
  v("t_end", s.t_end);
  v("noise", s.noise);
  v("omega_min", s.omega_min);
  v("omega_max", s.omega_max);
  v("switch_frac", s.switch_frac);
  v("samples", s.samples);
  v("equal_frac", s.equal_frac);
  v("csv", s.csv);
  v("target", s.target);
  v("outputs", s.outputs);
  v("fractions", s.fractions);
}

template <class V>
void visit(FeaturesSection& s, V& v) {
  v("mode", s.mode);
  v("depth", s.depth);
  v("windows", s.windows);
  v("univariate", s.univariate);
  v("time_augment", s.time_augment);
  v("threads", s.threads);
}

template <class V>
void visit(ModelSection& s, V& v) {
  v("dim", s.dim);
  v("ff_dim", s.ff_dim);
  v("layers", s.layers);
  v("positional_encoding", s.positional_encoding);
}

template <class V>
void visit(TrainSection& s, V& v) {
  v("lr", s.lr);
  v("batch_size", s.batch_size);
  v("epochs", s.epochs);
  v("beta1", s.beta1);
  v("beta2", s.beta2);
  v("eps", s.eps);
  v("drop_prob", s.drop_prob);
  v("feature_mode", s.feature_mode);
  v("standardize", s.standardize);
  v("patience", s.patience);
  v("val_every", s.val_every);
  v("eval_drop_prob", s.eval_drop_prob);
}

template <class V>
void visit(BenchSection& s, V& v) {
  v("lengths", s.lengths);
  v("classes", s.classes);
  v("per_class", s.per_class);
  v("warmup", s.warmup);
  v("timed", s.timed);
}

template <class V>
void visit(CheckSigSection& s, V& v) {
  v("trials", s.trials);
  v("max_dim", s.max_dim);
  v("max_depth", s.max_depth);
  v("max_segments", s.max_segments);
  v("tolerance", s.tolerance);
}

struct Writer {
  json out = json::object();
  template <class T>
  void operator()(const char* key, const T& value) {
    out[key] = value;
  }
};

[[noreturn]] void bad_type(const std::string& path, const char* expected) {
  throw std::invalid_argument("config: '" + path + "' must be " + expected);
}

struct Reader {
  const json& in;
  std::string section;
  std::set<std::string> known;

  std::string path(const char* key) const { return section + "." + key; }

  template <class T>
  void operator()(const char* key, T& value) {
    known.insert(key);
    auto it = in.find(key);
    if (it == in.end()) return;
    read(*it, path(key), value);
  }

  static void read(const json& j, const std::string& p, bool& v) {
    if (!j.is_boolean()) bad_type(p, "a boolean");
    v = j.get<bool>();
  }
  static void read(const json& j, const std::string& p, double& v) {
    if (!j.is_number()) bad_type(p, "a number");
    v = j.get<double>();
  }
  static void read(const json& j, const std::string& p, std::string& v) {
    if (!j.is_string()) bad_type(p, "a string");
    v = j.get<std::string>();
  }
  template <class U>
    requires std::is_unsigned_v<U>
  static void read(const json& j, const std::string& p, U& v) {
    if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<std::int64_t>() < 0))
      bad_type(p, "a non-negative integer");
    v = j.get<U>();
  }
  static void read(const json& j, const std::string& p, std::array<double, 3>& v) {
    if (!j.is_array() || j.size() != 3) bad_type(p, "an array of 3 numbers");
    for (std::size_t i = 0; i < 3; ++i) read(j[i], p + "[" + std::to_string(i) + "]", v[i]);
  }
  static void read(const json& j, const std::string& p, std::vector<std::size_t>& v) {
    if (!j.is_array()) bad_type(p, "an array of non-negative integers");
    v.clear();
    for (std::size_t i = 0; i < j.size(); ++i) {
      std::size_t x = 0;
      read(j[i], p + "[" + std::to_string(i) + "]", x);
      v.push_back(x);
    }
  }

  void reject_unknown() const {
    for (const auto& [k, _] : in.items())
      if (!known.count(k)) throw std::invalid_argument("config: unknown key '" + path(k.c_str()) + "'");
  }
};

template <class S>
json section_json(const S& s) {
  Writer w;
  visit(const_cast<S&>(s), w);
  return w.out;
}

template <class S>
void read_section(const json& root, const char* name, S& s) {
  auto it = root.find(name);
  if (it == root.end()) return;
  if (!it->is_object()) bad_type(name, "an object");
  Reader r{*it, name, {}};
  visit(s, r);
  r.reject_unknown();
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument("config: " + msg);
}

}  // namespace

void RunConfig::validate() const {
  const auto& d = dataset;
  require(d.task == "sine" || d.task == "long-sine" || d.task == "spatial" || d.task == "csv",
          "dataset.task must be sine, long-sine, spatial or csv (got '" + d.task + "')");
  require(d.task != "csv" || !d.csv.empty(), "dataset.csv is required when dataset.task is csv");
  require(d.target == "classify" || d.target == "regress",
          "dataset.target must be classify or regress");
  require(d.classes >= 1 && d.per_class >= 1, "dataset.classes and dataset.per_class must be >= 1");
  require(d.length >= 2, "dataset.length must be >= 2");
  require(d.t_end > 0.0, "dataset.t_end must be positive");
  require(d.noise >= 0.0, "dataset.noise must be >= 0");
  require(d.omega_min <= d.omega_max, "dataset.omega_min must not exceed dataset.omega_max");
  require(d.switch_frac > 0.0 && d.switch_frac <= 1.0, "dataset.switch_frac must lie in (0, 1]");
  require(d.samples >= 2, "dataset.samples must be >= 2");
  require(d.equal_frac > 0.0 && d.equal_frac < 1.0, "dataset.equal_frac must lie in (0, 1)");
  double total = 0.0;
  for (double f : d.fractions) {
    require(f >= 0.0, "dataset.fractions must be non-negative");
    total += f;
  }
  require(std::abs(total - 1.0) < 1e-9, "dataset.fractions must sum to 1");

  parse_feature_mode(features.mode);
  parse_feature_schedule(train.feature_mode);
  require(features.depth >= 1, "features.depth must be >= 1");
  require(features.windows >= 1, "features.windows must be >= 1");
  require(model.dim >= 1, "model.dim must be >= 1");
  require(model.layers >= 1, "model.layers must be >= 1");
  require(train.eval_drop_prob >= 0.0 && train.eval_drop_prob < 1.0,
          "train.eval_drop_prob must lie in [0, 1)");
  require(!bench.lengths.empty(), "bench.lengths must not be empty");
  for (std::size_t l : bench.lengths) require(l >= 2, "bench.lengths entries must be >= 2");
  require(bench.timed >= 1, "bench.timed must be >= 1");
  require(check_sig.max_dim >= 1 && check_sig.max_depth >= 1 && check_sig.max_segments >= 1,
          "check_sig bounds must be >= 1");
  train_config(*this).validate();
}

nlohmann::json to_json(const RunConfig& cfg) {
  return {{"seed", cfg.seed},
          {"dataset", section_json(cfg.dataset)},
          {"features", section_json(cfg.features)},
          {"model", section_json(cfg.model)},
          {"train", section_json(cfg.train)},
          {"bench", section_json(cfg.bench)},
          {"check_sig", section_json(cfg.check_sig)}};
}

RunConfig run_config_from_json(const nlohmann::json& j, const RunConfig& base) {
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  static const std::set<std::string> top{"seed",  "dataset", "features", "model",
                                         "train", "bench",   "check_sig"};
  for (const auto& [k, _] : j.items())
    if (!top.count(k)) throw std::invalid_argument("config: unknown key '" + k + "'");
  RunConfig cfg = base;
  if (auto it = j.find("seed"); it != j.end()) Reader::read(*it, "seed", cfg.seed);
  read_section(j, "dataset", cfg.dataset);
  read_section(j, "features", cfg.features);
  read_section(j, "model", cfg.model);
  read_section(j, "train", cfg.train);
  read_section(j, "bench", cfg.bench);
  read_section(j, "check_sig", cfg.check_sig);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

Dataset make_dataset(const RunConfig& cfg) {
  const auto& d = cfg.dataset;
  const SplitFractions fr{d.fractions[0], d.fractions[1], d.fractions[2]};
  if (d.task == "sine" || d.task == "long-sine") {
    SinusoidConfig sc;
    sc.num_classes = d.classes;
    sc.samples_per_class = d.per_class;
    sc.length = d.length;
    sc.t_end = d.t_end;
    sc.noise_sigma = d.noise;
    sc.omega_min = d.omega_min;
    sc.omega_max = d.omega_max;
    sc.seed = cfg.seed;
    sc.fractions = fr;
    return d.task == "sine" ? gen_sinusoidal(sc) : gen_long_sinusoidal(sc, d.switch_frac);
  }
  if (d.task == "spatial") {
    SpatialConfig sp;
    sp.num_samples = d.samples;
    sp.length = d.length;
    sp.t_end = d.t_end;
    sp.equal_frac = d.equal_frac;
    sp.seed = cfg.seed;
    sp.fractions = fr;
    return gen_spatial_pair(sp);
  }
  if (d.task == "csv") {
    CsvSchema schema{parse_task(d.target), d.outputs};
    return load_csv(d.csv, schema, derive_seed(cfg.seed, 0xC5F), fr);
  }
  throw std::invalid_argument("unknown dataset task '" + d.task + "'");
}

FeatureConfig feature_config(const RunConfig& cfg) {
  FeatureConfig fc;
  fc.mode = parse_feature_mode(cfg.features.mode);
  fc.depth = cfg.features.depth;
  fc.num_windows = cfg.features.windows;
  fc.univariate = cfg.features.univariate;
  fc.time_augment = cfg.features.time_augment;
  return fc;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig tc;
  tc.learning_rate = cfg.train.lr;
  tc.batch_size = cfg.train.batch_size;
  tc.epochs = cfg.train.epochs;
  tc.seed = cfg.seed;
  tc.adam = {cfg.train.beta1, cfg.train.beta2, cfg.train.eps};
  tc.drop_prob = cfg.train.drop_prob;
  tc.features = feature_config(cfg);
  tc.schedule = parse_feature_schedule(cfg.train.feature_mode);
  tc.standardize = cfg.train.standardize;
  tc.patience = cfg.train.patience;
  tc.val_every = cfg.train.val_every;
  tc.model_dim = cfg.model.dim;
  tc.ff_dim = cfg.model.ff_dim;
  tc.num_layers = cfg.model.layers;
  tc.positional_encoding = cfg.model.positional_encoding;
  tc.threads = cfg.features.threads;
  return tc;
}

BenchConfig bench_config(const RunConfig& cfg) {
  BenchConfig bc;
  bc.num_classes = cfg.bench.classes;
  bc.samples_per_class = cfg.bench.per_class;
  bc.warmup_epochs = cfg.bench.warmup;
  bc.timed_epochs = cfg.bench.timed;
  bc.train = train_config(cfg);
  return bc;
}

SigCheckConfig sigcheck_config(const RunConfig& cfg) {
  SigCheckConfig sc;
  sc.trials = cfg.check_sig.trials;
  sc.max_dim = cfg.check_sig.max_dim;
  sc.max_depth = cfg.check_sig.max_depth;
  sc.max_segments = cfg.check_sig.max_segments;
  sc.tolerance = cfg.check_sig.tolerance;
  sc.seed = cfg.seed;
  return sc;
}

nlohmann::json model_extra(const TrainedModel& model) {
  const FeatureConfig& f = model.features;
  return {{"features",
           {{"mode", std::string(to_string(f.mode))},
            {"depth", f.depth},
            {"windows", f.num_windows},
            {"univariate", f.univariate},
            {"time_augment", f.time_augment}}},
          {"grid", model.grid.boundaries},
          {"standardize", model.standardize},
          {"standardizer",
           {{"mean", model.standardizer.mean()}, {"scale", model.standardizer.scale()}}}};
}

TrainedModel trained_model_from_checkpoint(const std::filesystem::path& path) {
  Checkpoint ck = read_checkpoint(path);
  const json& x = ck.extra;
  try {
    const json& f = x.at("features");
    FeatureConfig fc;
    fc.mode = parse_feature_mode(f.at("mode").get<std::string>());
    fc.depth = f.at("depth").get<std::size_t>();
    fc.num_windows = f.at("windows").get<std::size_t>();
    fc.univariate = f.at("univariate").get<bool>();
    fc.time_augment = f.at("time_augment").get<bool>();
    TrainedModel m{std::move(ck.params), Standardizer{},
                   WindowGrid{x.at("grid").get<std::vector<double>>()}, fc,
                   x.at("standardize").get<bool>()};
    auto mean = x.at("standardizer").at("mean").get<std::vector<double>>();
    auto scale = x.at("standardizer").at("scale").get<std::vector<double>>();
    if (!mean.empty()) m.standardizer.set(std::move(mean), std::move(scale));
    return m;
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint " + path.string() +
                             " lacks inference metadata: " + e.what());
  }
}

}  // namespace rformer
