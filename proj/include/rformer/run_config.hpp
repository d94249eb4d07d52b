#pragma once
// Resolved configuration for one CLI run, read from a JSON file with
// per-field defaults. Unknown keys and type mismatches are errors.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "rformer/data.hpp"
#include "rformer/sigcheck.hpp"
#include "rformer/train.hpp"

namespace rformer {

struct DatasetSection {
  std::string task = "sine";  // sine | long-sine | spatial | csv
  std::size_t classes = 20;
  std::size_t per_class = 20;
  std::size_t length = 500;
  double t_end = 1.0;
  double noise = 0.1;
  double omega_min = 10.0;
  double omega_max = 500.0;
  double switch_frac = 0.1;  // long-sine only
  std::size_t samples = 1000;  // spatial only
  double equal_frac = 0.01;    // spatial only
  std::string csv;               // csv only
  std::string target = "classify";  // csv only: classify | regress
  std::size_t outputs = 0;          // csv only: 0 infers
  std::array<double, 3> fractions{0.70, 0.15, 0.15};
};

struct FeaturesSection {
  std::string mode = "multiview";
  std::size_t depth = 2;
  std::size_t windows = 40;
  bool univariate = false;
  bool time_augment = true;
  unsigned threads = 1;
};

struct ModelSection {
  std::size_t dim = 16;
  std::size_t ff_dim = 0;  // 0: 4 * dim
  std::size_t layers = 1;
  bool positional_encoding = true;
};

struct TrainSection {
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double drop_prob = 0.0;
  std::string feature_mode = "offline";
  bool standardize = true;
  std::size_t patience = 0;
  std::size_t val_every = 1;
  double eval_drop_prob = 0.0;  // extra test pass with points dropped
};

struct BenchSection {
  std::vector<std::size_t> lengths{500, 2500, 10000};
  std::size_t classes = 10;
  std::size_t per_class = 10;
  std::size_t warmup = 1;
  std::size_t timed = 5;
};

struct CheckSigSection {
  std::size_t trials = 200;
  std::size_t max_dim = 4;
  std::size_t max_depth = 5;
  std::size_t max_segments = 50;
  double tolerance = 1e-12;
};

struct RunConfig {
  std::uint64_t seed = 0;
  DatasetSection dataset;
  FeaturesSection features;
  ModelSection model;
  TrainSection train;
  BenchSection bench;
  CheckSigSection check_sig;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);

// Starts from `base` and applies every key present in `j`. Unknown keys and
// wrongly typed values throw std::invalid_argument with the key path.
RunConfig run_config_from_json(const nlohmann::json& j, const RunConfig& base = {});
RunConfig load_run_config(const std::filesystem::path& path);

Dataset make_dataset(const RunConfig& cfg);
FeatureConfig feature_config(const RunConfig& cfg);
TrainConfig train_config(const RunConfig& cfg);
BenchConfig bench_config(const RunConfig& cfg);
SigCheckConfig sigcheck_config(const RunConfig& cfg);

// Inference bundle stored in a checkpoint's "extra" object.
nlohmann::json model_extra(const TrainedModel& model);
TrainedModel trained_model_from_checkpoint(const std::filesystem::path& path);

}  // namespace rformer
