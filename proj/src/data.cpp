#include "rformer/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace rformer {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> uniform_times(std::size_t length, double t_end) {
  std::vector<double> t(length);
  for (std::size_t i = 0; i < length; ++i)
    t[i] = t_end * static_cast<double>(i) / static_cast<double>(length - 1);
  return t;
}

double polynomial(const std::vector<double>& coeffs, double t) {
  double acc = 0.0;
  for (std::size_t p = coeffs.size(); p-- > 0;) acc = acc * t + coeffs[p];
  return acc;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void validate_sinusoid(const SinusoidConfig& cfg) {
  if (cfg.num_classes < 2) throw std::invalid_argument("sinusoid generator: need >= 2 classes");
  if (cfg.samples_per_class < 1)
    throw std::invalid_argument("sinusoid generator: need >= 1 sample per class");
  if (cfg.length < 2) throw std::invalid_argument("sinusoid generator: length must be >= 2");
  if (!(cfg.t_end > 0.0)) throw std::invalid_argument("sinusoid generator: t_end must be > 0");
  if (cfg.noise_sigma < 0.0) throw std::invalid_argument("sinusoid generator: negative noise");
  if (!(cfg.omega_min <= cfg.omega_max))
    throw std::invalid_argument("sinusoid generator: omega_min > omega_max");
}

Dataset make_sinusoids(const SinusoidConfig& cfg, double switch_frac) {
  validate_sinusoid(cfg);
  const auto omegas = class_frequencies(cfg);
  const auto times = uniform_times(cfg.length, cfg.t_end);
  const bool switching = switch_frac < 1.0;
  const double t_switch = switch_frac * cfg.t_end;

  Dataset ds;
  ds.task = Task::kClassify;
  ds.num_outputs = cfg.num_classes;
  std::size_t index = 0;
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    for (std::size_t s = 0; s < cfg.samples_per_class; ++s, ++index) {
      std::mt19937_64 rng(derive_seed(cfg.seed, index, 0));
      std::uniform_real_distribution<double> phase_dist(0.0, kTwoPi);
      std::normal_distribution<double> noise(0.0, 1.0);
      const double phase = cfg.random_phase ? phase_dist(rng) : 0.0;
      double omega_late = omegas[c];
      if (switching) {
        std::mt19937_64 rng_switch(derive_seed(cfg.seed, index, 1));
        std::uniform_real_distribution<double> w(cfg.omega_min, cfg.omega_max);
        omega_late = w(rng_switch);
      }
      TimeSeries ts;
      ts.dim = 1;
      ts.times = times;
      ts.values.resize(times.size());
      ts.target = static_cast<int>(c);
      for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        const double omega = (switching && t >= t_switch) ? omega_late : omegas[c];
        const double eta = cfg.noise_sigma > 0.0 ? cfg.noise_sigma * noise(rng) : 0.0;
        ts.values[i] = polynomial(cfg.trend_coeffs, t) * std::sin(omega * t + phase) + eta;
      }
      ds.samples.push_back(std::move(ts));
    }
  }
  ds.splits = make_splits(ds, cfg.fractions, derive_seed(cfg.seed, 0xC0FFEE));
  return ds;
}

}  // namespace

void Dataset::validate() const {
  if (samples.empty()) throw std::invalid_argument("dataset is empty");
  const std::size_t d = samples.front().dim;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.dim != d)
      throw std::invalid_argument("sample " + std::to_string(i) + " has dimension " +
                                  std::to_string(s.dim) + ", expected " + std::to_string(d));
    s.validate();
    if (task == Task::kClassify) {
      const int* c = std::get_if<int>(&s.target);
      if (c == nullptr || *c < 0 || static_cast<std::size_t>(*c) >= num_outputs)
        throw std::invalid_argument("sample " + std::to_string(i) + " has an invalid class label");
    } else {
      const auto* v = std::get_if<std::vector<double>>(&s.target);
      if (v == nullptr || v->size() != num_outputs)
        throw std::invalid_argument("sample " + std::to_string(i) +
                                    " has an invalid regression target");
    }
  }
  std::vector<int> seen(samples.size(), 0);
  for (const auto* part : {&splits.train, &splits.val, &splits.test})
    for (std::size_t i : *part) {
      if (i >= samples.size()) throw std::invalid_argument("split index out of range");
      ++seen[i];
    }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (seen[i] != 1)
      throw std::invalid_argument("sample " + std::to_string(i) + " appears in " +
                                  std::to_string(seen[i]) + " splits");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ (b * 0x2545F4914F6CDD1DULL));
}

Splits make_splits(const Dataset& ds, const SplitFractions& fr, std::uint64_t seed) {
  if (fr.train < 0 || fr.val < 0 || fr.test < 0 ||
      std::abs(fr.train + fr.val + fr.test - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must be nonnegative and sum to 1");
  std::vector<std::vector<std::size_t>> groups;
  if (ds.task == Task::kClassify) {
    groups.resize(ds.num_outputs);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      const int* c = std::get_if<int>(&ds.samples[i].target);
      if (c == nullptr || *c < 0 || static_cast<std::size_t>(*c) >= ds.num_outputs)
        throw std::invalid_argument("make_splits: sample without a valid class label");
      groups[static_cast<std::size_t>(*c)].push_back(i);
    }
  } else {
    groups.emplace_back(ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) groups[0][i] = i;
  }
  Splits s;
  std::mt19937_64 rng(seed);
  for (auto& g : groups) {
    std::shuffle(g.begin(), g.end(), rng);
    const auto n = static_cast<double>(g.size());
    const auto n_train = static_cast<std::size_t>(std::llround(fr.train * n));
    const auto n_val =
        std::min(g.size() - n_train, static_cast<std::size_t>(std::llround(fr.val * n)));
    s.train.insert(s.train.end(), g.begin(), g.begin() + n_train);
    s.val.insert(s.val.end(), g.begin() + n_train, g.begin() + n_train + n_val);
    s.test.insert(s.test.end(), g.begin() + n_train + n_val, g.end());
  }
  for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

nlohmann::json to_json(const SinusoidConfig& cfg) {
  return {{"num_classes", cfg.num_classes},   {"samples_per_class", cfg.samples_per_class},
          {"length", cfg.length},             {"t_end", cfg.t_end},
          {"noise_sigma", cfg.noise_sigma},   {"trend_coeffs", cfg.trend_coeffs},
          {"omega_min", cfg.omega_min},       {"omega_max", cfg.omega_max},
          {"random_phase", cfg.random_phase}, {"seed", cfg.seed},
          {"split", {cfg.fractions.train, cfg.fractions.val, cfg.fractions.test}}};
}

std::vector<double> class_frequencies(const SinusoidConfig& cfg) {
  std::vector<double> w(cfg.num_classes);
  const double step = (cfg.omega_max - cfg.omega_min) / static_cast<double>(cfg.num_classes - 1);
  for (std::size_t j = 0; j < cfg.num_classes; ++j)
    w[j] = cfg.omega_min + static_cast<double>(j) * step;
  w.back() = cfg.omega_max;
  return w;
}

Dataset gen_sinusoidal(const SinusoidConfig& cfg) {
  Dataset ds = make_sinusoids(cfg, 1.0);
  ds.provenance = {{"generator", "sinusoidal"}, {"config", to_json(cfg)}};
  return ds;
}

Dataset gen_long_sinusoidal(const SinusoidConfig& cfg, double switch_frac) {
  if (!(switch_frac > 0.0 && switch_frac <= 1.0))
    throw std::invalid_argument("gen_long_sinusoidal: switch_frac must lie in (0, 1]");
  Dataset ds = make_sinusoids(cfg, switch_frac);
  ds.provenance = {{"generator", "long_sinusoidal"},
                   {"config", to_json(cfg)},
                   {"switch_frac", switch_frac}};
  return ds;
}

nlohmann::json to_json(const SpatialConfig& cfg) {
  return {{"num_samples", cfg.num_samples},
          {"length", cfg.length},
          {"t_end", cfg.t_end},
          {"equal_frac", cfg.equal_frac},
          {"seed", cfg.seed},
          {"split", {cfg.fractions.train, cfg.fractions.val, cfg.fractions.test}}};
}

std::size_t spatial_tail_points(const SpatialConfig& cfg) {
  return static_cast<std::size_t>(
      std::ceil(cfg.equal_frac * static_cast<double>(cfg.length) - 1e-9));
}

Dataset gen_spatial_pair(const SpatialConfig& cfg) {
  if (cfg.length < 100) throw std::invalid_argument("gen_spatial_pair: length must be >= 100");
  if (cfg.num_samples < 2) throw std::invalid_argument("gen_spatial_pair: need >= 2 samples");
  if (!(cfg.equal_frac > 0.0 && cfg.equal_frac < 1.0))
    throw std::invalid_argument("gen_spatial_pair: equal_frac must lie in (0, 1)");
  const std::size_t tail = spatial_tail_points(cfg);
  const auto times = uniform_times(cfg.length, cfg.t_end);

  Dataset ds;
  ds.task = Task::kClassify;
  ds.num_outputs = 2;
  for (std::size_t s = 0; s < cfg.num_samples; ++s) {
    std::mt19937_64 rng(derive_seed(cfg.seed, s, 2));
    std::uniform_real_distribution<double> u(0.0, kTwoPi);
    const double w1 = u(rng), v1 = u(rng), w2 = u(rng), v2 = u(rng);
    const bool positive = s % 2 == 0;
    TimeSeries ts;
    ts.dim = 2;
    ts.times = times;
    ts.values.resize(2 * times.size());
    ts.target = positive ? 1 : 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      ts.values[2 * i] = std::sin(w1 * times[i] + v1);
      ts.values[2 * i + 1] = std::sin(w2 * times[i] + v2);
    }
    if (positive) {
      for (std::size_t i = times.size() - tail; i < times.size(); ++i)
        ts.values[2 * i + 1] = ts.values[2 * i];
    }
    ds.samples.push_back(std::move(ts));
  }
  ds.splits = make_splits(ds, cfg.fractions, derive_seed(cfg.seed, 0xC0FFEE));
  ds.provenance = {{"generator", "spatial_pair"}, {"config", to_json(cfg)}};
  return ds;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                      : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(std::string_view field, std::size_t row, const char* column) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(v))
    throw std::invalid_argument("row " + std::to_string(row) + ": cannot parse " + column +
                                " value '" + std::string(field) + "'");
  return v;
}

struct RawRow {
  std::size_t row;
  double t;
  std::vector<double> x;
  std::vector<double> y;
};

}  // namespace

Dataset parse_csv(const std::string& text, const CsvSchema& schema, std::uint64_t split_seed,
                  const SplitFractions& fractions) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line);
  if (header.size() < 3 || header[0] != "series_id" || header[1] != "t")
    throw std::invalid_argument("CSV header must start with 'series_id,t,x1'");
  std::size_t dim = 0;
  while (2 + dim < header.size() && header[2 + dim] == "x" + std::to_string(dim + 1)) ++dim;
  if (dim == 0) throw std::invalid_argument("CSV header is missing column 'x1'");
  std::size_t ny = 0;
  const std::size_t rest = header.size() - 2 - dim;
  if (rest == 1 && header.back() == "y") {
    ny = 1;
  } else {
    while (ny < rest && header[2 + dim + ny] == "y" + std::to_string(ny + 1)) ++ny;
    if (ny != rest)
      throw std::invalid_argument("CSV header has unexpected column '" +
                                  std::string(header[2 + dim + ny]) + "'");
  }
  if (schema.task == Task::kClassify && ny > 1)
    throw std::invalid_argument("classification CSV must have a single 'y' column");
  if (ny == 0) throw std::invalid_argument("CSV header is missing target column 'y'");

  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<RawRow>> groups;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw std::invalid_argument("row " + std::to_string(row) + ": expected " +
                                  std::to_string(header.size()) + " fields, found " +
                                  std::to_string(fields.size()));
    RawRow r{row, parse_number(fields[1], row, "t"), {}, {}};
    for (std::size_t c = 0; c < dim; ++c) r.x.push_back(parse_number(fields[2 + c], row, "x"));
    for (std::size_t c = 0; c < ny; ++c) r.y.push_back(parse_number(fields[2 + dim + c], row, "y"));
    std::string id(fields[0]);
    auto [it, inserted] = groups.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.push_back(std::move(r));
  }
  if (order.empty()) throw std::invalid_argument("CSV has no data rows");

  Dataset ds;
  ds.task = schema.task;
  int max_label = -1;
  for (const auto& id : order) {
    auto& rows = groups[id];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const RawRow& a, const RawRow& b) { return a.t < b.t; });
    TimeSeries ts;
    ts.dim = dim;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i > 0 && !(rows[i].t > rows[i - 1].t))
        throw std::invalid_argument("series '" + id + "': timestamp at row " +
                                    std::to_string(rows[i].row) +
                                    " is not strictly greater than the previous one (row " +
                                    std::to_string(rows[i - 1].row) + ")");
      if (rows[i].y != rows.front().y)
        throw std::invalid_argument("series '" + id + "': target changes at row " +
                                    std::to_string(rows[i].row));
      ts.times.push_back(rows[i].t);
      ts.values.insert(ts.values.end(), rows[i].x.begin(), rows[i].x.end());
    }
    if (ts.points() < 2)
      throw std::invalid_argument("series '" + id + "' has fewer than 2 points");
    if (schema.task == Task::kClassify) {
      const double y = rows.front().y[0];
      if (y < 0 || y != std::floor(y))
        throw std::invalid_argument("series '" + id + "': class label must be a nonnegative integer");
      ts.target = static_cast<int>(y);
      max_label = std::max(max_label, static_cast<int>(y));
    } else {
      ts.target = rows.front().y;
    }
    ds.samples.push_back(std::move(ts));
  }
  if (schema.task == Task::kClassify) {
    ds.num_outputs = schema.num_outputs == 0 ? static_cast<std::size_t>(max_label + 1)
                                             : schema.num_outputs;
    if (static_cast<std::size_t>(max_label) >= ds.num_outputs)
      throw std::invalid_argument("class label " + std::to_string(max_label) +
                                  " out of range for " + std::to_string(ds.num_outputs) +
                                  " classes");
  } else {
    ds.num_outputs = ny;
    if (schema.num_outputs != 0 && schema.num_outputs != ny)
      throw std::invalid_argument("CSV has " + std::to_string(ny) + " targets, schema expects " +
                                  std::to_string(schema.num_outputs));
  }
  ds.splits = make_splits(ds, fractions, split_seed);
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema,
                 std::uint64_t split_seed, const SplitFractions& fractions) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  Dataset ds = parse_csv(text, schema, split_seed, fractions);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  ds.provenance = {{"source", path.string()}, {"fnv1a64", h}};
  return ds;
}

std::string to_csv(const Dataset& ds) {
  std::string out = "series_id,t";
  const std::size_t d = ds.dim();
  for (std::size_t c = 0; c < d; ++c) out += ",x" + std::to_string(c + 1);
  if (ds.task == Task::kClassify || ds.num_outputs == 1) {
    out += ",y";
  } else {
    for (std::size_t c = 0; c < ds.num_outputs; ++c) out += ",y" + std::to_string(c + 1);
  }
  out += '\n';
  for (std::size_t s = 0; s < ds.samples.size(); ++s) {
    const TimeSeries& ts = ds.samples[s];
    std::string target;
    if (const int* c = std::get_if<int>(&ts.target)) {
      target = "," + std::to_string(*c);
    } else if (const auto* v = std::get_if<std::vector<double>>(&ts.target)) {
      for (double y : *v) target += "," + format_double(y);
    }
    const std::string id = "s" + std::to_string(s);
    for (std::size_t i = 0; i < ts.points(); ++i) {
      out += id;
      out += ',';
      out += format_double(ts.times[i]);
      for (double x : ts.point(i)) {
        out += ',';
        out += format_double(x);
      }
      out += target;
      out += '\n';
    }
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << to_csv(ds);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace rformer
