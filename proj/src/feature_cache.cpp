#include "rformer/feature_cache.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace rformer {
namespace {

constexpr char kMagic[8] = {'R', 'F', 'M', 'C', 'A', 'C', 'H', 'E'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(std::span<const unsigned char> bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    buf_.insert(buf_.end(), raw, raw + sizeof(T));
  }
  void put_doubles(std::span<const double> v) {
    put<std::uint64_t>(v.size());
    for (double x : v) put(std::bit_cast<std::uint64_t>(x));
  }
  void put_meta(const FeatureMeta& m) {
    put<std::uint8_t>(static_cast<std::uint8_t>(m.mode));
    put<std::uint32_t>(static_cast<std::uint32_t>(m.depth));
    put<std::uint8_t>(m.univariate);
    put<std::uint8_t>(m.time_augmented);
  }
  std::vector<unsigned char>& bytes() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> b) : b_(b) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > b_.size()) throw CacheError("feature cache truncated");
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, b_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
  }
  std::vector<double> get_doubles() {
    const auto n = get<std::uint64_t>();
    if (n > (b_.size() - pos_) / 8) throw CacheError("feature cache truncated");
    std::vector<double> v(n);
    for (auto& x : v) x = std::bit_cast<double>(get<std::uint64_t>());
    return v;
  }
  FeatureMeta get_meta() {
    FeatureMeta m;
    const auto mode = get<std::uint8_t>();
    if (mode > static_cast<std::uint8_t>(FeatureMode::kRawTokens))
      throw CacheError("feature cache has an invalid mode tag");
    m.mode = static_cast<FeatureMode>(mode);
    m.depth = get<std::uint32_t>();
    m.univariate = get<std::uint8_t>() != 0;
    m.time_augmented = get<std::uint8_t>() != 0;
    return m;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const unsigned char> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t dataset_hash(std::span<const TimeSeries> series) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& ts : series) {
    const std::uint64_t s = series_hash(ts);
    for (int i = 0; i < 8; ++i) {
      h ^= (s >> (8 * i)) & 0xffu;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::vector<unsigned char> encode_feature_cache(const FeatureCache& cache) {
  if (cache.series_hashes.size() != cache.features.size())
    throw std::invalid_argument("feature cache: hash and feature counts differ");
  Writer w;
  for (char c : kMagic) w.put(c);
  w.put(kVersion);
  w.put(cache.dataset_hash);
  w.put_meta(FeatureMeta{cache.config.mode, cache.config.depth, cache.config.univariate,
                         cache.config.time_augment});
  w.put<std::uint64_t>(cache.config.num_windows);
  w.put_doubles(cache.grid.boundaries);
  w.put<std::uint64_t>(cache.features.size());
  for (std::size_t i = 0; i < cache.features.size(); ++i) {
    const FeatureMatrix& m = cache.features[i];
    w.put(cache.series_hashes[i]);
    w.put<std::uint64_t>(m.rows);
    w.put<std::uint64_t>(m.cols);
    w.put_meta(m.meta);
    w.put_doubles(m.data);
  }
  const std::uint64_t sum = fnv1a(w.bytes());
  w.put(sum);
  return std::move(w.bytes());
}

FeatureCache decode_feature_cache(std::span<const unsigned char> bytes) {
  if (bytes.size() < sizeof(kMagic) + 12) throw CacheError("feature cache too short");
  const std::size_t body = bytes.size() - 8;
  {
    Reader tail(bytes.subspan(body));
    if (tail.get<std::uint64_t>() != fnv1a(bytes.first(body)))
      throw CacheError("feature cache checksum mismatch");
  }
  Reader r(bytes.first(body));
  for (char c : kMagic)
    if (r.get<char>() != c) throw CacheError("not a feature cache file");
  if (r.get<std::uint32_t>() != kVersion) throw CacheError("unsupported feature cache version");

  FeatureCache cache;
  cache.dataset_hash = r.get<std::uint64_t>();
  const FeatureMeta cm = r.get_meta();
  cache.config.mode = cm.mode;
  cache.config.depth = cm.depth;
  cache.config.univariate = cm.univariate;
  cache.config.time_augment = cm.time_augmented;
  cache.config.num_windows = r.get<std::uint64_t>();
  cache.grid.boundaries = r.get_doubles();
  const auto n = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) {
    cache.series_hashes.push_back(r.get<std::uint64_t>());
    FeatureMatrix m;
    m.rows = r.get<std::uint64_t>();
    m.cols = r.get<std::uint64_t>();
    m.meta = r.get_meta();
    m.data = r.get_doubles();
    if (m.data.size() != m.rows * m.cols) throw CacheError("feature cache matrix size mismatch");
    cache.features.push_back(std::move(m));
  }
  if (r.pos() != body) throw CacheError("feature cache has trailing bytes");
  return cache;
}

void write_feature_cache(const std::filesystem::path& path, const FeatureCache& cache) {
  const auto bytes = encode_feature_cache(cache);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

FeatureCache read_feature_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CacheError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode_feature_cache(bytes);
}

}  // namespace rformer
