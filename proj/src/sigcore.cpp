#include "rformer/sigcore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rformer/simd/kernels.hpp"

namespace rformer {

namespace {

std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) r *= base;
  return r;
}

void check_shape(const TruncatedSignature& a, const TruncatedSignature& b,
                 const char* what) {
  if (a.dim() != b.dim() || a.depth() != b.depth()) {
    throw std::invalid_argument(std::string(what) + ": signature shape mismatch (dim " +
                                std::to_string(a.dim()) + " vs " +
                                std::to_string(b.dim()) + ", depth " +
                                std::to_string(a.depth()) + " vs " +
                                std::to_string(b.depth()) + ")");
  }
}

}  // namespace

TruncatedSignature::TruncatedSignature(std::size_t dim, std::size_t depth)
    : dim_(dim), depth_(depth) {
  if (dim == 0) throw std::invalid_argument("signature dimension must be positive");
  if (depth == 0) throw std::invalid_argument("signature depth must be >= 1");
  data_.assign(feature_count(dim, depth), 0.0);
}

std::size_t TruncatedSignature::feature_count(std::size_t dim, std::size_t depth) {
  if (dim == 1) return depth;
  return dim * (ipow(dim, depth) - 1) / (dim - 1);
}

std::size_t TruncatedSignature::offset(std::size_t k) const {
  // sum_{j<k} d^j for j >= 1
  return k <= 1 ? 0 : feature_count(dim_, k - 1);
}

std::span<double> TruncatedSignature::level(std::size_t k) {
  return std::span<double>(data_).subspan(offset(k), ipow(dim_, k));
}

std::span<const double> TruncatedSignature::level(std::size_t k) const {
  return std::span<const double>(data_).subspan(offset(k), ipow(dim_, k));
}

void TruncatedSignature::set_identity() { std::fill(data_.begin(), data_.end(), 0.0); }

bool TruncatedSignature::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

void sig_increment_into(std::span<const double> delta, TruncatedSignature& out) {
  if (delta.size() != out.dim())
    throw std::invalid_argument("sig_increment: increment has wrong dimension");
  const std::size_t d = out.dim();
  auto l1 = out.level(1);
  std::copy(delta.begin(), delta.end(), l1.begin());
  // level k = level(k-1) (x) delta / k
  for (std::size_t k = 2; k <= out.depth(); ++k) {
    auto prev = out.level(k - 1);
    auto cur = out.level(k);
    const double inv_k = 1.0 / static_cast<double>(k);
    for (std::size_t i = 0; i < prev.size(); ++i) {
      const double p = prev[i] * inv_k;
      double* dst = cur.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] = p * delta[j];
    }
  }
}

TruncatedSignature sig_increment(std::span<const double> delta, std::size_t depth) {
  TruncatedSignature out(delta.size(), depth);
  sig_increment_into(delta, out);
  return out;
}

TruncatedSignature sig_segment(const Segment& seg, std::size_t depth) {
  if (seg.start_value.size() != seg.end_value.size())
    throw std::invalid_argument("sig_segment: endpoint dimension mismatch");
  if (seg.start_value.empty())
    throw std::invalid_argument("sig_segment: empty endpoints");
  if (!(seg.start_time < seg.end_time))
    throw std::invalid_argument("sig_segment: start_time must precede end_time");
  std::vector<double> delta(seg.start_value.size());
  for (std::size_t i = 0; i < delta.size(); ++i)
    delta[i] = seg.end_value[i] - seg.start_value[i];
  return sig_increment(delta, depth);
}

void chen_product_into(const TruncatedSignature& a, const TruncatedSignature& b,
                       TruncatedSignature& out) {
  check_shape(a, b, "chen_product");
  check_shape(a, out, "chen_product");
  if (&out == &a || &out == &b)
    throw std::invalid_argument("chen_product: output aliases an input");

  const auto& k_ = simd::active();
  for (std::size_t k = a.depth(); k > 0; --k) {
    auto dst = out.level(k);
    auto ak = a.level(k);
    auto bk = b.level(k);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = ak[i] + bk[i];
    // A_j (x) B_{k-j}: each entry of A_j scales a contiguous copy of B_{k-j}.
    for (std::size_t j = 1; j < k; ++j) {
      auto aj = a.level(j);
      auto bm = b.level(k - j);
      const std::size_t stride = bm.size();
      for (std::size_t i = 0; i < aj.size(); ++i) {
        if (aj[i] != 0.0) k_.axpy(aj[i], bm.data(), dst.data() + i * stride, stride);
      }
    }
  }
}

TruncatedSignature chen_product(const TruncatedSignature& a,
                                const TruncatedSignature& b) {
  TruncatedSignature out(a.dim(), a.depth());
  chen_product_into(a, b, out);
  return out;
}

TruncatedSignature sig_path(PathView path, std::size_t depth) {
  if (path.dim == 0) throw std::invalid_argument("sig_path: zero dimension");
  if (path.data.size() % path.dim != 0)
    throw std::invalid_argument("sig_path: ragged point data");
  const std::size_t n = path.points();
  if (n < 2) throw std::invalid_argument("sig_path: need at least 2 points");

  const std::size_t d = path.dim;
  std::vector<double> delta(d);
  auto increment = [&](std::size_t i) {
    auto p0 = path.point(i);
    auto p1 = path.point(i + 1);
    for (std::size_t c = 0; c < d; ++c) delta[c] = p1[c] - p0[c];
  };

  TruncatedSignature acc(d, depth);
  increment(0);
  sig_increment_into(delta, acc);
  if (n == 2) return acc;

  TruncatedSignature seg(d, depth);
  TruncatedSignature next(d, depth);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    increment(i);
    sig_increment_into(delta, seg);
    chen_product_into(acc, seg, next);
    std::swap(acc, next);
  }
  return acc;
}

TruncatedSignature sig_path(const std::vector<std::vector<double>>& points,
                            std::size_t depth) {
  if (points.empty()) throw std::invalid_argument("sig_path: need at least 2 points");
  const std::size_t d = points.front().size();
  std::vector<double> flat;
  flat.reserve(points.size() * d);
  for (const auto& p : points) {
    if (p.size() != d) throw std::invalid_argument("sig_path: inconsistent point dimension");
    flat.insert(flat.end(), p.begin(), p.end());
  }
  return sig_path(PathView{flat, d}, depth);
}

double one_variation(PathView path) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < path.points(); ++i) {
    auto p0 = path.point(i);
    auto p1 = path.point(i + 1);
    double sq = 0.0;
    for (std::size_t c = 0; c < path.dim; ++c) sq += (p1[c] - p0[c]) * (p1[c] - p0[c]);
    total += std::sqrt(sq);
  }
  return total;
}

bool decay_bound(const TruncatedSignature& sig, double one_var_norm) {
  if (!(one_var_norm >= 0.0))
    throw std::invalid_argument("decay_bound: norm must be nonnegative");
  double bound = 1.0;
  for (std::size_t k = 1; k <= sig.depth(); ++k) {
    bound *= one_var_norm / static_cast<double>(k);
    double mx = 0.0;
    for (double v : sig.level(k)) mx = std::max(mx, std::abs(v));
    if (mx > bound * (1.0 + 1e-12) + 1e-300) return false;
  }
  return true;
}

}  // namespace rformer
