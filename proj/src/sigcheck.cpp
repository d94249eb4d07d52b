#include "rformer/sigcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "rformer/sigcore.hpp"

namespace rformer {

double relative_level_error(const TruncatedSignature& a, const TruncatedSignature& b,
                            double one_var) {
  if (a.dim() != b.dim() || a.depth() != b.depth())
    throw std::invalid_argument("relative_level_error: shape mismatch");
  double worst = 0.0;
  double term_scale = 1.0;
  for (std::size_t k = 1; k <= a.depth(); ++k) {
    term_scale *= one_var / static_cast<double>(k);
    const auto la = a.level(k);
    const auto lb = b.level(k);
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < la.size(); ++i) {
      diff = std::max(diff, std::abs(la[i] - lb[i]));
      scale = std::max(scale, std::abs(lb[i]));
    }
    scale = std::max(scale, term_scale);
    worst = std::max(worst, scale > 0.0 ? diff / scale : diff);
  }
  return worst;
}

namespace {

struct RandomPath {
  std::size_t dim;
  std::size_t depth;
  std::vector<double> points;  // row-major
  std::size_t count() const { return points.size() / dim; }
  PathView view() const { return {points, dim}; }
  PathView slice(std::size_t first, std::size_t last) const {  // inclusive
    return {std::span<const double>(points).subspan(first * dim, (last - first + 1) * dim), dim};
  }
};

RandomPath random_path(std::mt19937_64& rng, const SigCheckConfig& cfg) {
  std::uniform_int_distribution<std::size_t> pick_dim(1, cfg.max_dim);
  std::uniform_int_distribution<std::size_t> pick_depth(1, cfg.max_depth);
  std::uniform_int_distribution<std::size_t> pick_segments(1, cfg.max_segments);
  std::normal_distribution<double> step(0.0, 1.0);
  RandomPath p{pick_dim(rng), pick_depth(rng), {}};
  const std::size_t segments = pick_segments(rng);
  p.points.assign((segments + 1) * p.dim, 0.0);
  for (std::size_t i = 0; i < p.dim; ++i) p.points[i] = step(rng);
  for (std::size_t s = 1; s <= segments; ++s)
    for (std::size_t i = 0; i < p.dim; ++i)
      p.points[s * p.dim + i] = p.points[(s - 1) * p.dim + i] + step(rng);
  return p;
}

void record(PropertyResult& r, double err, double tol) {
  ++r.cases;
  r.max_error = std::max(r.max_error, err);
  if (!(err <= tol)) ++r.failures;
}

}  // namespace

std::vector<PropertyResult> run_signature_checks(const SigCheckConfig& cfg) {
  if (cfg.max_dim == 0 || cfg.max_depth == 0 || cfg.max_segments == 0)
    throw std::invalid_argument("signature checks need positive dim, depth and segment bounds");
  PropertyResult chen{"chen_split"}, assoc{"associativity"}, collinear{"collinear_insertion"},
      decay{"factorial_decay"};
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    const RandomPath p = random_path(rng, cfg);
    const std::size_t last = p.count() - 1;
    const TruncatedSignature whole = sig_path(p.view(), p.depth);
    const double norm = one_variation(p.view());

    if (last >= 2) {
      const std::size_t cut = std::uniform_int_distribution<std::size_t>(1, last - 1)(rng);
      const TruncatedSignature joined =
          chen_product(sig_path(p.slice(0, cut), p.depth), sig_path(p.slice(cut, last), p.depth));
      record(chen, relative_level_error(joined, whole, norm), cfg.tolerance);
    }
    if (last >= 3) {
      std::uniform_int_distribution<std::size_t> pick(1, last - 1);
      std::size_t c1 = pick(rng), c2 = pick(rng);
      if (c1 > c2) std::swap(c1, c2);
      if (c1 != c2) {
        const auto a = sig_path(p.slice(0, c1), p.depth);
        const auto b = sig_path(p.slice(c1, c2), p.depth);
        const auto c = sig_path(p.slice(c2, last), p.depth);
        record(assoc, relative_level_error(chen_product(chen_product(a, b), c),
                                           chen_product(a, chen_product(b, c)), norm),
               cfg.tolerance);
      }
    }
    {
      // Subdivide a random segment at a random interior point.
      const std::size_t seg = std::uniform_int_distribution<std::size_t>(0, last - 1)(rng);
      const double lambda = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
      std::vector<double> pts(p.points.begin(), p.points.begin() + (seg + 1) * p.dim);
      for (std::size_t i = 0; i < p.dim; ++i) {
        const double x0 = p.points[seg * p.dim + i];
        const double x1 = p.points[(seg + 1) * p.dim + i];
        pts.push_back(x0 + lambda * (x1 - x0));
      }
      pts.insert(pts.end(), p.points.begin() + (seg + 1) * p.dim, p.points.end());
      const TruncatedSignature refined = sig_path(PathView{pts, p.dim}, p.depth);
      record(collinear, relative_level_error(refined, whole, norm), cfg.tolerance);
    }
    {
      ++decay.cases;
      double worst = 0.0;
      double bound = 1.0;
      for (std::size_t k = 1; k <= p.depth; ++k) {
        bound *= norm / static_cast<double>(k);
        double mx = 0.0;
        for (double v : whole.level(k)) mx = std::max(mx, std::abs(v));
        if (bound > 0.0) worst = std::max(worst, mx / bound);
      }
      decay.max_error = std::max(decay.max_error, worst);
      if (!decay_bound(whole, norm)) ++decay.failures;
    }
  }
  return {chen, assoc, collinear, decay};
}

}  // namespace rformer
