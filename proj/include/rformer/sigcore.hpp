#pragma once
// Truncated signatures of piecewise-linear paths.
//
// A signature truncated at depth n over R^d is stored as n dense tensors laid
// out back to back; level k holds d^k entries in row-major multi-index order
// (i1, ..., ik). The level-0 term is always 1 and is not stored.

#include <cstddef>
#include <span>
#include <vector>

namespace rformer {

class TruncatedSignature {
 public:
  // The identity element: every stored level is zero.
  TruncatedSignature(std::size_t dim, std::size_t depth);

  std::size_t dim() const { return dim_; }
  std::size_t depth() const { return depth_; }

  // Levels are 1-based: level(1) is the increment.
  std::span<double> level(std::size_t k);
  std::span<const double> level(std::size_t k) const;

  // All stored levels concatenated, level 1 first.
  std::span<const double> flat() const { return data_; }
  std::span<double> flat() { return data_; }
  std::size_t size() const { return data_.size(); }

  void set_identity();
  bool all_finite() const;

  // d(d^n - 1)/(d - 1), or n when d == 1.
  static std::size_t feature_count(std::size_t dim, std::size_t depth);

 private:
  std::size_t offset(std::size_t k) const;

  std::size_t dim_;
  std::size_t depth_;
  std::vector<double> data_;
};

struct Segment {
  std::vector<double> start_value;
  std::vector<double> end_value;
  double start_time = 0.0;
  double end_time = 1.0;
};

// Row-major view of a sequence of points in R^dim.
struct PathView {
  std::span<const double> data;
  std::size_t dim = 0;

  std::size_t points() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const double> point(std::size_t i) const {
    return data.subspan(i * dim, dim);
  }
};

// Closed form for a linear piece: level k is (delta)^{(x)k} / k!.
TruncatedSignature sig_segment(const Segment& seg, std::size_t depth);
TruncatedSignature sig_increment(std::span<const double> delta,
                                 std::size_t depth);
void sig_increment_into(std::span<const double> delta, TruncatedSignature& out);

// Truncated tensor product. `out` must not alias `a` or `b` and must have
// the same dim and depth.
void chen_product_into(const TruncatedSignature& a, const TruncatedSignature& b,
                       TruncatedSignature& out);
TruncatedSignature chen_product(const TruncatedSignature& a,
                                const TruncatedSignature& b);

// Signature of the piecewise-linear interpolation through `path`, folding the
// segment signatures left to right.
TruncatedSignature sig_path(PathView path, std::size_t depth);
TruncatedSignature sig_path(const std::vector<std::vector<double>>& points,
                            std::size_t depth);

// Sum of Euclidean norms of consecutive increments.
double one_variation(PathView path);

// True iff max |level k entry| <= norm^k / k! for every stored level. A small
// relative slack absorbs rounding in the equality case.
bool decay_bound(const TruncatedSignature& sig, double one_var_norm);

}  // namespace rformer
