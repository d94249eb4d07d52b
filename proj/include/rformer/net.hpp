#pragma once
// Single-head Transformer encoder over a token matrix, with hand-written
// reverse-mode gradients.
//
//   tokens -> linear embed (+ sinusoidal position table)
//          -> [attention + residual + layer norm -> GELU FFN + residual +
//              layer norm] x num_layers
//          -> mean over tokens -> linear head
//
// Gradients stop at the token matrix.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rformer/features.hpp"

namespace rformer {

enum class Task { kClassify, kRegress };

std::string_view to_string(Task task);
Task parse_task(std::string_view name);

struct ModelConfig {
  std::size_t input_dim = 0;   // token width
  std::size_t model_dim = 32;
  std::size_t ff_dim = 0;      // 0 means 4 * model_dim
  std::size_t output_dim = 0;  // classes, or regression outputs
  std::size_t num_layers = 1;
  bool positional_encoding = true;
  Task task = Task::kClassify;
  double ln_eps = 1e-5;

  std::size_t ffn_width() const { return ff_dim == 0 ? 4 * model_dim : ff_dim; }
};

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  void resize(std::size_t r, std::size_t c) {
    rows = r;
    cols = c;
    data.assign(r * c, 0.0);
  }
  // Sets the shape without clearing; contents are unspecified.
  void reshape(std::size_t r, std::size_t c) {
    rows = r;
    cols = c;
    data.resize(r * c);
  }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
};

struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;

  std::size_t size() const { return value.size(); }
};

struct BlockParams {
  std::size_t wq, wk, wv, wo;
  std::size_t ln1_gain, ln1_bias;
  std::size_t ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  std::size_t ln2_gain, ln2_bias;
};

class ModelParams {
 public:
  explicit ModelParams(const ModelConfig& cfg);

  // Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases and layer-norm
  // shifts zero; layer-norm gains one.
  void init(std::uint64_t seed);
  void zero_grad();

  const ModelConfig& config() const { return cfg_; }
  std::vector<Param>& tensors() { return tensors_; }
  const std::vector<Param>& tensors() const { return tensors_; }
  Param& at(std::size_t i) { return tensors_[i]; }
  const Param& at(std::size_t i) const { return tensors_[i]; }
  Param* find(std::string_view name);
  std::size_t parameter_count() const;

  std::size_t embed_w() const { return embed_w_; }
  std::size_t embed_b() const { return embed_b_; }
  std::size_t head_w() const { return head_w_; }
  std::size_t head_b() const { return head_b_; }
  const std::vector<BlockParams>& blocks() const { return blocks_; }

  // Bumped whenever values change through an optimizer step; forward caches
  // record it so a stale cache is detected in backward.
  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

 private:
  std::size_t add(std::string name, std::vector<std::size_t> shape);

  ModelConfig cfg_;
  std::vector<Param> tensors_;
  std::size_t embed_w_ = 0, embed_b_ = 0, head_w_ = 0, head_b_ = 0;
  std::vector<BlockParams> blocks_;
  std::uint64_t version_ = 0;
};

// PE(pos, 2i) = sin(pos / 10000^(2i/dim)), PE(pos, 2i+1) = cos(...).
Matrix sinusoidal_encoding(std::size_t tokens, std::size_t dim);

struct AttentionCache {
  Matrix input, q, k, v, probs, mixed, out;
};

struct LayerNormCache {
  Matrix normalized;
  std::vector<double> inv_std;
};

struct BlockCache {
  AttentionCache attn;
  Matrix resid1;
  LayerNormCache ln1;
  Matrix h1, pre_act, act;
  Matrix resid2;
  LayerNormCache ln2;
  Matrix h2;
};

struct ForwardCache {
  bool valid = false;
  std::uint64_t params_version = 0;
  const FeatureMatrix* features = nullptr;
  Matrix embedded;
  std::vector<BlockCache> blocks;
  std::vector<double> pooled;
  std::vector<double> output;
  // Multiply-accumulates spent in QK^T and PV during the last forward pass.
  std::uint64_t attention_macs = 0;
  Matrix position_table;  // reused while token count and width are unchanged
};

// Single-head scaled dot-product attention followed by the output projection:
// softmax(Q K^T / sqrt(d')) V W_o with Q, K, V = X W_{q,k,v}.
const Matrix& attention_forward(const Matrix& tokens, const ModelParams& params,
                                const BlockParams& block, AttentionCache& cache);

// Runs the full pipeline; cache keeps what backward needs. Throws
// std::runtime_error when the output is not finite.
std::span<const double> model_forward(const FeatureMatrix& features,
                                      const ModelParams& params, ForwardCache& cache);

struct LossResult {
  double value = 0.0;
  std::vector<double> grad;  // d loss / d prediction
};

LossResult cross_entropy(std::span<const double> logits, int target);
LossResult mean_squared_error(std::span<const double> pred,
                              std::span<const double> target);
LossResult loss(std::span<const double> pred, const Target& target, Task task);

// Accumulates (+=) parameter gradients for d loss / d output = out_grad.
void model_backward(const ForwardCache& cache, std::span<const double> out_grad,
                    ModelParams& params);

}  // namespace rformer
