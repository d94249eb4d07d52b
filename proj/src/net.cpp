#include "rformer/net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "rformer/simd/kernels.hpp"

namespace rformer {

std::string_view to_string(Task task) {
  return task == Task::kClassify ? "classify" : "regress";
}

Task parse_task(std::string_view name) {
  if (name == "classify") return Task::kClassify;
  if (name == "regress") return Task::kRegress;
  throw std::invalid_argument("unknown task '" + std::string(name) + "'");
}

ModelParams::ModelParams(const ModelConfig& cfg) : cfg_(cfg) {
  if (cfg.input_dim == 0 || cfg.model_dim == 0 || cfg.output_dim == 0)
    throw std::invalid_argument("model config has a zero dimension");
  const std::size_t m = cfg.model_dim;
  const std::size_t f = cfg.ffn_width();
  embed_w_ = add("embed.weight", {cfg.input_dim, m});
  embed_b_ = add("embed.bias", {m});
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    BlockParams b{};
    b.wq = add(p + "attn.wq", {m, m});
    b.wk = add(p + "attn.wk", {m, m});
    b.wv = add(p + "attn.wv", {m, m});
    b.wo = add(p + "attn.wo", {m, m});
    b.ln1_gain = add(p + "norm1.gain", {m});
    b.ln1_bias = add(p + "norm1.bias", {m});
    b.ffn_w1 = add(p + "ffn.w1", {m, f});
    b.ffn_b1 = add(p + "ffn.b1", {f});
    b.ffn_w2 = add(p + "ffn.w2", {f, m});
    b.ffn_b2 = add(p + "ffn.b2", {m});
    b.ln2_gain = add(p + "norm2.gain", {m});
    b.ln2_bias = add(p + "norm2.bias", {m});
    blocks_.push_back(b);
  }
  head_w_ = add("head.weight", {m, cfg.output_dim});
  head_b_ = add("head.bias", {cfg.output_dim});
  for (const auto& b : blocks_) {
    std::fill(tensors_[b.ln1_gain].value.begin(), tensors_[b.ln1_gain].value.end(), 1.0);
    std::fill(tensors_[b.ln2_gain].value.begin(), tensors_[b.ln2_gain].value.end(), 1.0);
  }
}

std::size_t ModelParams::add(std::string name, std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  tensors_.push_back(Param{std::move(name), std::move(shape), std::vector<double>(n, 0.0),
                           std::vector<double>(n, 0.0)});
  return tensors_.size() - 1;
}

void ModelParams::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : tensors_) {
    if (p.shape.size() == 2) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(p.shape[0]));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (auto& v : p.value) v = u(rng);
    } else {
      const bool gain = p.name.ends_with(".gain");
      std::fill(p.value.begin(), p.value.end(), gain ? 1.0 : 0.0);
    }
  }
  zero_grad();
  ++version_;
}

void ModelParams::zero_grad() {
  for (auto& p : tensors_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

Param* ModelParams::find(std::string_view name) {
  for (auto& p : tensors_)
    if (p.name == name) return &p;
  return nullptr;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : tensors_) n += p.size();
  return n;
}

Matrix sinusoidal_encoding(std::size_t tokens, std::size_t dim) {
  Matrix pe(tokens, dim);
  for (std::size_t pos = 0; pos < tokens; ++pos) {
    for (std::size_t i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
      const double angle = static_cast<double>(pos) * freq;
      pe(pos, i) = std::sin(angle);
      if (i + 1 < dim) pe(pos, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

namespace {

const simd::KernelTable& K() { return simd::active(); }

constexpr std::size_t kRowBlock = 8;

// C = A * B (or C += A * B when accumulate)
void matmul(const Matrix& a, const double* b, std::size_t b_cols, Matrix& c,
            bool accumulate = false) {
  if (!accumulate) c.resize(a.rows, b_cols);
  K().gemm(a.rows, b_cols, a.cols, a.data.data(), a.cols, b, b_cols, c.data.data(), c.cols);
}

void transpose(const double* src, std::size_t rows, std::size_t cols, Matrix& dst) {
  dst.resize(cols, rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst.data[c * rows + r] = src[r * cols + c];
}

// out += A^T * B, A: n x p, B: n x q, out: p x q
void matmul_tn_acc(const Matrix& a, const Matrix& b, double* out) {
  K().gemm_tn(a.cols, b.cols, a.rows, a.data.data(), a.cols, b.data.data(), b.cols, out,
              b.cols);
}

// C (+)= A * W^T where W is stored p x q (row-major) and A is n x q
void matmul_nt(const Matrix& a, const double* w, std::size_t w_rows, std::size_t w_cols,
               Matrix& c, Matrix& scratch, bool accumulate) {
  transpose(w, w_rows, w_cols, scratch);
  if (!accumulate) c.resize(a.rows, w_rows);
  K().gemm(a.rows, w_rows, a.cols, a.data.data(), a.cols, scratch.data.data(), scratch.cols,
           c.data.data(), c.cols);
}

void add_row_bias(Matrix& x, const std::vector<double>& bias) {
  for (std::size_t r = 0; r < x.rows; ++r) {
    double* row = x.row(r);
    for (std::size_t c = 0; c < x.cols; ++c) row[c] += bias[c];
  }
}

void col_sum_acc(const Matrix& x, std::vector<double>& out) {
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* row = x.row(r);
    for (std::size_t c = 0; c < x.cols; ++c) out[c] += row[c];
  }
}

void layer_norm_forward(const Matrix& x, const std::vector<double>& gain,
                        const std::vector<double>& bias, double eps, LayerNormCache& cache,
                        Matrix& out) {
  const std::size_t n = x.cols;
  cache.normalized.resize(x.rows, n);
  cache.inv_std.assign(x.rows, 0.0);
  out.resize(x.rows, n);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* row = x.row(r);
    double mean = 0.0;
    for (std::size_t c = 0; c < n; ++c) mean += row[c];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    cache.inv_std[r] = inv;
    double* xh = cache.normalized.row(r);
    double* o = out.row(r);
    for (std::size_t c = 0; c < n; ++c) {
      xh[c] = (row[c] - mean) * inv;
      o[c] = xh[c] * gain[c] + bias[c];
    }
  }
}

// dx = inv/n * (n*g - sum(g) - xhat * sum(g*xhat)), g = dy * gain
void layer_norm_backward(const LayerNormCache& cache, const Matrix& dy,
                         const std::vector<double>& gain, std::vector<double>& dgain,
                         std::vector<double>& dbias, Matrix& dx) {
  const std::size_t n = dy.cols;
  dx.resize(dy.rows, n);
  std::vector<double> g(n);
  for (std::size_t r = 0; r < dy.rows; ++r) {
    const double* dyr = dy.row(r);
    const double* xh = cache.normalized.row(r);
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      dgain[c] += dyr[c] * xh[c];
      dbias[c] += dyr[c];
      g[c] = dyr[c] * gain[c];
      sum_g += g[c];
      sum_gx += g[c] * xh[c];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    double* dxr = dx.row(r);
    for (std::size_t c = 0; c < n; ++c)
      dxr[c] = cache.inv_std[r] * (g[c] - inv_n * sum_g - xh[c] * inv_n * sum_gx);
  }
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

inline double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
  return cdf + x * pdf;
}

struct Workspace {
  Matrix t0, t1, t2, t3;
  Matrix d_out, d_h1, d_ffn, d_act, d_resid, d_mixed, d_probs, d_q, d_k, d_v, d_in;
};

Workspace& workspace() {
  thread_local Workspace ws;
  return ws;
}

}  // namespace

const Matrix& attention_forward(const Matrix& tokens, const ModelParams& params,
                                const BlockParams& block, AttentionCache& cache) {
  const std::size_t m = params.config().model_dim;
  if (tokens.cols != m)
    throw std::invalid_argument("attention_forward: token width " + std::to_string(tokens.cols) +
                                " != model dim " + std::to_string(m));
  if (tokens.rows == 0) throw std::invalid_argument("attention_forward: no tokens");
  const std::size_t n = tokens.rows;
  cache.input = tokens;
  matmul(tokens, params.at(block.wq).value.data(), m, cache.q);
  matmul(tokens, params.at(block.wk).value.data(), m, cache.k);
  matmul(tokens, params.at(block.wv).value.data(), m, cache.v);

  // Query rows go through in blocks so each score block stays in cache.
  Matrix& kt = workspace().t0;
  transpose(cache.k.data.data(), n, m, kt);
  Matrix& qs = workspace().t1;
  qs = cache.q;
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (auto& s : qs.data) s *= scale;
  cache.probs.reshape(n, n);
  cache.mixed.resize(n, m);
  for (std::size_t i0 = 0; i0 < n; i0 += kRowBlock) {
    const std::size_t rows = std::min(kRowBlock, n - i0);
    double* p = cache.probs.row(i0);
    std::fill(p, p + rows * n, 0.0);
    K().gemm(rows, n, m, qs.row(i0), m, kt.data.data(), n, p, n);
    K().softmax_rows(p, rows, n, n);
    K().gemm(rows, m, n, p, n, cache.v.data.data(), m, cache.mixed.row(i0), m);
  }
  matmul(cache.mixed, params.at(block.wo).value.data(), m, cache.out);
  return cache.out;
}

std::span<const double> model_forward(const FeatureMatrix& features,
                                      const ModelParams& params, ForwardCache& cache) {
  const ModelConfig& cfg = params.config();
  if (features.cols != cfg.input_dim)
    throw std::invalid_argument("model_forward: feature width " + std::to_string(features.cols) +
                                " != model input dim " + std::to_string(cfg.input_dim));
  if (features.rows == 0) throw std::invalid_argument("model_forward: no tokens");
  const std::size_t n = features.rows;
  const std::size_t m = cfg.model_dim;
  cache.valid = false;
  cache.features = &features;
  cache.params_version = params.version();
  cache.attention_macs = 0;

  Matrix& x = cache.embedded;
  x.resize(n, m);
  K().gemm(n, m, features.cols, features.data.data(), features.cols,
           params.at(params.embed_w()).value.data(), m, x.data.data(), m);
  add_row_bias(x, params.at(params.embed_b()).value);
  if (cfg.positional_encoding) {
    if (cache.position_table.rows != n || cache.position_table.cols != m)
      cache.position_table = sinusoidal_encoding(n, m);
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += cache.position_table.data[i];
  }

  cache.blocks.resize(params.blocks().size());
  const Matrix* in = &x;
  for (std::size_t l = 0; l < params.blocks().size(); ++l) {
    const BlockParams& bp = params.blocks()[l];
    BlockCache& bc = cache.blocks[l];
    const Matrix& attn = attention_forward(*in, params, bp, bc.attn);
    cache.attention_macs += 2ULL * n * n * m;

    bc.resid1 = *in;
    for (std::size_t i = 0; i < attn.data.size(); ++i) bc.resid1.data[i] += attn.data[i];
    layer_norm_forward(bc.resid1, params.at(bp.ln1_gain).value, params.at(bp.ln1_bias).value,
                       cfg.ln_eps, bc.ln1, bc.h1);

    const std::size_t f = cfg.ffn_width();
    matmul(bc.h1, params.at(bp.ffn_w1).value.data(), f, bc.pre_act);
    add_row_bias(bc.pre_act, params.at(bp.ffn_b1).value);
    bc.act.resize(n, f);
    for (std::size_t i = 0; i < bc.pre_act.data.size(); ++i) bc.act.data[i] = gelu(bc.pre_act.data[i]);

    bc.resid2 = bc.h1;
    K().gemm(n, m, f, bc.act.data.data(), f, params.at(bp.ffn_w2).value.data(), m,
             bc.resid2.data.data(), m);
    add_row_bias(bc.resid2, params.at(bp.ffn_b2).value);
    layer_norm_forward(bc.resid2, params.at(bp.ln2_gain).value, params.at(bp.ln2_bias).value,
                       cfg.ln_eps, bc.ln2, bc.h2);
    in = &bc.h2;
  }

  cache.pooled.assign(m, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = in->row(r);
    for (std::size_t c = 0; c < m; ++c) cache.pooled[c] += row[c];
  }
  for (auto& v : cache.pooled) v /= static_cast<double>(n);

  const std::size_t k = cfg.output_dim;
  cache.output = params.at(params.head_b()).value;
  K().gemm(1, k, m, cache.pooled.data(), m, params.at(params.head_w()).value.data(), k,
           cache.output.data(), k);
  for (double v : cache.output) {
    if (!std::isfinite(v))
      throw std::runtime_error("model_forward: non-finite output (diverged parameters or inputs)");
  }
  cache.valid = true;
  return cache.output;
}

LossResult cross_entropy(std::span<const double> logits, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size())
    throw std::out_of_range("cross_entropy: class index " + std::to_string(target) +
                            " out of range for " + std::to_string(logits.size()) + " classes");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  const double lse = mx + std::log(sum);
  LossResult r;
  r.value = lse - logits[static_cast<std::size_t>(target)];
  r.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) r.grad[i] = std::exp(logits[i] - lse);
  r.grad[static_cast<std::size_t>(target)] -= 1.0;
  return r;
}

LossResult mean_squared_error(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty())
    throw std::invalid_argument("mean_squared_error: size mismatch");
  LossResult r;
  r.grad.resize(pred.size());
  const double inv = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - target[i];
    r.value += e * e * inv;
    r.grad[i] = 2.0 * e * inv;
  }
  return r;
}

LossResult loss(std::span<const double> pred, const Target& target, Task task) {
  if (task == Task::kClassify) {
    const int* cls = std::get_if<int>(&target);
    if (cls == nullptr) throw std::invalid_argument("loss: classification needs a class target");
    return cross_entropy(pred, *cls);
  }
  const auto* vec = std::get_if<std::vector<double>>(&target);
  if (vec == nullptr) throw std::invalid_argument("loss: regression needs a vector target");
  return mean_squared_error(pred, *vec);
}

void model_backward(const ForwardCache& cache, std::span<const double> out_grad,
                    ModelParams& params) {
  if (!cache.valid || cache.features == nullptr)
    throw std::logic_error("model_backward: no valid forward cache");
  if (cache.params_version != params.version())
    throw std::logic_error("model_backward: forward cache is stale (parameters changed)");
  const ModelConfig& cfg = params.config();
  if (out_grad.size() != cfg.output_dim)
    throw std::invalid_argument("model_backward: output gradient size mismatch");

  Workspace& ws = workspace();
  const std::size_t m = cfg.model_dim;
  const std::size_t k = cfg.output_dim;
  const std::size_t f = cfg.ffn_width();
  const std::size_t n = cache.embedded.rows;

  // head
  {
    auto& gw = params.at(params.head_w()).grad;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < k; ++j) gw[i * k + j] += cache.pooled[i] * out_grad[j];
    auto& gb = params.at(params.head_b()).grad;
    for (std::size_t j = 0; j < k; ++j) gb[j] += out_grad[j];
  }
  std::vector<double> d_pooled(m, 0.0);
  {
    const auto& w = params.at(params.head_w()).value;
    for (std::size_t i = 0; i < m; ++i) d_pooled[i] = K().dot(w.data() + i * k, out_grad.data(), k);
  }
  Matrix& d_x = ws.d_out;
  d_x.resize(n, m);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) d_x(r, c) = d_pooled[c] / static_cast<double>(n);

  for (std::size_t li = params.blocks().size(); li-- > 0;) {
    const BlockParams& bp = params.blocks()[li];
    const BlockCache& bc = cache.blocks[li];

    // norm2
    layer_norm_backward(bc.ln2, d_x, params.at(bp.ln2_gain).value, params.at(bp.ln2_gain).grad,
                        params.at(bp.ln2_bias).grad, ws.d_resid);
    // ffn: resid2 = h1 + act W2 + b2
    ws.d_h1 = ws.d_resid;
    matmul_tn_acc(bc.act, ws.d_resid, params.at(bp.ffn_w2).grad.data());
    col_sum_acc(ws.d_resid, params.at(bp.ffn_b2).grad);
    matmul_nt(ws.d_resid, params.at(bp.ffn_w2).value.data(), f, m, ws.d_act, ws.t1, false);
    for (std::size_t i = 0; i < ws.d_act.data.size(); ++i)
      ws.d_act.data[i] *= gelu_grad(bc.pre_act.data[i]);
    matmul_tn_acc(bc.h1, ws.d_act, params.at(bp.ffn_w1).grad.data());
    col_sum_acc(ws.d_act, params.at(bp.ffn_b1).grad);
    matmul_nt(ws.d_act, params.at(bp.ffn_w1).value.data(), m, f, ws.d_h1, ws.t1, true);

    // norm1
    layer_norm_backward(bc.ln1, ws.d_h1, params.at(bp.ln1_gain).value,
                        params.at(bp.ln1_gain).grad, params.at(bp.ln1_bias).grad, ws.d_resid);

    // attention: resid1 = in + mixed Wo
    const AttentionCache& ac = bc.attn;
    ws.d_in = ws.d_resid;
    matmul_tn_acc(ac.mixed, ws.d_resid, params.at(bp.wo).grad.data());
    matmul_nt(ws.d_resid, params.at(bp.wo).value.data(), m, m, ws.d_mixed, ws.t1, false);

    // mixed = softmax(Q K^T / sqrt(m)) V, in the same row blocks as forward
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    transpose(ac.v.data.data(), n, m, ws.t1);
    ws.d_q.resize(n, m);
    ws.d_k.resize(n, m);
    ws.d_v.resize(n, m);
    ws.d_probs.reshape(kRowBlock, n);
    for (std::size_t i0 = 0; i0 < n; i0 += kRowBlock) {
      const std::size_t rows = std::min(kRowBlock, n - i0);
      const double* p = ac.probs.row(i0);
      double* dp = ws.d_probs.data.data();
      std::fill(dp, dp + rows * n, 0.0);
      K().gemm(rows, n, m, ws.d_mixed.row(i0), m, ws.t1.data.data(), n, dp, n);
      K().gemm_tn(n, m, rows, p, n, ws.d_mixed.row(i0), m, ws.d_v.data.data(), m);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* pr = p + r * n;
        double* dr = dp + r * n;
        const double dotp = K().dot(pr, dr, n);
        for (std::size_t c = 0; c < n; ++c) dr[c] = pr[c] * (dr[c] - dotp) * scale;
      }
      K().gemm(rows, m, n, dp, n, ac.k.data.data(), m, ws.d_q.row(i0), m);
      K().gemm_tn(n, m, rows, dp, n, ac.q.row(i0), m, ws.d_k.data.data(), m);
    }

    matmul_tn_acc(ac.input, ws.d_q, params.at(bp.wq).grad.data());
    matmul_tn_acc(ac.input, ws.d_k, params.at(bp.wk).grad.data());
    matmul_tn_acc(ac.input, ws.d_v, params.at(bp.wv).grad.data());
    matmul_nt(ws.d_q, params.at(bp.wq).value.data(), m, m, ws.d_in, ws.t1, true);
    matmul_nt(ws.d_k, params.at(bp.wk).value.data(), m, m, ws.d_in, ws.t1, true);
    matmul_nt(ws.d_v, params.at(bp.wv).value.data(), m, m, ws.d_in, ws.t1, true);
    d_x = ws.d_in;
  }

  // embedding; positional table is constant
  const FeatureMatrix& feats = *cache.features;
  K().gemm_tn(feats.cols, m, n, feats.data.data(), feats.cols, d_x.data.data(), m,
              params.at(params.embed_w()).grad.data(), m);
  col_sum_acc(d_x, params.at(params.embed_b()).grad);
}

}  // namespace rformer
