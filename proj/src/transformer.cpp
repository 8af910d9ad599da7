#include "grokscale/transformer.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <numbers>

#include "grokscale/errors.hpp"
#include "grokscale/kernels.hpp"
#include "grokscale/random.hpp"

namespace grokscale {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitStd = 0.02;

template <class T>
std::span<const T> cspan(const std::vector<T>& v) {
  return std::span<const T>(v);
}

template <class T>
std::span<const T> cspan(const std::vector<T>& v, std::size_t offset, std::size_t size) {
  return std::span<const T>(v).subspan(offset, size);
}

template <class T>
std::span<T> mspan(std::vector<T>& v, std::size_t offset, std::size_t size) {
  return std::span<T>(v).subspan(offset, size);
}

template <class T>
void add_row_bias(std::size_t rows, std::size_t cols, std::span<T> x, std::span<const T> bias) {
  for (std::size_t r = 0; r < rows; ++r) {
    T* xr = x.data() + r * cols;
#pragma omp simd
    for (std::size_t c = 0; c < cols; ++c) xr[c] += bias[c];
  }
}

template <class T>
void layer_norm_forward(std::size_t rows, std::size_t cols, const T* x, const T* gain, const T* bias, T* hat,
                        T* rstd, T* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x + r * cols;
    T mean{0};
    for (std::size_t c = 0; c < cols; ++c) mean += xr[c];
    mean /= static_cast<T>(cols);
    T var{0};
    for (std::size_t c = 0; c < cols; ++c) {
      const T d = xr[c] - mean;
      var += d * d;
    }
    var /= static_cast<T>(cols);
    const T inv = T{1} / std::sqrt(var + static_cast<T>(kLayerNormEps));
    rstd[r] = inv;
    T* hr = hat + r * cols;
    T* orow = out + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      hr[c] = (xr[c] - mean) * inv;
      orow[c] = hr[c] * gain[c] + bias[c];
    }
  }
}

// d_in (+)= LayerNorm backward; gain/bias grads accumulated.
template <class T>
void layer_norm_backward(std::size_t rows, std::size_t cols, const T* d_out, const T* hat, const T* rstd,
                         const T* gain, T* d_gain, T* d_bias, T* d_in) {
  const T inv_cols = T{1} / static_cast<T>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* dor = d_out + r * cols;
    const T* hr = hat + r * cols;
    T sum_dh{0}, sum_dh_h{0};
    for (std::size_t c = 0; c < cols; ++c) {
      const T dh = dor[c] * gain[c];
      sum_dh += dh;
      sum_dh_h += dh * hr[c];
      d_gain[c] += dor[c] * hr[c];
      d_bias[c] += dor[c];
    }
    const T mean_dh = sum_dh * inv_cols;
    const T mean_dh_h = sum_dh_h * inv_cols;
    T* dir = d_in + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      const T dh = dor[c] * gain[c];
      dir[c] += rstd[r] * (dh - mean_dh - hr[c] * mean_dh_h);
    }
  }
}

template <class T>
T gelu(T u) {
  return T{0.5} * u * (T{1} + std::erf(u * static_cast<T>(std::numbers::sqrt2 / 2.0)));
}

template <class T>
T gelu_grad(T u) {
  const T cdf = T{0.5} * (T{1} + std::erf(u * static_cast<T>(std::numbers::sqrt2 / 2.0)));
  const T pdf = std::exp(T{-0.5} * u * u) * static_cast<T>(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
  return cdf + u * pdf;
}

// Branch-free float exp (Cody-Waite reduction, degree-5 polynomial) that
// vectorizes inside simd loops. Relative error is a few ulp.
inline float fast_exp(float x) {
  x = std::clamp(x, -87.0f, 88.0f);
  const float n = (x * 1.44269504088896341f + 12582912.0f) - 12582912.0f;  // round to nearest
  const float r = x - n * 0.693359375f + n * 2.12194440e-4f;
  float y = 1.9875691500e-4f;
  y = y * r + 1.3981999507e-3f;
  y = y * r + 8.3334519073e-3f;
  y = y * r + 4.1665795894e-2f;
  y = y * r + 1.6666665459e-1f;
  y = y * r + 5.0000001201e-1f;
  y = y * r * r + r + 1.0f;
  return y * std::bit_cast<float>((static_cast<std::int32_t>(n) + 127) << 23);
}

// Rational erf approximation; absolute error about 2e-6 in float.
inline float fast_erf(float x) {
  const float a = std::abs(x);
  const float t = 1.0f / (1.0f + 0.3275911f * a);
  float poly = 1.061405429f;
  poly = poly * t - 1.453152027f;
  poly = poly * t + 1.421413741f;
  poly = poly * t - 0.284496736f;
  poly = poly * t + 0.254829592f;
  const float y = 1.0f - poly * t * fast_exp(-a * a);
  return std::copysign(y, x);
}

template <class T>
void gelu_rows(std::size_t n, const T* pre, T* act) {
  for (std::size_t i = 0; i < n; ++i) act[i] = gelu(pre[i]);
}

template <>
void gelu_rows<float>(std::size_t n, const float* pre, float* act) {
  constexpr float kInvSqrt2 = 0.70710678118654752f;
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) act[i] = 0.5f * pre[i] * (1.0f + fast_erf(pre[i] * kInvSqrt2));
}

// d[i] *= gelu'(pre[i])
template <class T>
void gelu_grad_rows(std::size_t n, const T* pre, T* d) {
  for (std::size_t i = 0; i < n; ++i) d[i] *= gelu_grad(pre[i]);
}

template <>
void gelu_grad_rows<float>(std::size_t n, const float* pre, float* d) {
  constexpr float kInvSqrt2 = 0.70710678118654752f;
  constexpr float kInvSqrt2Pi = 0.39894228040143268f;
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) {
    const float u = pre[i];
    const float cdf = 0.5f * (1.0f + fast_erf(u * kInvSqrt2));
    const float pdf = kInvSqrt2Pi * fast_exp(-0.5f * u * u);
    d[i] *= cdf + u * pdf;
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0) {
    throw ConfigError("model sizes must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model=" + std::to_string(d_model) + " is not divisible by n_heads=" +
                      std::to_string(n_heads));
  }
  if (vocab < 2) throw ConfigError("vocab must be at least 2");
  if (seq_len != 2) throw ConfigError("the model family is fixed to two-token inputs");
}

ParameterLayout::ParameterLayout(const ModelConfig& config) {
  config.validate();
  const auto d = static_cast<std::size_t>(config.d_model);
  const auto ff = static_cast<std::size_t>(config.d_ff);
  const auto vocab = static_cast<std::size_t>(config.vocab);
  token_embedding = add("token_embedding", vocab, d, true);
  position_embedding = add("position_embedding", static_cast<std::size_t>(config.seq_len), d, true);
  for (int l = 0; l < config.n_layers; ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    LayerOffsets off{};
    off.ln1_gain = add(prefix + "ln1.gain", 1, d, false);
    off.ln1_bias = add(prefix + "ln1.bias", 1, d, false);
    off.w_qkv = add(prefix + "attn.w_qkv", d, 3 * d, true);
    off.b_qkv = add(prefix + "attn.b_qkv", 1, 3 * d, false);
    off.w_out = add(prefix + "attn.w_out", d, d, true);
    off.b_out = add(prefix + "attn.b_out", 1, d, false);
    off.ln2_gain = add(prefix + "ln2.gain", 1, d, false);
    off.ln2_bias = add(prefix + "ln2.bias", 1, d, false);
    off.w_ff1 = add(prefix + "ff.w1", d, ff, true);
    off.b_ff1 = add(prefix + "ff.b1", 1, ff, false);
    off.w_ff2 = add(prefix + "ff.w2", ff, d, true);
    off.b_ff2 = add(prefix + "ff.b2", 1, d, false);
    layers.push_back(off);
  }
  decoder_weight = add("decoder.weight", d, vocab, true);
  decoder_bias = add("decoder.bias", 1, vocab, false);
}

std::size_t ParameterLayout::add(std::string name, std::size_t rows, std::size_t cols, bool decay) {
  ParamBlock block{std::move(name), total_, rows, cols, decay};
  total_ += block.size();
  blocks_.push_back(std::move(block));
  return blocks_.back().offset;
}

const ParamBlock& ParameterLayout::block(const std::string& name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b;
  }
  throw InputError("no parameter block named '" + name + "'");
}

template <class T>
Parameters<T> init_model(const ModelConfig& config) {
  const ParameterLayout layout(config);
  Parameters<T> params{config, std::vector<T>(layout.total(), T{0})};
  Xoshiro256 rng(config.init_seed);
  for (const auto& block : layout.blocks()) {
    auto view = params.view(block);
    const bool is_gain = block.name.ends_with(".gain");
    for (auto& v : view) {
      if (block.decay) {
        v = static_cast<T>(kInitStd * rng.normal());
      } else {
        v = is_gain ? T{1} : T{0};
      }
    }
  }
  return params;
}

template <class T>
std::uint64_t parameter_checksum(const Parameters<T>& params) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(params.values.data());
  return fnv1a(std::span<const unsigned char>(bytes, params.values.size() * sizeof(T)));
}

template <class T>
TransformerWorkspace<T>::TransformerWorkspace(const ModelConfig& config)
    : config_(config), layout_(config), caches_(static_cast<std::size_t>(config.n_layers)) {}

template <class T>
void TransformerWorkspace<T>::resize(std::size_t batch) {
  if (batch == batch_) return;
  batch_ = batch;
  const std::size_t rows = batch * 2;
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto ff = static_cast<std::size_t>(config_.d_ff);
  const auto heads = static_cast<std::size_t>(config_.n_heads);
  for (auto& c : caches_) {
    c.input.resize(rows * d);
    c.ln1_hat.resize(rows * d);
    c.ln1_rstd.resize(rows);
    c.ln1_out.resize(rows * d);
    c.qkv.resize(rows * 3 * d);
    c.probs.resize(batch * heads * 4);
    c.attn.resize(rows * d);
    c.resid1.resize(rows * d);
    c.ln2_hat.resize(rows * d);
    c.ln2_rstd.resize(rows);
    c.ln2_out.resize(rows * d);
    c.ff_pre.resize(rows * ff);
    c.ff_act.resize(rows * ff);
  }
  tokens_.resize(rows);
  final_.resize(rows * d);
  pooled_.resize(batch * d);
  logits_.resize(batch * static_cast<std::size_t>(config_.vocab));
}

template <class T>
void TransformerWorkspace<T>::forward(const Parameters<T>& params, std::span<const LabeledPair> batch) {
  if (batch.empty()) throw InputError("forward needs a nonempty batch");
  if (params.values.size() != layout_.total()) throw InputError("parameter vector does not match model layout");
  resize(batch.size());

  const std::size_t nb = batch.size();
  const std::size_t rows = nb * 2;
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto ff = static_cast<std::size_t>(config_.d_ff);
  const auto vocab = static_cast<std::size_t>(config_.vocab);
  const auto heads = static_cast<std::size_t>(config_.n_heads);
  const std::size_t hd = d / heads;
  const T scale = T{1} / std::sqrt(static_cast<T>(hd));
  const auto& w = params.values;

  for (std::size_t n = 0; n < nb; ++n) {
    const auto& pair = batch[n];
    if (pair.a < 0 || pair.b < 0 || pair.a >= config_.vocab || pair.b >= config_.vocab) {
      throw InputError("token out of range for vocab " + std::to_string(config_.vocab));
    }
    tokens_[2 * n] = pair.a;
    tokens_[2 * n + 1] = pair.b;
  }

  // Embedding lookup into the first layer's input buffer (or final_ if no layers).
  std::vector<T>& x0 = caches_.empty() ? final_ : caches_[0].input;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* tok = w.data() + layout_.token_embedding + static_cast<std::size_t>(tokens_[r]) * d;
    const T* pos = w.data() + layout_.position_embedding + (r % 2) * d;
    T* xr = x0.data() + r * d;
    for (std::size_t c = 0; c < d; ++c) xr[c] = tok[c] + pos[c];
  }

  for (std::size_t l = 0; l < caches_.size(); ++l) {
    auto& c = caches_[l];
    const auto& off = layout_.layers[l];
    layer_norm_forward(rows, d, c.input.data(), w.data() + off.ln1_gain, w.data() + off.ln1_bias,
                       c.ln1_hat.data(), c.ln1_rstd.data(), c.ln1_out.data());
    kernels::gemm_nn<T>(rows, 3 * d, d, cspan(c.ln1_out), cspan(w, off.w_qkv, d * 3 * d), std::span<T>(c.qkv),
                        false);
    add_row_bias<T>(rows, 3 * d, std::span<T>(c.qkv), cspan(w, off.b_qkv, 3 * d));

    for (std::size_t n = 0; n < nb; ++n) {
      for (std::size_t h = 0; h < heads; ++h) {
        const T* q[2] = {c.qkv.data() + (2 * n) * 3 * d + h * hd, c.qkv.data() + (2 * n + 1) * 3 * d + h * hd};
        const T* k[2] = {q[0] + d, q[1] + d};
        const T* v[2] = {q[0] + 2 * d, q[1] + 2 * d};
        T* probs = c.probs.data() + (n * heads + h) * 4;
        for (std::size_t s = 0; s < 2; ++s) {
          T score[2];
          for (std::size_t t = 0; t < 2; ++t) {
            T dot{0};
            for (std::size_t e = 0; e < hd; ++e) dot += q[s][e] * k[t][e];
            score[t] = dot * scale;
          }
          const T mx = std::max(score[0], score[1]);
          const T e0 = std::exp(score[0] - mx);
          const T e1 = std::exp(score[1] - mx);
          const T inv = T{1} / (e0 + e1);
          probs[s * 2] = e0 * inv;
          probs[s * 2 + 1] = e1 * inv;
          T* out = c.attn.data() + (2 * n + s) * d + h * hd;
          for (std::size_t e = 0; e < hd; ++e) out[e] = probs[s * 2] * v[0][e] + probs[s * 2 + 1] * v[1][e];
        }
      }
    }

    kernels::gemm_nn<T>(rows, d, d, cspan(c.attn), cspan(w, off.w_out, d * d), std::span<T>(c.resid1), false);
    add_row_bias<T>(rows, d, std::span<T>(c.resid1), cspan(w, off.b_out, d));
    for (std::size_t i = 0; i < rows * d; ++i) c.resid1[i] += c.input[i];

    layer_norm_forward(rows, d, c.resid1.data(), w.data() + off.ln2_gain, w.data() + off.ln2_bias,
                       c.ln2_hat.data(), c.ln2_rstd.data(), c.ln2_out.data());
    kernels::gemm_nn<T>(rows, ff, d, cspan(c.ln2_out), cspan(w, off.w_ff1, d * ff), std::span<T>(c.ff_pre), false);
    add_row_bias<T>(rows, ff, std::span<T>(c.ff_pre), cspan(w, off.b_ff1, ff));
    gelu_rows(rows * ff, c.ff_pre.data(), c.ff_act.data());

    std::vector<T>& next = (l + 1 < caches_.size()) ? caches_[l + 1].input : final_;
    kernels::gemm_nn<T>(rows, d, ff, cspan(c.ff_act), cspan(w, off.w_ff2, ff * d), std::span<T>(next), false);
    add_row_bias<T>(rows, d, std::span<T>(next), cspan(w, off.b_ff2, d));
    for (std::size_t i = 0; i < rows * d; ++i) next[i] += c.resid1[i];
  }

  for (std::size_t n = 0; n < nb; ++n) {
    const T* r0 = final_.data() + (2 * n) * d;
    const T* r1 = r0 + d;
    T* pr = pooled_.data() + n * d;
    for (std::size_t c = 0; c < d; ++c) pr[c] = T{0.5} * (r0[c] + r1[c]);
  }
  kernels::gemm_nn<T>(nb, vocab, d, cspan(pooled_), cspan(w, layout_.decoder_weight, d * vocab),
                      std::span<T>(logits_), false);
  add_row_bias<T>(nb, vocab, std::span<T>(logits_), cspan(w, layout_.decoder_bias, vocab));
}

template <class T>
T TransformerWorkspace<T>::loss_and_grads(const Parameters<T>& params, std::span<const LabeledPair> batch,
                                          Parameters<T>& grads) {
  forward(params, batch);

  const std::size_t nb = batch.size();
  const std::size_t rows = nb * 2;
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto ff = static_cast<std::size_t>(config_.d_ff);
  const auto vocab = static_cast<std::size_t>(config_.vocab);
  const auto heads = static_cast<std::size_t>(config_.n_heads);
  const std::size_t hd = d / heads;
  const T scale = T{1} / std::sqrt(static_cast<T>(hd));
  const auto& w = params.values;

  grads.config = params.config;
  grads.values.assign(layout_.total(), T{0});
  auto& g = grads.values;

  // Cross-entropy and d(loss)/d(logits).
  double loss = 0.0;
  const T inv_batch = T{1} / static_cast<T>(nb);
  std::vector<T> d_logits(nb * vocab);
  for (std::size_t n = 0; n < nb; ++n) {
    const T* z = logits_.data() + n * vocab;
    T mx = z[0];
    for (std::size_t j = 1; j < vocab; ++j) mx = std::max(mx, z[j]);
    T sum{0};
    for (std::size_t j = 0; j < vocab; ++j) sum += std::exp(z[j] - mx);
    const T lse = mx + std::log(sum);
    const auto label = static_cast<std::size_t>(batch[n].label);
    loss += static_cast<double>(lse - z[label]);
    T* dz = d_logits.data() + n * vocab;
    for (std::size_t j = 0; j < vocab; ++j) dz[j] = std::exp(z[j] - lse) * inv_batch;
    dz[label] -= inv_batch;
  }
  loss /= static_cast<double>(nb);
  if (!std::isfinite(loss)) throw NumericError("non-finite loss");

  // Decoder.
  kernels::gemm_tn<T>(d, vocab, nb, cspan(pooled_), cspan(d_logits), mspan(g, layout_.decoder_weight, d * vocab),
                      false);
  kernels::column_sums<T>(nb, vocab, cspan(d_logits), mspan(g, layout_.decoder_bias, vocab), false);
  d_pooled_.resize(nb * d);
  kernels::gemm_nt<T>(nb, d, vocab, cspan(d_logits), cspan(w, layout_.decoder_weight, d * vocab),
                      std::span<T>(d_pooled_), false, scratch_);

  d_x_.resize(rows * d);
  for (std::size_t n = 0; n < nb; ++n) {
    const T* dp = d_pooled_.data() + n * d;
    T* d0 = d_x_.data() + (2 * n) * d;
    T* d1 = d0 + d;
    for (std::size_t c = 0; c < d; ++c) {
      d0[c] = T{0.5} * dp[c];
      d1[c] = T{0.5} * dp[c];
    }
  }

  d_ln_.resize(rows * d);
  d_ff_.resize(rows * ff);
  d_attn_.resize(rows * d);
  d_qkv_.resize(rows * 3 * d);

  for (std::size_t li = caches_.size(); li-- > 0;) {
    auto& c = caches_[li];
    const auto& off = layout_.layers[li];

    // Feedforward branch: out = resid1 + W2 gelu(W1 ln2 + b1) + b2.
    kernels::gemm_tn<T>(ff, d, rows, cspan(c.ff_act), cspan(d_x_), mspan(g, off.w_ff2, ff * d), false);
    kernels::column_sums<T>(rows, d, cspan(d_x_), mspan(g, off.b_ff2, d), false);
    kernels::gemm_nt<T>(rows, ff, d, cspan(d_x_), cspan(w, off.w_ff2, ff * d), std::span<T>(d_ff_), false,
                        scratch_);
    gelu_grad_rows(rows * ff, c.ff_pre.data(), d_ff_.data());
    kernels::gemm_tn<T>(d, ff, rows, cspan(c.ln2_out), cspan(d_ff_), mspan(g, off.w_ff1, d * ff), false);
    kernels::column_sums<T>(rows, ff, cspan(d_ff_), mspan(g, off.b_ff1, ff), false);
    kernels::gemm_nt<T>(rows, d, ff, cspan(d_ff_), cspan(w, off.w_ff1, d * ff), std::span<T>(d_ln_), false,
                        scratch_);
    // d_x_ becomes d(resid1): identity path plus LayerNorm path.
    layer_norm_backward(rows, d, d_ln_.data(), c.ln2_hat.data(), c.ln2_rstd.data(), w.data() + off.ln2_gain,
                        g.data() + off.ln2_gain, g.data() + off.ln2_bias, d_x_.data());

    // Attention branch: resid1 = input + Wout attn + bout.
    kernels::gemm_tn<T>(d, d, rows, cspan(c.attn), cspan(d_x_), mspan(g, off.w_out, d * d), false);
    kernels::column_sums<T>(rows, d, cspan(d_x_), mspan(g, off.b_out, d), false);
    kernels::gemm_nt<T>(rows, d, d, cspan(d_x_), cspan(w, off.w_out, d * d), std::span<T>(d_attn_), false,
                        scratch_);

    for (std::size_t n = 0; n < nb; ++n) {
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t base0 = (2 * n) * 3 * d + h * hd;
        const std::size_t base1 = (2 * n + 1) * 3 * d + h * hd;
        const T* q[2] = {c.qkv.data() + base0, c.qkv.data() + base1};
        const T* k[2] = {q[0] + d, q[1] + d};
        const T* v[2] = {q[0] + 2 * d, q[1] + 2 * d};
        T* dq[2] = {d_qkv_.data() + base0, d_qkv_.data() + base1};
        T* dk[2] = {dq[0] + d, dq[1] + d};
        T* dv[2] = {dq[0] + 2 * d, dq[1] + 2 * d};
        for (std::size_t s = 0; s < 2; ++s) {
          for (std::size_t e = 0; e < hd; ++e) {
            dq[s][e] = T{0};
            dk[s][e] = T{0};
            dv[s][e] = T{0};
          }
        }
        const T* probs = c.probs.data() + (n * heads + h) * 4;
        for (std::size_t s = 0; s < 2; ++s) {
          const T* da = d_attn_.data() + (2 * n + s) * d + h * hd;
          T dp[2];
          for (std::size_t t = 0; t < 2; ++t) {
            T dot{0};
            for (std::size_t e = 0; e < hd; ++e) dot += da[e] * v[t][e];
            dp[t] = dot;
            const T pst = probs[s * 2 + t];
            for (std::size_t e = 0; e < hd; ++e) dv[t][e] += pst * da[e];
          }
          const T mean_dp = probs[s * 2] * dp[0] + probs[s * 2 + 1] * dp[1];
          for (std::size_t t = 0; t < 2; ++t) {
            const T ds = probs[s * 2 + t] * (dp[t] - mean_dp) * scale;
            for (std::size_t e = 0; e < hd; ++e) {
              dq[s][e] += ds * k[t][e];
              dk[t][e] += ds * q[s][e];
            }
          }
        }
      }
    }

    kernels::gemm_tn<T>(d, 3 * d, rows, cspan(c.ln1_out), cspan(d_qkv_), mspan(g, off.w_qkv, d * 3 * d), false);
    kernels::column_sums<T>(rows, 3 * d, cspan(d_qkv_), mspan(g, off.b_qkv, 3 * d), false);
    kernels::gemm_nt<T>(rows, d, 3 * d, cspan(d_qkv_), cspan(w, off.w_qkv, d * 3 * d), std::span<T>(d_ln_), false,
                        scratch_);
    layer_norm_backward(rows, d, d_ln_.data(), c.ln1_hat.data(), c.ln1_rstd.data(), w.data() + off.ln1_gain,
                        g.data() + off.ln1_gain, g.data() + off.ln1_bias, d_x_.data());
  }

  for (std::size_t r = 0; r < rows; ++r) {
    const T* dr = d_x_.data() + r * d;
    T* tok = g.data() + layout_.token_embedding + static_cast<std::size_t>(tokens_[r]) * d;
    T* pos = g.data() + layout_.position_embedding + (r % 2) * d;
    for (std::size_t cidx = 0; cidx < d; ++cidx) {
      tok[cidx] += dr[cidx];
      pos[cidx] += dr[cidx];
    }
  }
  return static_cast<T>(loss);
}

template <class T>
ForwardOutput<T> forward(const Parameters<T>& params, std::span<const LabeledPair> batch) {
  TransformerWorkspace<T> ws(params.config);
  ws.forward(params, batch);
  const auto d = static_cast<std::size_t>(params.config.d_model);
  const auto vocab = static_cast<std::size_t>(params.config.vocab);
  ForwardOutput<T> out{Matrix<T>(batch.size(), vocab), Matrix<T>(batch.size(), d)};
  std::copy(ws.logits().begin(), ws.logits().end(), out.logits.data.begin());
  std::copy(ws.pooled().begin(), ws.pooled().end(), out.penultimate.data.begin());
  return out;
}

template <class T>
LossAndGrads<T> loss_and_grads(const Parameters<T>& params, std::span<const LabeledPair> batch) {
  TransformerWorkspace<T> ws(params.config);
  LossAndGrads<T> out{T{0}, zeros_like(params)};
  out.loss = ws.loss_and_grads(params, batch, out.grads);
  return out;
}

template <class T>
double cross_entropy(std::span<const T> logits, std::size_t classes, std::span<const LabeledPair> batch) {
  double total = 0.0;
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const T* z = logits.data() + n * classes;
    double mx = z[0];
    for (std::size_t j = 1; j < classes; ++j) mx = std::max(mx, static_cast<double>(z[j]));
    double sum = 0.0;
    for (std::size_t j = 0; j < classes; ++j) sum += std::exp(static_cast<double>(z[j]) - mx);
    total += mx + std::log(sum) - static_cast<double>(z[static_cast<std::size_t>(batch[n].label)]);
  }
  return total / static_cast<double>(batch.size());
}

#define GROKSCALE_INSTANTIATE(T)                                                                    \
  template Parameters<T> init_model<T>(const ModelConfig&);                                         \
  template std::uint64_t parameter_checksum<T>(const Parameters<T>&);                               \
  template class TransformerWorkspace<T>;                                                           \
  template ForwardOutput<T> forward<T>(const Parameters<T>&, std::span<const LabeledPair>);         \
  template LossAndGrads<T> loss_and_grads<T>(const Parameters<T>&, std::span<const LabeledPair>);   \
  template double cross_entropy<T>(std::span<const T>, std::size_t, std::span<const LabeledPair>);

GROKSCALE_INSTANTIATE(float)
GROKSCALE_INSTANTIATE(double)

#undef GROKSCALE_INSTANTIATE

}  // namespace grokscale
