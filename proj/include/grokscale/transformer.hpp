#pragma once

// Two-token pre-LayerNorm transformer encoder with mean pooling and a linear
// decoder over Z_p, with hand-written reverse-mode gradients.
//
// Per layer:  x += Attn(LN1(x));  x += W2 * gelu(W1 * LN2(x) + b1) + b2
// Readout:    pooled = mean over the two positions; logits = pooled * Wdec + bdec
//
// The model is templated on the scalar so the same code trains in float and
// runs the finite-difference gradient check in double.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "grokscale/task_data.hpp"

namespace grokscale {

struct ModelConfig {
  int d_model = 128;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 512;
  int vocab = 53;
  int seq_len = 2;
  std::uint64_t init_seed = 0;

  int head_dim() const { return d_model / n_heads; }
  /// Throws ConfigError on non-positive sizes, d_model % n_heads != 0 or seq_len != 2.
  void validate() const;
};

/// One named tensor inside the flat parameter vector.
struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool decay = false;  // weight decay applies to matrices only
  std::size_t size() const { return rows * cols; }
};

struct LayerOffsets {
  std::size_t ln1_gain, ln1_bias, w_qkv, b_qkv, w_out, b_out;
  std::size_t ln2_gain, ln2_bias, w_ff1, b_ff1, w_ff2, b_ff2;
};

class ParameterLayout {
 public:
  explicit ParameterLayout(const ModelConfig& config);

  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::size_t total() const { return total_; }
  const ParamBlock& block(const std::string& name) const;

  std::size_t token_embedding = 0;
  std::size_t position_embedding = 0;
  std::size_t decoder_weight = 0;
  std::size_t decoder_bias = 0;
  std::vector<LayerOffsets> layers;

 private:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols, bool decay);

  std::vector<ParamBlock> blocks_;
  std::size_t total_ = 0;
};

template <class T>
struct Parameters {
  ModelConfig config;
  std::vector<T> values;

  std::span<T> view(const ParamBlock& b) { return std::span<T>(values).subspan(b.offset, b.size()); }
  std::span<const T> view(const ParamBlock& b) const {
    return std::span<const T>(values).subspan(b.offset, b.size());
  }
};

/// Row-major dense matrix.
template <class T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, T{0}) {}
  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const T> row(std::size_t r) const { return std::span<const T>(data).subspan(r * cols, cols); }
};

/// Normal(0, 0.02) matrices, zero biases, unit LayerNorm gains; deterministic in init_seed.
template <class T>
Parameters<T> init_model(const ModelConfig& config);

template <class T>
Parameters<T> zeros_like(const Parameters<T>& params) {
  return Parameters<T>{params.config, std::vector<T>(params.values.size(), T{0})};
}

template <class T>
Parameters<T> convert_parameters(const Parameters<float>& params) {
  return Parameters<T>{params.config, std::vector<T>(params.values.begin(), params.values.end())};
}

/// FNV-1a over the raw parameter bytes.
template <class T>
std::uint64_t parameter_checksum(const Parameters<T>& params);

template <class T>
struct ForwardOutput {
  Matrix<T> logits;       // batch x p
  Matrix<T> penultimate;  // batch x d_model (mean-pooled encoder output)
};

template <class T>
struct LossAndGrads {
  T loss{};
  Parameters<T> grads;
};

/// Reusable activation buffers for forward/backward on one thread.
template <class T>
class TransformerWorkspace {
 public:
  explicit TransformerWorkspace(const ModelConfig& config);

  /// Forward pass. On return, logits() and pooled() hold batch-sized results.
  void forward(const Parameters<T>& params, std::span<const LabeledPair> batch);

  /// Forward + mean cross-entropy + full backward into grads (overwritten).
  T loss_and_grads(const Parameters<T>& params, std::span<const LabeledPair> batch, Parameters<T>& grads);

  std::span<const T> logits() const { return logits_; }
  std::span<const T> pooled() const { return pooled_; }
  std::size_t batch_size() const { return batch_; }

 private:
  void resize(std::size_t batch);

  ModelConfig config_;
  ParameterLayout layout_;
  std::size_t batch_ = 0;

  // Token-level buffers have batch*seq_len rows.
  struct LayerCache {
    std::vector<T> input, ln1_hat, ln1_rstd, ln1_out, qkv, probs, attn, resid1;
    std::vector<T> ln2_hat, ln2_rstd, ln2_out, ff_pre, ff_act;
  };
  std::vector<LayerCache> caches_;
  std::vector<std::int32_t> tokens_;
  std::vector<T> final_, pooled_, logits_;

  // Backward scratch.
  std::vector<T> d_x_, d_ln_, d_qkv_, d_attn_, d_ff_, d_pooled_, scratch_;
};

template <class T>
ForwardOutput<T> forward(const Parameters<T>& params, std::span<const LabeledPair> batch);

template <class T>
LossAndGrads<T> loss_and_grads(const Parameters<T>& params, std::span<const LabeledPair> batch);

/// Mean cross-entropy of row-major logits against labels.
template <class T>
double cross_entropy(std::span<const T> logits, std::size_t classes, std::span<const LabeledPair> batch);

}  // namespace grokscale
