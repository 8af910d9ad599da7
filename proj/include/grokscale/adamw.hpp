#pragma once

#include <cstdint>
#include <vector>

#include "grokscale/transformer.hpp"

namespace grokscale {

struct OptimConfig {
  double learning_rate = 5e-4;
  double weight_decay = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 512;
  int eval_batch_size = 4096;
  int max_steps = 40000;
  int log_every = 25;

  void validate() const;
};

struct AdamState {
  std::vector<float> first_moment;
  std::vector<float> second_moment;
  std::int64_t step = 0;
};

AdamState make_adam_state(const Parameters<float>& params);

/// One decoupled-weight-decay Adam update. Decay multiplies each matrix entry
/// by (1 - lr * wd) before the bias-corrected Adam step; LayerNorm parameters
/// and biases are never decayed.
void adamw_step(Parameters<float>& params, const Parameters<float>& grads, AdamState& state,
                const OptimConfig& config);

}  // namespace grokscale
