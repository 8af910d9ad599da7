#include "grokscale/adamw.hpp"

#include <cmath>

#include "grokscale/errors.hpp"

namespace grokscale {

void OptimConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (batch_size < 1 || eval_batch_size < 1) throw ConfigError("batch sizes must be positive");
  if (log_every < 1) throw ConfigError("log_every must be positive");
  if (max_steps < log_every) throw ConfigError("max_steps must be at least log_every");
}

AdamState make_adam_state(const Parameters<float>& params) {
  return AdamState{std::vector<float>(params.values.size(), 0.0f), std::vector<float>(params.values.size(), 0.0f),
                   0};
}

void adamw_step(Parameters<float>& params, const Parameters<float>& grads, AdamState& state,
                const OptimConfig& config) {
  if (grads.values.size() != params.values.size() || state.first_moment.size() != params.values.size()) {
    throw InputError("adamw_step: parameter, gradient and state sizes differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  const auto step_size = static_cast<float>(config.learning_rate / bias1);
  const auto inv_sqrt_bias2 = static_cast<float>(1.0 / std::sqrt(bias2));
  const auto eps = static_cast<float>(config.eps);
  const auto b1 = static_cast<float>(config.beta1);
  const auto b2 = static_cast<float>(config.beta2);
  const auto decay = static_cast<float>(1.0 - config.learning_rate * config.weight_decay);

  const ParameterLayout layout(params.config);
  for (const auto& block : layout.blocks()) {
    float* w = params.values.data() + block.offset;
    const float* g = grads.values.data() + block.offset;
    float* m = state.first_moment.data() + block.offset;
    float* v = state.second_moment.data() + block.offset;
    const float block_decay = block.decay ? decay : 1.0f;
    const std::size_t n = block.size();
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      const float denom = std::sqrt(v[i]) * inv_sqrt_bias2 + eps;
      w[i] = w[i] * block_decay - step_size * m[i] / denom;
    }
  }
}

}  // namespace grokscale
