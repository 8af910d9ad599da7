#include "grokscale/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "grokscale/random.hpp"

namespace grokscale {

GradCheckResult gradient_check(const GradCheckOptions& options) {
  ModelConfig config;
  config.d_model = options.d_model;
  config.n_layers = 1;
  config.n_heads = options.n_heads;
  config.d_ff = options.d_ff;
  config.vocab = options.p;
  config.init_seed = options.seed;
  config.validate();

  Parameters<double> params = init_model<double>(config);
  Xoshiro256 rng(derive_seed(options.seed, 11));
  for (auto& v : params.values) v = options.init_scale * rng.normal();

  std::vector<LabeledPair> batch = enumerate_pairs(options.p, Operation::add);
  fisher_yates(std::span<LabeledPair>(batch), rng);
  batch.resize(std::min<std::size_t>(batch.size(), static_cast<std::size_t>(options.batch)));

  TransformerWorkspace<double> ws(config);
  Parameters<double> grads = zeros_like(params);
  ws.loss_and_grads(params, batch, grads);

  auto loss_at = [&] {
    ws.forward(params, batch);
    return cross_entropy<double>(ws.logits(), static_cast<std::size_t>(options.p), batch);
  };

  GradCheckResult result;
  result.ok = true;
  const ParameterLayout layout(config);
  for (const auto& block : layout.blocks()) {
    BlockCheck check{block.name, block.size()};
    double diff2 = 0.0, fd2 = 0.0, an2 = 0.0;
    for (std::size_t i = block.offset; i < block.offset + block.size(); ++i) {
      const double saved = params.values[i];
      params.values[i] = saved + options.step;
      const double up = loss_at();
      params.values[i] = saved - options.step;
      const double down = loss_at();
      params.values[i] = saved;
      const double fd = (up - down) / (2.0 * options.step);
      const double an = grads.values[i];
      diff2 += (fd - an) * (fd - an);
      fd2 += fd * fd;
      an2 += an * an;
      check.max_abs_error = std::max(check.max_abs_error, std::abs(fd - an));
    }
    check.rel_error = std::sqrt(diff2) / std::max(std::sqrt(fd2) + std::sqrt(an2), 1e-12);
    check.ok = check.rel_error < options.tolerance;
    result.ok &= check.ok;
    result.worst = std::max(result.worst, check.rel_error);
    result.blocks.push_back(check);
  }
  return result;
}

}  // namespace grokscale
