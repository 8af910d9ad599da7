#include "grokscale/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "grokscale/errors.hpp"
#include "grokscale/observables.hpp"
#include "grokscale/random.hpp"

namespace grokscale {

SplitMetrics evaluate_split(TransformerWorkspace<float>& ws, const Parameters<float>& params,
                            std::span<const LabeledPair> pairs, int chunk) {
  if (pairs.empty()) throw InputError("evaluate_split on an empty split");
  const auto vocab = static_cast<std::size_t>(params.config.vocab);
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(chunk)) {
    const auto part = pairs.subspan(start, std::min<std::size_t>(static_cast<std::size_t>(chunk), pairs.size() - start));
    ws.forward(params, part);
    const auto logits = ws.logits();
    loss_sum += cross_entropy<float>(logits, vocab, part) * static_cast<double>(part.size());
    for (std::size_t i = 0; i < part.size(); ++i) {
      const auto row = logits.subspan(i * vocab, vocab);
      const auto arg = static_cast<std::int32_t>(std::max_element(row.begin(), row.end()) - row.begin());
      if (arg == part[i].label) ++correct;
    }
  }
  const auto n = static_cast<double>(pairs.size());
  return {loss_sum / n, static_cast<double>(correct) / n};
}

std::vector<double> probe_representations(TransformerWorkspace<float>& ws, const Parameters<float>& params,
                                          std::span<const LabeledPair> probe, int chunk) {
  const auto d = static_cast<std::size_t>(params.config.d_model);
  std::vector<double> rows;
  rows.reserve(probe.size() * d);
  for (std::size_t start = 0; start < probe.size(); start += static_cast<std::size_t>(chunk)) {
    const auto part = probe.subspan(start, std::min<std::size_t>(static_cast<std::size_t>(chunk), probe.size() - start));
    ws.forward(params, part);
    const auto pooled = ws.pooled();
    rows.insert(rows.end(), pooled.begin(), pooled.end());
  }
  return rows;
}

RunHistory train_run(const TaskSpec& task, ModelConfig model, const OptimConfig& optim, std::uint64_t train_seed,
                     const TrainOptions& options) {
  task.validate();
  optim.validate();
  model.vocab = task.p;
  model.init_seed = train_seed;
  model.validate();

  RunHistory history;
  history.task = task;
  history.model = model;
  history.optim = optim;
  history.train_seed = train_seed;

  const DatasetSplit split = partition(task);
  Parameters<float> params = init_model<float>(model);
  Parameters<float> grads = zeros_like(params);
  AdamState state = make_adam_state(params);
  TransformerWorkspace<float> ws(model);
  Xoshiro256 rng(derive_seed(train_seed, 1));
  std::vector<LabeledPair> batch(static_cast<std::size_t>(optim.batch_size));

  try {
    for (int step = 1; step <= optim.max_steps; ++step) {
      for (auto& item : batch) item = split.train[static_cast<std::size_t>(rng.below(split.train.size()))];
      ws.loss_and_grads(params, batch, grads);
      adamw_step(params, grads, state, optim);

      if (step % optim.log_every != 0) continue;
      CheckpointRecord rec;
      rec.step = step;
      const SplitMetrics train = evaluate_split(ws, params, split.train, optim.eval_batch_size);
      if (!std::isfinite(train.loss)) throw NumericError("non-finite loss");
      rec.train_loss = train.loss;
      rec.train_acc = train.accuracy;
      rec.eval_acc = evaluate_split(ws, params, split.eval, optim.eval_batch_size).accuracy;
      const auto reps = probe_representations(ws, params, split.probe, optim.eval_batch_size);
      const auto eig = probe_spectrum(reps, split.probe.size(), static_cast<std::size_t>(model.d_model));
      rec.spectral = spectral_record(step, eig, options.head_k);
      history.records.push_back(std::move(rec));
      history.stop_step = step;

      if (options.on_checkpoint && !options.on_checkpoint(history.records.back())) {
        history.termination = Termination::failed;
        history.error = "aborted";
        return history;
      }
      if (options.early_stop && early_stop_check(history)) {
        history.termination = Termination::early_stopped;
        return history;
      }
    }
  } catch (const NumericError& e) {
    history.termination = Termination::failed;
    history.error = e.what();
    return history;
  }
  history.termination = Termination::completed;
  return history;
}

}  // namespace grokscale
