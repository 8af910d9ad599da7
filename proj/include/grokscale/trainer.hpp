#pragma once

// One training run: AdamW on the train split with periodic evaluation and a
// probe-spectrum checkpoint every log_every steps.

#include <cstdint>
#include <functional>

#include "grokscale/adamw.hpp"
#include "grokscale/history.hpp"
#include "grokscale/task_data.hpp"
#include "grokscale/transformer.hpp"

namespace grokscale {

struct TrainOptions {
  bool early_stop = true;
  int head_k = 5;
  /// Called after each checkpoint; returning false aborts the run (recorded as failed).
  std::function<bool(const CheckpointRecord&)> on_checkpoint;
};

/// Model width defaults follow `model`; vocab is overwritten with p and
/// init_seed with train_seed. Non-finite losses end the run as failed.
RunHistory train_run(const TaskSpec& task, ModelConfig model, const OptimConfig& optim, std::uint64_t train_seed,
                     const TrainOptions& options = {});

struct SplitMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Mean loss and accuracy over a split, evaluated in chunks of `chunk` pairs.
SplitMetrics evaluate_split(TransformerWorkspace<float>& ws, const Parameters<float>& params,
                            std::span<const LabeledPair> pairs, int chunk);

/// Mean-pooled penultimate activations of the probe split, n x d in double.
std::vector<double> probe_representations(TransformerWorkspace<float>& ws, const Parameters<float>& params,
                                          std::span<const LabeledPair> probe, int chunk);

}  // namespace grokscale
