#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "grokscale/adamw.hpp"
#include "grokscale/task_data.hpp"
#include "grokscale/transformer.hpp"

namespace grokscale {

/// Normalized covariance spectrum at one checkpoint. eig_mass may be a
/// truncated prefix of the full spectrum; tail_mass then carries the
/// aggregate mass of the dropped entries.
struct SpectralRecord {
  std::int64_t step = 0;
  std::vector<double> eig_mass;
  double tail_mass = 0.0;
  double htc = 0.0;
};

struct CheckpointRecord {
  std::int64_t step = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double eval_acc = 0.0;
  SpectralRecord spectral;
};

enum class Termination { completed, early_stopped, failed };

std::string_view to_string(Termination t);
Termination parse_termination(std::string_view s);

struct RunHistory {
  TaskSpec task;
  ModelConfig model;
  OptimConfig optim;
  std::uint64_t train_seed = 0;
  std::vector<CheckpointRecord> records;
  Termination termination = Termination::completed;
  std::int64_t stop_step = 0;
  std::string error;  // set when termination == failed
};

struct HistoryWriteOptions {
  int top_entries = 16;
  bool full_spectrum = false;
  int k = 5;
};

/// JSON Lines: a header line echoing the full configuration, one line per
/// checkpoint {step, train_loss, train_acc, eval_acc, htc, head_mass,
/// top16_eigmass, tail_eigmass}, and a closing termination line.
void write_history(std::ostream& out, const RunHistory& history, const HistoryWriteOptions& options = {});
RunHistory read_history(std::istream& in);

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_from_json(const nlohmann::json& j, const ModelConfig& defaults = {});
nlohmann::json to_json(const OptimConfig& config);
OptimConfig optim_from_json(const nlohmann::json& j, const OptimConfig& defaults = {});

}  // namespace grokscale
