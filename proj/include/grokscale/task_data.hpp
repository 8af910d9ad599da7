#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace grokscale {

enum class Operation { add, sub, mul };

std::string_view to_string(Operation op);
Operation parse_operation(std::string_view name);

/// One modular-arithmetic condition.
struct TaskSpec {
  int p = 53;
  Operation op = Operation::add;
  double f = 0.5;
  std::uint64_t data_seed = 0;

  std::int64_t train_size() const;
  /// Throws ConfigError unless p is prime, p >= 5, 0 < f < 1 and train is nonempty.
  void validate() const;
};

struct LabeledPair {
  std::int32_t a = 0;
  std::int32_t b = 0;
  std::int32_t label = 0;

  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
  friend auto operator<=>(const LabeledPair&, const LabeledPair&) = default;
};

struct DatasetSplit {
  std::vector<LabeledPair> train;
  std::vector<LabeledPair> probe;
  std::vector<LabeledPair> eval;
};

bool is_prime(int n);
std::int32_t apply_operation(Operation op, std::int32_t a, std::int32_t b, std::int32_t p);

/// All p*p pairs in lexicographic (a, b) order.
std::vector<LabeledPair> enumerate_pairs(int p, Operation op);

/// Probe size for a held-out pool: min(7600, ceil(held_out / 2)).
std::int64_t probe_size_for(std::int64_t held_out);

/// Shuffle the full pool once with data_seed and cut train | probe | eval.
DatasetSplit partition(const TaskSpec& spec);

/// FNV-1a over the (a, b) sequence of train, probe and eval in order.
std::uint64_t order_checksum(const DatasetSplit& split);

/// {p, op, f, data_seed, train_size, probe_size, eval_size, order_checksum}.
nlohmann::json split_manifest(const TaskSpec& spec, const DatasetSplit& split);

nlohmann::json to_json(const TaskSpec& spec);
TaskSpec task_from_json(const nlohmann::json& j);

}  // namespace grokscale
