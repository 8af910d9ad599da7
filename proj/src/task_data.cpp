#include "grokscale/task_data.hpp"

#include <cmath>
#include <cstdio>
#include <span>

#include "grokscale/errors.hpp"
#include "grokscale/random.hpp"

namespace grokscale {

std::string_view to_string(Operation op) {
  switch (op) {
    case Operation::add: return "add";
    case Operation::sub: return "sub";
    case Operation::mul: return "mul";
  }
  return "?";
}

Operation parse_operation(std::string_view name) {
  if (name == "add") return Operation::add;
  if (name == "sub") return Operation::sub;
  if (name == "mul") return Operation::mul;
  throw ConfigError("unknown operation '" + std::string(name) + "' (expected add, sub or mul)");
}

bool is_prime(int n) {
  if (n < 2) return false;
  for (int d = 2; static_cast<long long>(d) * d <= n; ++d) {
    if (n % d == 0) return false;
  }
  return true;
}

std::int32_t apply_operation(Operation op, std::int32_t a, std::int32_t b, std::int32_t p) {
  const std::int64_t x = a, y = b, m = p;
  switch (op) {
    case Operation::add: return static_cast<std::int32_t>((x + y) % m);
    // Non-negative representative of a - b.
    case Operation::sub: return static_cast<std::int32_t>(((x - y) % m + m) % m);
    case Operation::mul: return static_cast<std::int32_t>((x * y) % m);
  }
  return 0;
}

std::int64_t TaskSpec::train_size() const {
  const double pool = static_cast<double>(p) * static_cast<double>(p);
  return static_cast<std::int64_t>(std::floor(f * pool));
}

void TaskSpec::validate() const {
  if (p < 5 || !is_prime(p)) {
    throw ConfigError("modulus p=" + std::to_string(p) + " must be a prime >= 5");
  }
  if (!(f > 0.0 && f < 1.0)) {
    throw ConfigError("training fraction f=" + std::to_string(f) + " must lie in (0, 1)");
  }
  if (train_size() < 1) {
    throw ConfigError("training fraction f=" + std::to_string(f) + " leaves an empty training set");
  }
}

std::vector<LabeledPair> enumerate_pairs(int p, Operation op) {
  if (p < 2 || !is_prime(p)) {
    throw ConfigError("modulus p=" + std::to_string(p) + " is not prime");
  }
  std::vector<LabeledPair> pairs;
  pairs.reserve(static_cast<std::size_t>(p) * p);
  for (std::int32_t a = 0; a < p; ++a) {
    for (std::int32_t b = 0; b < p; ++b) {
      pairs.push_back({a, b, apply_operation(op, a, b, p)});
    }
  }
  return pairs;
}

std::int64_t probe_size_for(std::int64_t held_out) {
  constexpr std::int64_t cap = 7600;
  return std::min(cap, (held_out + 1) / 2);
}

DatasetSplit partition(const TaskSpec& spec) {
  spec.validate();
  std::vector<LabeledPair> pool = enumerate_pairs(spec.p, spec.op);
  Xoshiro256 rng(spec.data_seed);
  fisher_yates(std::span<LabeledPair>(pool), rng);

  const auto total = static_cast<std::int64_t>(pool.size());
  const std::int64_t n_train = spec.train_size();
  const std::int64_t held_out = total - n_train;
  const std::int64_t n_probe = probe_size_for(held_out);
  if (held_out - n_probe < 1) {
    throw ConfigError("training fraction f=" + std::to_string(spec.f) + " leaves no evaluation examples");
  }

  DatasetSplit split;
  const auto begin = pool.begin();
  split.train.assign(begin, begin + n_train);
  split.probe.assign(begin + n_train, begin + n_train + n_probe);
  split.eval.assign(begin + n_train + n_probe, pool.end());
  return split;
}

std::uint64_t order_checksum(const DatasetSplit& split) {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (const auto* part : {&split.train, &split.probe, &split.eval}) {
    for (const auto& pair : *part) {
      const unsigned char bytes[8] = {
          static_cast<unsigned char>(pair.a), static_cast<unsigned char>(pair.a >> 8),
          static_cast<unsigned char>(pair.a >> 16), static_cast<unsigned char>(pair.a >> 24),
          static_cast<unsigned char>(pair.b), static_cast<unsigned char>(pair.b >> 8),
          static_cast<unsigned char>(pair.b >> 16), static_cast<unsigned char>(pair.b >> 24)};
      hash = fnv1a(bytes, hash);
    }
  }
  return hash;
}

static std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json split_manifest(const TaskSpec& spec, const DatasetSplit& split) {
  nlohmann::json j = to_json(spec);
  j["train_size"] = split.train.size();
  j["probe_size"] = split.probe.size();
  j["eval_size"] = split.eval.size();
  j["order_checksum"] = hex64(order_checksum(split));
  return j;
}

nlohmann::json to_json(const TaskSpec& spec) {
  return {{"p", spec.p}, {"op", std::string(to_string(spec.op))}, {"f", spec.f}, {"data_seed", spec.data_seed}};
}

TaskSpec task_from_json(const nlohmann::json& j) {
  TaskSpec spec;
  spec.p = j.at("p").get<int>();
  spec.op = parse_operation(j.at("op").get<std::string>());
  spec.f = j.at("f").get<double>();
  spec.data_seed = j.value("data_seed", std::uint64_t{0});
  return spec;
}

}  // namespace grokscale
