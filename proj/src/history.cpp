#include "grokscale/history.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "grokscale/errors.hpp"

namespace grokscale {

using nlohmann::json;

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::completed: return "completed";
    case Termination::early_stopped: return "early_stopped";
    case Termination::failed: return "failed";
  }
  return "?";
}

Termination parse_termination(std::string_view s) {
  if (s == "completed") return Termination::completed;
  if (s == "early_stopped") return Termination::early_stopped;
  if (s == "failed") return Termination::failed;
  throw InputError("unknown termination '" + std::string(s) + "'");
}

json to_json(const ModelConfig& c) {
  return {{"d_model", c.d_model}, {"n_layers", c.n_layers}, {"n_heads", c.n_heads}, {"d_ff", c.d_ff},
          {"vocab", c.vocab},     {"seq_len", c.seq_len},   {"init_seed", c.init_seed}};
}

ModelConfig model_from_json(const json& j, const ModelConfig& defaults) {
  ModelConfig c = defaults;
  c.d_model = j.value("d_model", c.d_model);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.d_ff = j.value("d_ff", c.d_ff);
  c.vocab = j.value("vocab", c.vocab);
  c.seq_len = j.value("seq_len", c.seq_len);
  c.init_seed = j.value("init_seed", c.init_seed);
  return c;
}

json to_json(const OptimConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"weight_decay", c.weight_decay}, {"beta1", c.beta1},
          {"beta2", c.beta2},                 {"eps", c.eps},                   {"batch_size", c.batch_size},
          {"eval_batch_size", c.eval_batch_size}, {"max_steps", c.max_steps},   {"log_every", c.log_every}};
}

OptimConfig optim_from_json(const json& j, const OptimConfig& defaults) {
  OptimConfig c = defaults;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.eval_batch_size = j.value("eval_batch_size", c.eval_batch_size);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.log_every = j.value("log_every", c.log_every);
  return c;
}

void write_history(std::ostream& out, const RunHistory& h, const HistoryWriteOptions& options) {
  json header = {{"task", to_json(h.task)},
                 {"model", to_json(h.model)},
                 {"optim", to_json(h.optim)},
                 {"train_seed", h.train_seed},
                 {"head_k", options.k}};
  out << header.dump() << '\n';

  for (const auto& r : h.records) {
    const auto& mass = r.spectral.eig_mass;
    const std::size_t keep =
        options.full_spectrum ? mass.size() : std::min(mass.size(), static_cast<std::size_t>(options.top_entries));
    const double tail = std::accumulate(mass.begin() + static_cast<std::ptrdiff_t>(keep), mass.end(), 0.0) +
                        r.spectral.tail_mass;
    const std::size_t head_n = std::min(mass.size(), static_cast<std::size_t>(std::max(options.k, 0)));
    const double head = std::accumulate(mass.begin(), mass.begin() + static_cast<std::ptrdiff_t>(head_n), 0.0);
    json line = {{"step", r.step},
                 {"train_loss", r.train_loss},
                 {"train_acc", r.train_acc},
                 {"eval_acc", r.eval_acc},
                 {"htc", r.spectral.htc},
                 {"head_mass", head},
                 {"top16_eigmass", std::vector<double>(mass.begin(), mass.begin() + static_cast<std::ptrdiff_t>(keep))},
                 {"tail_eigmass", tail}};
    out << line.dump() << '\n';
  }

  json closing = {{"termination", to_string(h.termination)}, {"stop_step", h.stop_step}};
  if (h.termination == Termination::failed) closing["error"] = h.error;
  out << closing.dump() << '\n';
}

RunHistory read_history(std::istream& in) {
  RunHistory h;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false, closed = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (closed) throw InputError("history has content after the termination line");
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InputError("history line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (!have_header) {
        if (!j.contains("task")) throw InputError("history is missing its header line");
        h.task = task_from_json(j.at("task"));
        h.model = model_from_json(j.at("model"));
        h.optim = optim_from_json(j.at("optim"));
        h.train_seed = j.at("train_seed").get<std::uint64_t>();
        have_header = true;
        continue;
      }
      if (j.contains("termination")) {
        h.termination = parse_termination(j.at("termination").get<std::string>());
        h.stop_step = j.value("stop_step", std::int64_t{0});
        h.error = j.value("error", std::string{});
        closed = true;
        continue;
      }
      CheckpointRecord r;
      r.step = j.at("step").get<std::int64_t>();
      r.train_loss = j.at("train_loss").get<double>();
      r.train_acc = j.at("train_acc").get<double>();
      r.eval_acc = j.at("eval_acc").get<double>();
      r.spectral.step = r.step;
      r.spectral.htc = j.at("htc").get<double>();
      r.spectral.eig_mass = j.at("top16_eigmass").get<std::vector<double>>();
      r.spectral.tail_mass = j.at("tail_eigmass").get<double>();
      h.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw InputError("history line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw InputError("history is empty");
  if (!closed) throw InputError("history is truncated (no termination line)");
  return h;
}

}  // namespace grokscale
