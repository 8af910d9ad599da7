#include "grokscale/lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "grokscale/errors.hpp"
#include "grokscale/kernels.hpp"
#include "grokscale/observables.hpp"
#include "grokscale/oracle.hpp"
#include "grokscale/random.hpp"
#include "grokscale/reference.hpp"
#include "grokscale/trainer.hpp"

namespace grokscale::lab {

using nlohmann::json;

fs::path resolve_output(const fs::path& path) {
  if (path.is_absolute()) return path;
  if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / path;
  return path;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string content_checksum(const std::string& bytes) {
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(std::span<const unsigned char>(data, bytes.size()))));
  return buf;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string RunKey::id() const {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s_p%d_f%.4f_wd%.4f_s%d", std::string(to_string(op)).c_str(), p, f, weight_decay,
                seed);
  return buf;
}

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::pending: return "pending";
    case RunStatus::running: return "running";
    case RunStatus::done: return "done";
    case RunStatus::failed: return "failed";
  }
  return "?";
}

RunStatus parse_run_status(std::string_view s) {
  if (s == "pending") return RunStatus::pending;
  if (s == "running") return RunStatus::running;
  if (s == "done") return RunStatus::done;
  if (s == "failed") return RunStatus::failed;
  throw InputError("unknown run status '" + std::string(s) + "'");
}

void SweepConfig::validate() const {
  if (p_list.empty()) throw ConfigError("p_list must be nonempty");
  if (f_grid.empty()) throw ConfigError("f_grid must be nonempty");
  if (seed_start != 0) throw ConfigError("seed range must start at 0");
  if (seed_count < 1) throw ConfigError("seed count must be positive");
  if (parallel < 1) throw ConfigError("parallel must be at least 1");
  for (double wd : weight_decays) {
    if (!(wd >= 0.0) || !std::isfinite(wd)) throw ConfigError("weight decays must be finite and non-negative");
  }
  for (int p : p_list) {
    for (double f : f_grid) {
      const TaskSpec spec{p, op, f, 0};
      spec.validate();
      const std::int64_t held_out = static_cast<std::int64_t>(p) * p - spec.train_size();
      if (held_out - probe_size_for(held_out) < 1) {
        throw ConfigError("p=" + std::to_string(p) + ", f=" + std::to_string(f) + " leaves no evaluation examples");
      }
    }
  }
  ModelConfig m = model;
  m.vocab = p_list.front();
  m.validate();
  optim.validate();
}

std::vector<double> SweepConfig::decay_grid() const {
  return weight_decays.empty() ? std::vector<double>{optim.weight_decay} : weight_decays;
}

std::vector<RunKey> SweepConfig::runs() const {
  std::vector<RunKey> out;
  for (int p : p_list) {
    for (double f : f_grid) {
      for (double wd : decay_grid()) {
        for (int s = seed_start; s < seed_start + seed_count; ++s) out.push_back({op, p, f, wd, s});
      }
    }
  }
  return out;
}

namespace {

std::vector<double> parse_grid(const json& j, const char* name) {
  if (j.is_array()) return j.get<std::vector<double>>();
  if (j.is_object()) return oracle::linear_grid(j.at("start").get<double>(), j.at("stop").get<double>(),
                                                j.at("step").get<double>());
  throw ConfigError(std::string(name) + " must be a list or {start, stop, step}");
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError(std::string("unknown field '") + key + "' in " + where);
    }
  }
}

}  // namespace

SweepConfig sweep_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("sweep config must be a JSON object");
  reject_unknown(j, {"p_list", "p", "f_grid", "weight_decays", "op", "seeds", "model", "optim", "output_dir",
                     "parallel"},
                 "sweep config");
  SweepConfig c;
  try {
    if (j.contains("p_list")) c.p_list = j.at("p_list").get<std::vector<int>>();
    if (j.contains("p")) c.p_list = {j.at("p").get<int>()};
    if (j.contains("f_grid")) c.f_grid = parse_grid(j.at("f_grid"), "f_grid");
    if (j.contains("weight_decays")) c.weight_decays = parse_grid(j.at("weight_decays"), "weight_decays");
    if (j.contains("op")) c.op = parse_operation(j.at("op").get<std::string>());
    if (j.contains("seeds")) {
      const auto& s = j.at("seeds");
      if (s.is_number_integer()) {
        c.seed_count = s.get<int>();
      } else {
        reject_unknown(s, {"start", "count"}, "seeds");
        c.seed_start = s.value("start", 0);
        c.seed_count = s.value("count", 1);
      }
    }
    if (j.contains("model")) {
      reject_unknown(j.at("model"), {"d_model", "n_layers", "n_heads", "d_ff"}, "model");
      c.model = model_from_json(j.at("model"), c.model);
    }
    if (j.contains("optim")) {
      reject_unknown(j.at("optim"), {"learning_rate", "weight_decay", "beta1", "beta2", "eps", "batch_size",
                                     "eval_batch_size", "max_steps", "log_every"},
                     "optim");
      c.optim = optim_from_json(j.at("optim"), c.optim);
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("parallel")) c.parallel = j.at("parallel").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sweep config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const SweepConfig& c) {
  json model = grokscale::to_json(c.model);
  model.erase("vocab");
  model.erase("init_seed");
  model.erase("seq_len");
  return {{"p_list", c.p_list},
          {"f_grid", c.f_grid},
          {"weight_decays", c.decay_grid()},
          {"op", std::string(to_string(c.op))},
          {"seeds", {{"start", c.seed_start}, {"count", c.seed_count}}},
          {"model", model},
          {"optim", grokscale::to_json(c.optim)}};
}

json SweepManifest::to_json() const {
  json list = json::array();
  for (const auto& r : runs) {
    list.push_back({{"id", r.key.id()},
                    {"op", std::string(grokscale::to_string(r.key.op))},
                    {"p", r.key.p},
                    {"f", r.key.f},
                    {"weight_decay", r.key.weight_decay},
                    {"seed", r.key.seed},
                    {"status", std::string(lab::to_string(r.status))},
                    {"file", r.file},
                    {"checksum", r.checksum}});
  }
  return {{"format", "grokscale-manifest"}, {"config", config}, {"runs", list}};
}

SweepManifest SweepManifest::from_json(const json& j) {
  if (j.value("format", std::string{}) != "grokscale-manifest") throw InputError("not a grokscale manifest");
  SweepManifest m;
  try {
    m.config = j.at("config");
    for (const auto& r : j.at("runs")) {
      RunEntry e;
      e.key.op = parse_operation(r.at("op").get<std::string>());
      e.key.p = r.at("p").get<int>();
      e.key.f = r.at("f").get<double>();
      e.key.weight_decay = r.at("weight_decay").get<double>();
      e.key.seed = r.at("seed").get<int>();
      e.status = parse_run_status(r.at("status").get<std::string>());
      e.file = r.value("file", std::string{});
      e.checksum = r.value("checksum", std::string{});
      m.runs.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

RunEntry* SweepManifest::find(const RunKey& key) {
  for (auto& r : runs) {
    if (r.key == key) return &r;
  }
  return nullptr;
}

RunHistory default_run(const RunKey& key, const SweepConfig& config) {
  OptimConfig optim = config.optim;
  optim.weight_decay = key.weight_decay;
  const TaskSpec task{key.p, key.op, key.f, static_cast<std::uint64_t>(key.seed)};
  return train_run(task, config.model, optim, static_cast<std::uint64_t>(key.seed));
}

namespace {

bool history_intact(const fs::path& dir, const RunEntry& e) {
  if (e.file.empty() || e.checksum.empty()) return false;
  const fs::path path = dir / e.file;
  if (!fs::exists(path)) return false;
  return content_checksum(read_file(path)) == e.checksum;
}

}  // namespace

SweepSummary run_sweep(const SweepConfig& config, const SweepOptions& options) {
  config.validate();
  const fs::path dir = resolve_output(config.output_dir);
  fs::create_directories(dir / "runs");
  const fs::path manifest_path = dir / "manifest.json";
  const json config_echo = to_json(config);

  SweepManifest manifest;
  if (fs::exists(manifest_path)) {
    manifest = SweepManifest::from_json(json::parse(read_file(manifest_path)));
    if (manifest.config != config_echo) {
      throw ConfigError("existing manifest in " + dir.string() + " was written for a different configuration");
    }
  }
  manifest.config = config_echo;

  SweepSummary summary;
  std::vector<RunEntry> entries;
  std::vector<std::size_t> todo;
  for (const RunKey& key : config.runs()) {
    RunEntry e{key, RunStatus::pending, "runs/" + key.id() + ".jsonl", ""};
    if (const RunEntry* old = manifest.find(key)) {
      if ((old->status == RunStatus::done || old->status == RunStatus::failed) && history_intact(dir, *old)) {
        e = *old;
        ++summary.skipped;
      }
    }
    if (e.status == RunStatus::pending) todo.push_back(entries.size());
    entries.push_back(std::move(e));
  }
  manifest.runs = entries;
  summary.total = entries.size();

  std::mutex mutex;
  auto save = [&] { write_file_atomic(manifest_path, manifest.to_json().dump(1) + "\n"); };
  auto set_entry = [&](std::size_t i, const RunEntry& e) {
    std::lock_guard lock(mutex);
    manifest.runs[i] = e;
    save();
  };
  {
    std::lock_guard lock(mutex);
    save();
  }

  const int workers = std::max(1, std::min<int>(config.parallel, static_cast<int>(todo.size())));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::atomic<std::size_t> executed{0}, failed{0};

  auto worker = [&] {
    if (workers > 1) kernels::set_kernel_threads(1);
    while (true) {
      if (stop.load()) return;
      if (options.should_stop) {
        std::lock_guard lock(mutex);
        if (options.should_stop()) {
          stop = true;
          return;
        }
      }
      const std::size_t slot = next.fetch_add(1);
      if (slot >= todo.size()) return;
      const std::size_t i = todo[slot];
      RunEntry e = entries[i];
      e.status = RunStatus::running;
      set_entry(i, e);

      RunHistory h;
      try {
        h = options.runner(e.key, config);
      } catch (const std::exception& ex) {
        h.task = TaskSpec{e.key.p, e.key.op, e.key.f, static_cast<std::uint64_t>(e.key.seed)};
        h.model = config.model;
        h.optim = config.optim;
        h.optim.weight_decay = e.key.weight_decay;
        h.train_seed = static_cast<std::uint64_t>(e.key.seed);
        h.termination = Termination::failed;
        h.error = ex.what();
      }
      std::ostringstream out;
      write_history(out, h);
      const std::string bytes = out.str();
      write_file_atomic(dir / e.file, bytes);
      e.checksum = content_checksum(bytes);
      e.status = h.termination == Termination::failed ? RunStatus::failed : RunStatus::done;
      if (e.status == RunStatus::failed) ++failed;
      ++executed;
      set_entry(i, e);
      if (options.on_finished) {
        std::lock_guard lock(mutex);
        options.on_finished(e);
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  summary.executed = executed;
  summary.failed = failed;
  for (const auto& r : manifest.runs) summary.interrupted |= r.status == RunStatus::pending;
  return summary;
}

namespace {

RunHistory load_history(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  return read_history(in);
}

std::vector<std::vector<std::string>> phase_table(const fss::PhaseMap& map) {
  std::vector<std::vector<std::string>> t{{"f", "weight_decay", "majority", "grok_fraction", "mean_grok_time", "seeds"}};
  for (const auto& [key, cell] : map) {
    t.push_back({format_number(key.first), format_number(key.second), std::string(fss::to_string(cell.majority)),
                 format_number(cell.grok_fraction),
                 cell.mean_grok_time ? format_number(*cell.mean_grok_time) : std::string(""),
                 std::to_string(cell.seeds)});
  }
  return t;
}

void write_csv(const fs::path& path, const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace

PhaseMapResult run_phase_map(const SweepConfig& config, const SweepOptions& options) {
  if (config.p_list.size() != 1) throw ConfigError("phase map needs exactly one p");
  if (config.weight_decays.empty()) throw ConfigError("phase map needs a weight_decays grid");
  run_sweep(config, options);

  const fs::path dir = resolve_output(config.output_dir);
  const SweepManifest manifest = SweepManifest::from_json(json::parse(read_file(dir / "manifest.json")));
  std::map<std::pair<double, double>, std::vector<fss::SeedOutcome>> cells;
  std::size_t failed = 0, missing = 0;
  for (const auto& e : manifest.runs) {
    if (e.status == RunStatus::failed) ++failed;
    if (e.status != RunStatus::done) {
      if (e.status != RunStatus::failed) ++missing;
      continue;
    }
    const RunHistory h = load_history(dir / e.file);
    const GrokVerdict v = detect_grok(h);
    cells[{e.key.f, e.key.weight_decay}].push_back({fss::phase_label(h), v.grok_step});
  }

  PhaseMapResult result;
  result.map = fss::majority_phase_map(cells);
  json list = json::array();
  for (const auto& [key, cell] : result.map) {
    json counts = json::object();
    for (const auto& [label, n] : cell.counts) counts[std::string(fss::to_string(label))] = n;
    list.push_back({{"f", key.first},
                    {"weight_decay", key.second},
                    {"majority", std::string(fss::to_string(cell.majority))},
                    {"grok_fraction", cell.grok_fraction},
                    {"mean_grok_time", cell.mean_grok_time ? json(*cell.mean_grok_time) : json(nullptr)},
                    {"seeds", cell.seeds},
                    {"counts", counts}});
  }
  result.report = {{"format", "grokscale-phase-map"},
                   {"p", config.p_list.front()},
                   {"op", std::string(to_string(config.op))},
                   {"failed_runs", failed},
                   {"missing_runs", missing},
                   {"cells", list}};
  write_file_atomic(dir / "phase_map.json", result.report.dump(1) + "\n");
  write_csv(dir / "phase_map.csv", phase_table(result.map));

  figures::Heatmap hm;
  hm.stem = "phase_map";
  hm.title = "Majority phase, p = " + std::to_string(config.p_list.front());
  hm.x_label = "training fraction f";
  hm.y_label = "weight decay";
  const std::vector<double> decays = config.decay_grid();
  for (double f : config.f_grid) hm.x_ticks.push_back(format_number(f));
  for (double wd : decays) hm.y_ticks.push_back(format_number(wd));
  const fss::PhaseLabel labels[] = {fss::PhaseLabel::no_memorization, fss::PhaseLabel::memorization_only,
                                    fss::PhaseLabel::grokking, fss::PhaseLabel::instant_generalization};
  for (auto l : labels) hm.legend.emplace_back(fss::to_string(l));
  for (double wd : decays) {
    std::vector<int> row;
    for (double f : config.f_grid) {
      const auto it = result.map.find({f, wd});
      row.push_back(it == result.map.end() ? -1 : static_cast<int>(it->second.majority));
    }
    hm.category.push_back(row);
  }
  write_file_atomic(dir / "phase_map.svg", figures::render_heatmap_svg(hm));
  return result;
}

AnalysisInput load_analysis_input(const fs::path& input, const AnalyzeOptions& options) {
  AnalysisInput out;
  fs::path ensemble_file;
  if (fs::is_regular_file(input)) {
    ensemble_file = input;
  } else if (fs::exists(input / "ensembles.json")) {
    ensemble_file = input / "ensembles.json";
  }
  if (!ensemble_file.empty()) {
    json j;
    try {
      j = json::parse(read_file(ensemble_file));
    } catch (const json::parse_error& e) {
      throw InputError(ensemble_file.string() + ": " + e.what());
    }
    out.ensembles = oracle::ensembles_from_json(j);
    out.source = {{"kind", "ensembles"}, {"origin", j.value("source", json::object())}};
    return out;
  }
  if (!fs::exists(input / "manifest.json")) {
    throw InputError(input.string() + " holds neither ensembles.json nor manifest.json");
  }
  const SweepManifest manifest = SweepManifest::from_json(json::parse(read_file(input / "manifest.json")));
  std::map<std::tuple<int, int, double>, fss::SeedEnsemble> groups;
  for (const auto& e : manifest.runs) {
    if (e.status == RunStatus::failed) {
      ++out.failed_runs;
      continue;
    }
    if (e.status != RunStatus::done || !history_intact(input, e)) {
      ++out.missing_runs;
      continue;
    }
    const RunHistory h = load_history(input / e.file);
    if (h.records.empty()) {
      ++out.failed_runs;
      continue;
    }
    auto& g = groups[{static_cast<int>(e.key.op), e.key.p, e.key.f}];
    g.p = e.key.p;
    g.f = e.key.f;
    g.op = e.key.op;
    g.values.push_back(tail_mean(h, options.tail_window, options.k));
  }
  for (auto& [key, g] : groups) out.ensembles.push_back(std::move(g));
  out.source = {{"kind", "sweep"}, {"config", manifest.config}};
  return out;
}

namespace {

using Table = std::vector<std::vector<std::string>>;

struct OpResult {
  json section;
  bool partial = false;
};

std::string verdict_crossover(const json& aic) {
  if (!aic.value("available", false)) return "unavailable";
  const double d = aic.at("delta_aic").get<double>();
  if (d >= 15.0) return "strongly disfavored";
  if (d >= 2.0) return "disfavored";
  if (d <= -2.0) return "smooth crossover favored";
  return "inconclusive";
}

std::string verdict_crossing(const json& crossing, const json& drift) {
  if (!crossing.value("available", false)) return "unavailable";
  if (drift.value("available", false) && drift.at("significant").get<bool>()) return "drifting";
  return crossing.at("spread").get<double>() < 0.025 ? "strengthened" : "supported";
}

std::string verdict_order(const json& extrap, const json& bimodal) {
  if (bimodal.value("any_bimodal", false)) return "first-order-like";
  if (!extrap.value("available", false)) return "unavailable";
  const double a = extrap.at("intercept").get<double>();
  const double se = extrap.at("intercept_se").get<double>();
  if (a < -2.0 * se) return "unresolved";
  return "continuity-leaning";
}

OpResult analyze_operation(Operation op, const std::vector<const fss::SeedEnsemble*>& ensembles,
                           const AnalyzeOptions& options, DiagnosticsReport& report) {
  OpResult result;
  json& s = result.section;
  json warnings = json::array();
  const std::string opname(to_string(op));

  std::map<int, std::vector<const fss::SeedEnsemble*>> by_p;
  std::set<double> fset;
  for (const auto* e : ensembles) {
    by_p[e->p].push_back(e);
    fset.insert(e->f);
  }
  for (auto& [p, list] : by_p) {
    std::stable_sort(list.begin(), list.end(), [](const auto* a, const auto* b) { return a->f < b->f; });
  }
  const std::vector<double> f_grid(fset.begin(), fset.end());
  std::vector<int> sizes;
  for (const auto& [p, list] : by_p) sizes.push_back(p);
  s["sizes"] = sizes;
  s["f_grid"] = f_grid;

  // Raw order-parameter curves.
  Table raw{{"op", "p", "f", "mean", "sem", "n_s"}};
  figures::Chart raw_chart{"fig1_order_parameter_" + opname, "Order parameter vs training fraction (" + opname + ")",
                           "training fraction f", "mean HTC", {}};
  for (const auto& [p, list] : by_p) {
    figures::Series series{"p=" + std::to_string(p), {}, {}};
    for (const auto* e : list) {
      const double m = stats::mean(e->values);
      const double sem = e->n_s() > 1 ? stats::sample_std(e->values) / std::sqrt(static_cast<double>(e->n_s())) : 0.0;
      raw.push_back({opname, std::to_string(p), format_number(e->f), format_number(m), format_number(sem),
                     std::to_string(e->n_s())});
      series.x.push_back(e->f);
      series.y.push_back(m);
    }
    raw_chart.series.push_back(series);
  }
  report.tables.emplace_back("fig1_order_parameter_" + opname, raw);
  report.charts.push_back(raw_chart);

  // Binder curves.
  std::vector<fss::BinderCurve> curves;
  Table binder{{"op", "p", "f", "u4", "se"}};
  figures::Chart binder_chart{"fig2_binder_" + opname, "Binder cumulant (" + opname + ")", "training fraction f",
                              "U4", {}};
  for (const auto& [p, list] : by_p) {
    stats::BootstrapOptions boot{options.resamples, derive_seed(options.seed, 1)};
    try {
      fss::BinderCurve c = fss::binder_curve(p, list, boot);
      figures::Series series{"p=" + std::to_string(p), {}, {}};
      for (const auto& pt : c.points) {
        binder.push_back({opname, std::to_string(p), format_number(pt.f), format_number(pt.u4), format_number(pt.se)});
        series.x.push_back(pt.f);
        series.y.push_back(pt.u4);
      }
      binder_chart.series.push_back(series);
      curves.push_back(std::move(c));
    } catch (const InputError& e) {
      warnings.push_back("Binder curve for p=" + std::to_string(p) + " unavailable: " + e.what());
    }
  }
  report.tables.emplace_back("fig2_binder_" + opname, binder);
  report.charts.push_back(binder_chart);

  // Crossings and the dominant branch.
  fss::FWindow window;
  if (options.window) {
    window = *options.window;
  } else if (!f_grid.empty()) {
    const double lo = f_grid.front(), hi = f_grid.back();
    window = {lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo)};
  }
  json crossing = {{"available", false}, {"window", {window.lo, window.hi}}};
  json drift = {{"available", false}};
  std::optional<fss::BranchResult> branch;
  Table crossing_table{{"op", "p_i", "p_j", "f_star", "cluster", "in_branch"}};
  if (curves.size() < 2) {
    crossing["reason"] = "fewer than two sizes";
    result.partial = true;
  } else {
    std::vector<fss::CrossingEstimate> all;
    try {
      all = fss::all_crossings(curves);
    } catch (const InputError& e) {
      warnings.push_back(std::string("crossings: ") + e.what());
    }
    branch = fss::dominant_branch(all, window);
    crossing["n_crossings"] = all.size();
    if (branch) {
      crossing["available"] = true;
      crossing["f_c"] = branch->f_c;
      crossing["spread"] = branch->spread;
      crossing["clusters"] = branch->clusters;
      crossing["n_members"] = branch->members.size();
      json members = json::array();
      for (const auto& m : branch->members) {
        members.push_back({{"p_pair", {m.p_pair.first, m.p_pair.second}}, {"f_star", m.f_star}});
      }
      crossing["members"] = members;
    } else {
      crossing["reason"] = "no crossing inside the window";
      result.partial = true;
    }
    std::vector<fss::CrossingEstimate> sorted = all;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.f_star < b.f_star; });
    int cluster = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (i > 0 && sorted[i].f_star - sorted[i - 1].f_star > fss::kBranchGap) ++cluster;
      bool member = false;
      if (branch) {
        for (const auto& m : branch->members) member |= m.p_pair == sorted[i].p_pair && m.f_star == sorted[i].f_star;
      }
      crossing_table.push_back({opname, std::to_string(sorted[i].p_pair.first), std::to_string(sorted[i].p_pair.second),
                                format_number(sorted[i].f_star), std::to_string(cluster), member ? "1" : "0"});
    }
    if (branch) {
      const auto d = fss::drift_test(branch->members, {options.resamples, derive_seed(options.seed, 2)});
      if (d) {
        drift = {{"available", true},
                 {"slope", d->slope},
                 {"ci", {d->ci_low, d->ci_high}},
                 {"significant", d->significant},
                 {"members", d->members}};
      } else {
        drift["reason"] = "fewer than three distinct pair sizes in the branch";
        result.partial = true;
      }
    } else {
      drift["reason"] = "no dominant branch";
    }
  }
  s["crossing"] = crossing;
  s["drift"] = drift;
  report.tables.emplace_back("fig2_crossings_" + opname, crossing_table);

  // Susceptibility peaks and model comparison.
  Table chi_table{{"op", "p", "f", "chi"}};
  Table peak_table{{"op", "p", "chi_max", "f_at_max", "boundary"}};
  figures::Chart chi_chart{"fig3_susceptibility_" + opname, "Susceptibility (" + opname + ")", "training fraction f",
                           "chi", {}};
  std::vector<fss::SizePeak> peaks;
  json peak_list = json::array();
  for (const auto& [p, list] : by_p) {
    std::vector<double> fs_, chis;
    for (const auto* e : list) {
      if (e->n_s() < 2) continue;
      fs_.push_back(e->f);
      chis.push_back(fss::susceptibility(*e));
      chi_table.push_back({opname, std::to_string(p), format_number(e->f), format_number(chis.back())});
    }
    chi_chart.series.push_back({"p=" + std::to_string(p), fs_, chis});
    if (fs_.size() < 3) {
      warnings.push_back("chi peak for p=" + std::to_string(p) + " needs three fractions");
      continue;
    }
    const fss::ChiPeak pk = fss::chi_peak(p, fs_, chis);
    peak_table.push_back({opname, std::to_string(p), format_number(pk.chi_max), format_number(pk.f_at_max),
                          pk.boundary ? "1" : "0"});
    peak_list.push_back({{"p", p}, {"chi_max", pk.chi_max}, {"f_at_max", pk.f_at_max}, {"boundary", pk.boundary}});
    peaks.push_back({p, pk.chi_max});
  }
  report.tables.emplace_back("fig3_susceptibility_" + opname, chi_table);
  report.tables.emplace_back("fig3_peaks_" + opname, peak_table);
  report.charts.push_back(chi_chart);

  json aic = {{"available", false}, {"peaks", peak_list}};
  if (peaks.size() < 4) {
    aic["reason"] = "fewer than four sizes with a chi peak";
    result.partial = true;
  } else {
    try {
      const fss::AICComparison cmp = fss::aic_compare(peaks);
      aic["available"] = true;
      aic["n"] = cmp.n;
      aic["delta_aic"] = cmp.delta_aic;
      aic["power_law"] = {{"amplitude", cmp.power_law.amplitude},
                          {"exponent", cmp.power_law.shape},
                          {"ss", cmp.power_law.ss},
                          {"aic", cmp.power_law.aic}};
      aic["saturating"] = {{"amplitude", cmp.saturating.amplitude},
                           {"rate", cmp.saturating.shape},
                           {"ss", cmp.saturating.ss},
                           {"aic", cmp.saturating.aic}};
      Table fit_table{{"op", "p", "chi_max", "power_law", "saturating"}};
      figures::Chart fit_chart{"fig3_fits_" + opname, "Peak susceptibility vs size (" + opname + ")", "p", "chi_max",
                               {}};
      figures::Series data{"chi_max", {}, {}, false, true}, pw{"power law", {}, {}, true, false},
          sat{"saturating", {}, {}, true, false};
      std::vector<fss::SizePeak> sorted = peaks;
      std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.p < b.p; });
      for (const auto& pk : sorted) {
        const double yp = cmp.power_law.amplitude * std::pow(pk.p, cmp.power_law.shape);
        const double ys = cmp.saturating.amplitude * (1.0 - std::exp(-cmp.saturating.shape * pk.p));
        fit_table.push_back({opname, std::to_string(pk.p), format_number(pk.chi_max), format_number(yp),
                             format_number(ys)});
        data.x.push_back(pk.p);
        data.y.push_back(pk.chi_max);
        pw.x.push_back(pk.p);
        pw.y.push_back(yp);
        sat.x.push_back(pk.p);
        sat.y.push_back(ys);
      }
      fit_chart.series = {data, pw, sat};
      report.tables.emplace_back("fig3_fits_" + opname, fit_table);
      report.charts.push_back(fit_chart);
    } catch (const std::exception& e) {
      aic["reason"] = e.what();
      result.partial = true;
    }
  }
  s["susceptibility"] = aic;

  // Order audit: Binder minimum extrapolation.
  std::vector<std::pair<int, double>> u4min;
  Table u4_table{{"op", "p", "inv_p", "u4_min"}};
  figures::Chart u4_chart{"fig4_u4min_" + opname, "Binder minimum vs 1/p (" + opname + ")", "1/p", "U4 min", {}};
  figures::Series u4_series{"U4 min", {}, {}, false, true};
  for (const auto& c : curves) {
    const double m = fss::binder_minimum(c);
    u4min.emplace_back(c.p, m);
    u4_table.push_back({opname, std::to_string(c.p), format_number(1.0 / c.p), format_number(m)});
    u4_series.x.push_back(1.0 / c.p);
    u4_series.y.push_back(m);
  }
  json extrap = {{"available", false}};
  if (const auto ex = fss::binder_min_extrapolate(u4min, {options.resamples, derive_seed(options.seed, 3)})) {
    extrap = {{"available", true},
              {"intercept", ex->intercept},
              {"intercept_se", ex->intercept_se},
              {"slope", ex->slope},
              {"sizes", ex->sizes}};
    figures::Series line{"OLS fit", {0.0}, {ex->intercept}, true, false};
    for (const auto& [p, m] : u4min) {
      line.x.push_back(1.0 / p);
      line.y.push_back(ex->intercept + ex->slope / p);
    }
    u4_chart.series = {u4_series, line};
  } else {
    extrap["reason"] = "fewer than three sizes";
    u4_chart.series = {u4_series};
    result.partial = true;
  }
  s["binder_min_extrapolation"] = extrap;
  report.tables.emplace_back("fig4_u4min_" + opname, u4_table);
  report.charts.push_back(u4_chart);

  // Bimodality at the grid fraction nearest f_c.
  json bimodal = {{"available", false}, {"any_bimodal", false}};
  if (!f_grid.empty()) {
    const double target = branch ? branch->f_c : window.center();
    const double f_eval = *std::min_element(f_grid.begin(), f_grid.end(), [&](double a, double b) {
      return std::abs(a - target) < std::abs(b - target);
    });
    bimodal["f"] = f_eval;
    json per_size = json::array();
    Table kde_table{{"op", "p", "f", "x", "density"}};
    figures::Chart kde_chart{"fig4_kde_" + opname, "Seed distribution at f=" + format_number(f_eval) + " (" + opname + ")",
                             "HTC", "density", {}};
    bool any = false, evaluated = false;
    for (const auto& [p, list] : by_p) {
      const auto it = std::find_if(list.begin(), list.end(), [&](const auto* e) { return e->f == f_eval; });
      if (it == list.end() || (*it)->n_s() < 10) continue;
      const auto& values = (*it)->values;
      const fss::BimodalityResult b = fss::bimodality(values);
      evaluated = true;
      any |= b.bimodal;
      per_size.push_back({{"p", p},
                          {"n_modes", b.n_modes},
                          {"gap", b.gap},
                          {"gap_ok", b.gap_ok},
                          {"balanced_ok", b.balanced_ok},
                          {"bimodal", b.bimodal},
                          {"bandwidth", b.bandwidth}});
      if (b.bandwidth > 0.0) {
        const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
        const double lo = *mn - 3.0 * b.bandwidth, hi = *mx + 3.0 * b.bandwidth;
        const auto density = fss::kde(values, b.bandwidth, lo, hi, fss::kKdeGrid);
        figures::Series series{"p=" + std::to_string(p), {}, {}, true, false};
        for (int i = 0; i < fss::kKdeGrid; ++i) {
          const double x = lo + (hi - lo) * i / (fss::kKdeGrid - 1);
          kde_table.push_back({opname, std::to_string(p), format_number(f_eval), format_number(x),
                               format_number(density[static_cast<std::size_t>(i)])});
          series.x.push_back(x);
          series.y.push_back(density[static_cast<std::size_t>(i)]);
        }
        kde_chart.series.push_back(series);
      }
    }
    bimodal["available"] = evaluated;
    bimodal["any_bimodal"] = any;
    bimodal["per_size"] = per_size;
    if (!evaluated) bimodal["reason"] = "no ensemble with at least ten seeds at that fraction";
    report.tables.emplace_back("fig4_kde_" + opname, kde_table);
    report.charts.push_back(kde_chart);
  }
  s["bimodality"] = bimodal;

  // Exploratory data collapse.
  json collapse = {{"available", false}, {"exploratory", true}};
  if (branch) {
    std::vector<fss::SeedEnsemble> flat;
    for (const auto* e : ensembles) flat.push_back(*e);
    if (const auto c = fss::collapse_fit(flat, branch->f_c)) {
      collapse = {{"available", true},
                  {"exploratory", true},
                  {"beta_over_nu", c->beta_over_nu},
                  {"one_over_nu", c->one_over_nu},
                  {"quality", c->quality},
                  {"dof", c->dof},
                  {"sharpness", c->sharpness},
                  {"low_confidence", c->low_confidence},
                  {"overfit_warning", c->overfit_warning}};
      Table collapse_table{{"op", "p", "f", "x_scaled", "y_scaled"}};
      figures::Chart collapse_chart{"fig_collapse_" + opname, "Exploratory collapse (" + opname + ")",
                                    "(f - f_c) p^(1/nu)", "m p^(beta/nu)", {}};
      for (const auto& [p, list] : by_p) {
        figures::Series series{"p=" + std::to_string(p), {}, {}};
        for (const auto* e : list) {
          const double x = (e->f - branch->f_c) * std::pow(p, c->one_over_nu);
          const double y = stats::mean(e->values) * std::pow(p, c->beta_over_nu);
          collapse_table.push_back(
              {opname, std::to_string(p), format_number(e->f), format_number(x), format_number(y)});
          series.x.push_back(x);
          series.y.push_back(y);
        }
        collapse_chart.series.push_back(series);
      }
      report.tables.emplace_back("fig_collapse_" + opname, collapse_table);
      report.charts.push_back(collapse_chart);
    }
  }
  s["collapse"] = collapse;

  const std::string v_cross = verdict_crossing(crossing, drift);
  const std::string v_smooth = verdict_crossover(aic);
  const std::string v_order = verdict_order(extrap, bimodal);
  json lines = json::array();
  if (crossing.value("available", false)) {
    lines.push_back("common crossing: f_c = " + format_number(crossing["f_c"].get<double>()) + ", spread " +
                    format_number(crossing["spread"].get<double>()) + " (" + v_cross + ")");
  } else {
    lines.push_back("common crossing: unavailable");
  }
  if (drift.value("available", false)) {
    lines.push_back(std::string("crossing drift: ") +
                    (drift["significant"].get<bool>() ? "significant" : "not significant"));
  }
  if (aic.value("available", false)) {
    lines.push_back("delta AIC = " + format_number(aic["delta_aic"].get<double>()) + ": " + v_smooth);
  }
  if (v_smooth == "smooth crossover favored") lines.push_back("smooth crossover favored");
  if (extrap.value("available", false)) {
    lines.push_back("U4 min extrapolation: " + format_number(extrap["intercept"].get<double>()) + " +/- " +
                    format_number(extrap["intercept_se"].get<double>()) + " (" + v_order + ")");
  }
  if (bimodal.value("available", false)) {
    lines.push_back(std::string("bimodality: ") + (bimodal["any_bimodal"].get<bool>() ? "present" : "absent"));
  }
  s["interpretation"] = {{"crossing", v_cross}, {"smooth_crossover", v_smooth}, {"order", v_order}, {"lines", lines}};
  s["warnings"] = warnings;
  return result;
}

}  // namespace

DiagnosticsReport analyze(const AnalysisInput& input, const AnalyzeOptions& options) {
  if (options.k < 1) throw ConfigError("head size k must be positive");
  DiagnosticsReport report;
  std::map<Operation, std::vector<const fss::SeedEnsemble*>> by_op;
  for (const auto& e : input.ensembles) by_op[e.op].push_back(&e);

  json ops = json::object();
  bool partial = by_op.empty();
  for (const auto& [op, list] : by_op) {
    OpResult r = analyze_operation(op, list, options, report);
    partial |= r.partial;
    ops[std::string(to_string(op))] = std::move(r.section);
  }
  report.partial = partial;
  report.json = {{"format", "grokscale-report"},
                 {"status", partial ? "partial" : "complete"},
                 {"analysis",
                  {{"k", options.k},
                   {"seed", options.seed},
                   {"resamples", options.resamples},
                   {"tail_window", options.tail_window}}},
                 {"input",
                  {{"source", input.source},
                   {"ensembles", input.ensembles.size()},
                   {"failed_runs", input.failed_runs},
                   {"missing_runs", input.missing_runs}}},
                 {"operations", ops},
                 {"reference", reference::all_to_json()}};
  return report;
}

void write_figure_data(const DiagnosticsReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& [stem, rows] : report.tables) write_csv(dir / (stem + ".csv"), rows);
  for (const auto& chart : report.charts) write_file_atomic(dir / (chart.stem + ".svg"), figures::render_svg(chart));
}

}  // namespace grokscale::lab
