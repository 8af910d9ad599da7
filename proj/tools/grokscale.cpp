#include <csignal>
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "grokscale/errors.hpp"
#include "grokscale/gradcheck.hpp"
#include "grokscale/lab.hpp"
#include "grokscale/oracle.hpp"

namespace {

using namespace grokscale;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitValidation = 2;
constexpr int kExitPartial = 3;

volatile std::sig_atomic_t g_interrupted = 0;

void on_signal(int) { g_interrupted = 1; }

json load_json(const std::string& path) {
  const std::string text = lab::read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

struct Globals {
  std::uint64_t seed = 0;
  bool seed_set = false;
  int parallel = 0;
  int k = 5;
};

lab::SweepOptions interruptible() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  lab::SweepOptions options;
  options.should_stop = [] { return g_interrupted != 0; };
  options.on_finished = [](const lab::RunEntry& e) {
    std::printf("%-40s %s\n", e.key.id().c_str(), std::string(lab::to_string(e.status)).c_str());
    std::fflush(stdout);
  };
  return options;
}

lab::SweepConfig load_sweep(const std::string& path, const Globals& g) {
  lab::SweepConfig config = lab::sweep_config_from_json(load_json(path));
  if (g.parallel > 0) config.parallel = g.parallel;
  return config;
}

int cmd_sweep(const std::string& path, const Globals& g) {
  const lab::SweepConfig config = load_sweep(path, g);
  const lab::SweepSummary s = lab::run_sweep(config, interruptible());
  std::printf("runs %zu  executed %zu  skipped %zu  failed %zu%s\n", s.total, s.executed, s.skipped, s.failed,
              s.interrupted ? "  (interrupted)" : "");
  std::printf("manifest %s\n", (lab::resolve_output(config.output_dir) / "manifest.json").string().c_str());
  return s.interrupted ? kExitFailure : kExitOk;
}

int cmd_phase_map(const std::string& path, const Globals& g) {
  const lab::SweepConfig config = load_sweep(path, g);
  const lab::PhaseMapResult r = lab::run_phase_map(config, interruptible());
  for (const auto& [key, cell] : r.map) {
    std::printf("f=%-8s wd=%-8s %-24s grok_fraction=%s\n", lab::format_number(key.first).c_str(),
                lab::format_number(key.second).c_str(), std::string(fss::to_string(cell.majority)).c_str(),
                lab::format_number(cell.grok_fraction).c_str());
  }
  std::printf("phase map %s\n", (lab::resolve_output(config.output_dir) / "phase_map.json").string().c_str());
  return g_interrupted ? kExitFailure : kExitOk;
}

int cmd_analyze(const std::string& input, const std::string& report_path, const std::string& figdata,
                const Globals& g) {
  lab::AnalyzeOptions options;
  options.k = g.k;
  options.seed = g.seed;
  const lab::AnalysisInput data = lab::load_analysis_input(lab::resolve_output(input), options);
  const lab::DiagnosticsReport report = lab::analyze(data, options);
  const std::string text = report.json.dump(2) + "\n";
  if (report_path.empty()) {
    std::cout << text;
  } else {
    lab::write_file_atomic(lab::resolve_output(report_path), text);
  }
  if (!figdata.empty()) lab::write_figure_data(report, lab::resolve_output(figdata));
  for (const auto& [op, section] : report.json.at("operations").items()) {
    for (const auto& line : section.at("interpretation").at("lines")) {
      std::cerr << op << ": " << line.get<std::string>() << "\n";
    }
  }
  if (report.partial) {
    std::cerr << "partial analysis: some sections are unavailable\n";
    return kExitPartial;
  }
  return kExitOk;
}

int cmd_oracle(const std::string& path, const Globals& g) {
  json spec = load_json(path);
  if (!spec.is_object()) throw ConfigError("plant file must be a JSON object");
  if (g.seed_set) spec["seed"] = g.seed;
  std::vector<int> p_list;
  std::vector<double> f_grid;
  int n_s = 0;
  Operation op = Operation::add;
  std::string output;
  try {
    p_list = spec.value("p_list", std::vector<int>{53, 89, 149, 251});
    if (spec.contains("f_grid") && spec["f_grid"].is_object()) {
      const auto& fg = spec["f_grid"];
      f_grid = oracle::linear_grid(fg.at("start").get<double>(), fg.at("stop").get<double>(),
                                   fg.at("step").get<double>());
    } else {
      f_grid = spec.value("f_grid", oracle::linear_grid(0.30, 0.50, 0.02));
    }
    n_s = spec.value("n_s", 50);
    op = parse_operation(spec.value("op", std::string("add")));
    output = spec.value("output", std::string("oracle/ensembles.json"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("plant file: ") + e.what());
  }
  if (p_list.empty() || f_grid.empty() || n_s < 2) throw ConfigError("plant needs p_list, f_grid and n_s >= 2");

  const std::string kind = spec.value("kind", std::string("critical"));
  std::vector<fss::SeedEnsemble> ensembles;
  json source;
  if (kind == "critical") {
    const auto plant = oracle::critical_from_json(spec);
    ensembles = oracle::gen_critical(plant, p_list, f_grid, n_s, op);
    source = oracle::to_json(plant);
  } else if (kind == "crossover") {
    const auto plant = oracle::crossover_from_json(spec);
    ensembles = oracle::gen_crossover(plant, p_list, f_grid, n_s, op);
    source = oracle::to_json(plant);
  } else {
    throw ConfigError("plant kind must be 'critical' or 'crossover'");
  }
  source["p_list"] = p_list;
  source["f_grid"] = f_grid;
  source["n_s"] = n_s;
  source["op"] = std::string(to_string(op));
  const auto out = lab::resolve_output(output);
  lab::write_file_atomic(out, oracle::ensembles_to_json(ensembles, source).dump(1) + "\n");
  std::printf("%zu ensembles -> %s\n", ensembles.size(), out.string().c_str());
  return kExitOk;
}

int cmd_gradcheck(const Globals& g) {
  GradCheckOptions options;
  options.seed = g.seed;
  const GradCheckResult r = gradient_check(options);
  for (const auto& b : r.blocks) {
    std::printf("%-24s %6zu  rel %.3e  max_abs %.3e  %s\n", b.name.c_str(), b.entries, b.rel_error, b.max_abs_error,
                b.ok ? "ok" : "FAIL");
  }
  std::printf("worst relative error %.3e (tolerance %.0e)\n", r.worst, options.tolerance);
  return r.ok ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-size-scaling lab for grokking on modular arithmetic"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Analysis / oracle seed")->capture_default_str();
  app.add_option("--parallel", g.parallel, "Concurrent training runs (overrides the config)")
      ->check(CLI::PositiveNumber);
  app.add_option("--k", g.k, "Head size for the head-tail contrast")->check(CLI::IsMember({3, 5, 10}))
      ->capture_default_str();

  std::string config_path, input_dir, report_path, figdata_dir, plant_path;
  auto* sweep = app.add_subcommand("sweep", "Train every run of a sweep config (resumable)");
  sweep->add_option("-c,--config", config_path, "Sweep config (JSON)")->required();
  auto* analyze = app.add_subcommand("analyze", "Finite-size-scaling diagnostics");
  analyze->add_option("-i,--input", input_dir, "Sweep directory or ensemble file")->required();
  analyze->add_option("--report", report_path, "Report JSON path (stdout if omitted)");
  analyze->add_option("--figdata", figdata_dir, "Directory for figure CSV/SVG files");
  auto* phase = app.add_subcommand("phase-map", "Phase map over training fraction and weight decay");
  phase->add_option("-c,--config", config_path, "Phase-map config (JSON)")->required();
  auto* orc = app.add_subcommand("oracle", "Write synthetic oracle ensembles");
  orc->add_option("-c,--config", plant_path, "Plant spec (JSON)")->required();
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (*sweep) return cmd_sweep(config_path, g);
    if (*analyze) return cmd_analyze(input_dir, report_path, figdata_dir, g);
    if (*phase) return cmd_phase_map(config_path, g);
    if (*orc) return cmd_oracle(plant_path, g);
    if (*grad) return cmd_gradcheck(g);
  } catch (const ConfigError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
