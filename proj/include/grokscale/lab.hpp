#pragma once

// Sweep orchestration, persistence and the analysis pipeline behind the CLI.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "grokscale/adamw.hpp"
#include "grokscale/figures.hpp"
#include "grokscale/fss.hpp"
#include "grokscale/history.hpp"
#include "grokscale/task_data.hpp"
#include "grokscale/transformer.hpp"

namespace grokscale::lab {

namespace fs = std::filesystem;

inline constexpr const char* kOutputRootEnv = "GROKSCALE_OUTPUT_ROOT";

/// Relative paths resolve against $GROKSCALE_OUTPUT_ROOT when it is set.
fs::path resolve_output(const fs::path& path);

/// Write to `path.tmp` and rename over `path`.
void write_file_atomic(const fs::path& path, const std::string& content);
std::string read_file(const fs::path& path);
/// FNV-1a of the bytes, 16 hex digits.
std::string content_checksum(const std::string& bytes);

struct RunKey {
  Operation op = Operation::add;
  int p = 0;
  double f = 0.0;
  double weight_decay = 1.0;
  int seed = 0;

  std::string id() const;
  friend bool operator==(const RunKey&, const RunKey&) = default;
};

enum class RunStatus { pending, running, done, failed };
std::string_view to_string(RunStatus s);
RunStatus parse_run_status(std::string_view s);

struct RunEntry {
  RunKey key;
  RunStatus status = RunStatus::pending;
  std::string file;      // relative to the sweep directory
  std::string checksum;  // of the history file, once written
};

struct SweepConfig {
  std::vector<int> p_list;
  std::vector<double> f_grid;
  std::vector<double> weight_decays;  // empty: optim.weight_decay only
  Operation op = Operation::add;
  int seed_start = 0;
  int seed_count = 1;
  ModelConfig model;
  OptimConfig optim;
  fs::path output_dir = "sweep";
  int parallel = 1;

  /// Throws ConfigError on empty grids, non-prime sizes, bad seeds or model sizes.
  void validate() const;
  std::vector<RunKey> runs() const;
  std::vector<double> decay_grid() const;
};

SweepConfig sweep_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SweepConfig& c);

struct SweepManifest {
  nlohmann::json config;
  std::vector<RunEntry> runs;

  nlohmann::json to_json() const;
  static SweepManifest from_json(const nlohmann::json& j);
  RunEntry* find(const RunKey& key);
};

using RunFunction = std::function<RunHistory(const RunKey&, const SweepConfig&)>;

/// train_run with the sweep's model and optimizer settings; data_seed and train_seed both equal the run seed.
RunHistory default_run(const RunKey& key, const SweepConfig& config);

struct SweepOptions {
  RunFunction runner = default_run;
  /// Polled before each run starts; returning true stops scheduling new runs.
  std::function<bool()> should_stop;
  std::function<void(const RunEntry&)> on_finished;
};

struct SweepSummary {
  std::size_t total = 0;
  std::size_t executed = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
  bool interrupted = false;
};

/// Execute every pending run; runs already done with a matching checksum are
/// skipped. The manifest is rewritten atomically after every status change.
SweepSummary run_sweep(const SweepConfig& config, const SweepOptions& options = {});

struct PhaseMapResult {
  fss::PhaseMap map;
  nlohmann::json report;
};

/// Sweep over (f, weight decay) at one p, then label and summarize each cell.
PhaseMapResult run_phase_map(const SweepConfig& config, const SweepOptions& options = {});

struct AnalyzeOptions {
  int k = 5;
  std::uint64_t seed = 0;
  int resamples = 2000;
  int tail_window = 40;
  std::optional<fss::FWindow> window;  // default: central half of the f grid
};

struct AnalysisInput {
  std::vector<fss::SeedEnsemble> ensembles;
  nlohmann::json source;
  std::size_t failed_runs = 0;
  std::size_t missing_runs = 0;
};

/// Reads an ensemble file (ensembles.json) or a sweep directory (manifest.json
/// plus histories). Histories are reduced with tail_mean at head size k.
AnalysisInput load_analysis_input(const fs::path& dir, const AnalyzeOptions& options);

struct DiagnosticsReport {
  nlohmann::json json;
  bool partial = false;
  /// Figure-data tables keyed by file stem; each is a header row plus rows.
  std::vector<std::pair<std::string, std::vector<std::vector<std::string>>>> tables;
  std::vector<figures::Chart> charts;
};

DiagnosticsReport analyze(const AnalysisInput& input, const AnalyzeOptions& options);

/// <stem>.csv for every table and an SVG rendering per figure.
void write_figure_data(const DiagnosticsReport& report, const fs::path& dir);

std::string format_number(double v);

}  // namespace grokscale::lab
