#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "grokscale/errors.hpp"
#include "grokscale/lab.hpp"
#include "grokscale/oracle.hpp"
#include "grokscale/random.hpp"

using namespace grokscale;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("grokscale_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

lab::SweepConfig tiny_config(const fs::path& dir) {
  lab::SweepConfig c;
  c.p_list = {11, 13};
  c.f_grid = {0.5, 0.6};
  c.seed_count = 3;
  c.model.d_model = 16;
  c.model.n_layers = 1;
  c.model.n_heads = 2;
  c.model.d_ff = 32;
  c.optim.max_steps = 50;
  c.optim.batch_size = 32;
  c.output_dir = dir;
  return c;
}

// Synthetic history: memorize at `memorize`, perfect eval from `generalize`, constant HTC.
RunHistory fake_history(const lab::RunKey& key, std::int64_t memorize, std::int64_t generalize, double htc_value,
                        std::int64_t last = 4000) {
  RunHistory h;
  h.task = {key.p, key.op, key.f, static_cast<std::uint64_t>(key.seed)};
  h.train_seed = static_cast<std::uint64_t>(key.seed);
  h.optim.weight_decay = key.weight_decay;
  for (std::int64_t s = 25; s <= last; s += 25) {
    CheckpointRecord r;
    r.step = s;
    r.train_acc = s >= memorize ? 1.0 : 0.2;
    r.eval_acc = s >= generalize ? 1.0 : 0.1;
    r.spectral.step = s;
    r.spectral.eig_mass = {0.5, 0.2, 0.1, 0.05, 0.05, 0.04, 0.03, 0.03};
    r.spectral.htc = htc_value;
    h.records.push_back(r);
  }
  h.stop_step = last;
  return h;
}

struct CountingRunner {
  std::shared_ptr<std::atomic<int>> calls = std::make_shared<std::atomic<int>>(0);
  RunHistory operator()(const lab::RunKey& key, const lab::SweepConfig&) const {
    ++*calls;
    return fake_history(key, 500, 1000000, key.f + 0.01 * key.seed);
  }
};

std::size_t count_histories(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir / "runs")) n += e.path().extension() == ".jsonl";
  return n;
}

}  // namespace

TEST_CASE("run ids") {
  const lab::RunKey key{Operation::sub, 53, 0.5, 1.0, 7};
  CHECK(key.id() == "sub_p53_f0.5000_wd1.0000_s7");
}

TEST_CASE("sweep config parsing and validation") {
  const auto c = lab::sweep_config_from_json(json::parse(R"({
    "p_list": [53, 89], "f_grid": {"start": 0.3, "stop": 0.5, "step": 0.1},
    "op": "mul", "seeds": {"start": 0, "count": 4},
    "model": {"d_model": 64}, "optim": {"weight_decay": 0.5, "max_steps": 1000}, "output_dir": "x"})"));
  CHECK(c.p_list == std::vector<int>{53, 89});
  CHECK(c.f_grid == std::vector<double>{0.3, 0.4, 0.5});
  CHECK(c.op == Operation::mul);
  CHECK(c.seed_count == 4);
  CHECK(c.model.d_model == 64);
  CHECK(c.decay_grid() == std::vector<double>{0.5});
  CHECK(c.runs().size() == 2 * 3 * 4);

  CHECK_THROWS_AS(lab::sweep_config_from_json(json::parse(R"({"p_list": [51], "f_grid": [0.5]})")), ConfigError);
  CHECK_THROWS_AS(lab::sweep_config_from_json(json::parse(R"({"p_list": [53], "f_grid": [1.2]})")), ConfigError);
  CHECK_THROWS_AS(lab::sweep_config_from_json(json::parse(R"({"p_list": [53], "f_grid": [0.5], "seeds": {"start": 3, "count": 2}})")),
                  ConfigError);
  CHECK_THROWS_AS(lab::sweep_config_from_json(json::parse(R"({"p_list": [53], "f_grid": [0.5], "lr": 1})")),
                  ConfigError);
  CHECK_THROWS_AS(lab::sweep_config_from_json(json::parse(R"({"p_list": [53], "f_grid": [0.5], "model": {"d_model": 30}})")),
                  ConfigError);
  CHECK_THROWS_AS(lab::sweep_config_from_json(json::parse(R"({"p_list": [], "f_grid": [0.5]})")), ConfigError);
  CHECK_THROWS_AS(lab::sweep_config_from_json(json::parse(R"({"p_list": [53], "f_grid": [0.5], "op": "pow"})")),
                  ConfigError);
}

TEST_CASE("output root from the environment") {
  ::setenv(lab::kOutputRootEnv, "/tmp/root_here", 1);
  CHECK(lab::resolve_output("a/b") == fs::path("/tmp/root_here/a/b"));
  CHECK(lab::resolve_output("/abs") == fs::path("/abs"));
  ::unsetenv(lab::kOutputRootEnv);
  CHECK(lab::resolve_output("a/b") == fs::path("a/b"));
}

TEST_CASE("atomic writes and checksums") {
  const auto dir = scratch("atomic");
  lab::write_file_atomic(dir / "deep/file.txt", "hello");
  CHECK(lab::read_file(dir / "deep/file.txt") == "hello");
  CHECK_FALSE(fs::exists(dir / "deep/file.txt.tmp"));
  CHECK(lab::content_checksum("hello") == lab::content_checksum("hello"));
  CHECK(lab::content_checksum("hello") != lab::content_checksum("hellp"));
  CHECK(lab::content_checksum("").size() == 16);
}

TEST_CASE("sweep writes one history per run and is idempotent") {
  const auto dir = scratch("sweep");
  const auto config = tiny_config(dir);
  CountingRunner runner;
  lab::SweepOptions opt;
  opt.runner = runner;
  auto s = lab::run_sweep(config, opt);
  CHECK(s.total == 12);
  CHECK(s.executed == 12);
  CHECK(*runner.calls == 12);
  CHECK(count_histories(dir) == 12);
  CHECK(fs::exists(dir / "manifest.json"));
  const auto m = lab::SweepManifest::from_json(json::parse(lab::read_file(dir / "manifest.json")));
  CHECK(m.runs.size() == 12);
  for (const auto& r : m.runs) CHECK(r.status == lab::RunStatus::done);

  s = lab::run_sweep(config, opt);
  CHECK(s.executed == 0);
  CHECK(s.skipped == 12);
  CHECK(*runner.calls == 12);
}

TEST_CASE("interrupted sweep resumes with the remaining runs only") {
  const auto dir = scratch("resume");
  const auto config = tiny_config(dir);
  CountingRunner runner;
  lab::SweepOptions opt;
  opt.runner = runner;
  opt.should_stop = [&] { return *runner.calls >= 5; };
  auto s = lab::run_sweep(config, opt);
  CHECK(s.executed == 5);
  CHECK(s.interrupted);
  CHECK(count_histories(dir) == 5);

  opt.should_stop = nullptr;
  s = lab::run_sweep(config, opt);
  CHECK(s.executed == 7);
  CHECK(s.skipped == 5);
  CHECK_FALSE(s.interrupted);
  CHECK(*runner.calls == 12);
}

TEST_CASE("a run killed mid-flight is rerun") {
  const auto dir = scratch("killed");
  const auto config = tiny_config(dir);
  CountingRunner runner;
  lab::SweepOptions opt;
  opt.runner = runner;
  lab::run_sweep(config, opt);

  // Simulate a crash: one entry left "running" and one history corrupted on disk.
  auto m = lab::SweepManifest::from_json(json::parse(lab::read_file(dir / "manifest.json")));
  m.runs[2].status = lab::RunStatus::running;
  lab::write_file_atomic(dir / "manifest.json", m.to_json().dump());
  std::ofstream(dir / m.runs[7].file, std::ios::app) << "garbage\n";

  const auto s = lab::run_sweep(config, opt);
  CHECK(s.executed == 2);
  CHECK(*runner.calls == 14);
}

TEST_CASE("a changed config is refused") {
  const auto dir = scratch("changed");
  auto config = tiny_config(dir);
  lab::SweepOptions opt;
  opt.runner = CountingRunner{};
  lab::run_sweep(config, opt);
  config.optim.learning_rate = 1e-3;
  CHECK_THROWS_AS(lab::run_sweep(config, opt), ConfigError);
}

TEST_CASE("parallel sweep matches the serial one") {
  const auto serial_dir = scratch("serial"), parallel_dir = scratch("parallel");
  auto config = tiny_config(serial_dir);
  lab::run_sweep(config);
  config.output_dir = parallel_dir;
  config.parallel = 3;
  lab::run_sweep(config);
  for (const auto& e : fs::directory_iterator(serial_dir / "runs")) {
    CHECK(lab::read_file(e.path()) == lab::read_file(parallel_dir / "runs" / e.path().filename()));
  }
}

TEST_CASE("runner exceptions become failed runs") {
  const auto dir = scratch("failing");
  auto config = tiny_config(dir);
  config.seed_count = 1;
  lab::SweepOptions opt;
  opt.runner = [](const lab::RunKey& key, const lab::SweepConfig&) -> RunHistory {
    if (key.p == 13) throw NumericError("boom");
    return fake_history(key, 500, 10000000, 1.0);
  };
  const auto s = lab::run_sweep(config, opt);
  CHECK(s.failed == 2);
  lab::AnalyzeOptions aopt;
  const auto input = lab::load_analysis_input(dir, aopt);
  CHECK(input.failed_runs == 2);
  CHECK(input.ensembles.size() == 2);
}

TEST_CASE("phase map over a 2x2 grid") {
  const auto dir = scratch("phase");
  auto config = tiny_config(dir);
  config.p_list = {11};
  config.weight_decays = {0.0, 1.0};
  config.seed_count = 2;
  std::atomic<int> calls{0};
  lab::SweepOptions opt;
  opt.runner = [&](const lab::RunKey& key, const lab::SweepConfig&) {
    ++calls;
    if (key.weight_decay == 0.0) return fake_history(key, 500, 100000000, 1.0);
    return fake_history(key, 500, key.f == 0.5 ? 20000 : 1000, 1.0, 40000);
  };
  const auto r = lab::run_phase_map(config, opt);
  CHECK(calls == 8);
  CHECK(r.map.size() == 4);
  CHECK(r.map.at({0.5, 0.0}).majority == fss::PhaseLabel::memorization_only);
  CHECK(r.map.at({0.5, 0.0}).grok_fraction == 0.0);
  CHECK_FALSE(r.map.at({0.5, 0.0}).mean_grok_time);
  CHECK(r.map.at({0.5, 1.0}).majority == fss::PhaseLabel::grokking);
  CHECK(r.map.at({0.5, 1.0}).grok_fraction == 1.0);
  CHECK(r.map.at({0.6, 1.0}).majority == fss::PhaseLabel::instant_generalization);
  CHECK(fs::exists(dir / "phase_map.json"));
  CHECK(fs::exists(dir / "phase_map.csv"));
  CHECK(fs::exists(dir / "phase_map.svg"));
  CHECK(r.report["cells"].size() == 4);
  CHECK(r.report["cells"][0]["mean_grok_time"].is_null());

  config.weight_decays.clear();
  CHECK_THROWS_AS(lab::run_phase_map(config, opt), ConfigError);
}

TEST_CASE("analysis of a sweep reduces histories with the tail mean") {
  const auto dir = scratch("reduce");
  auto config = tiny_config(dir);
  lab::SweepOptions opt;
  opt.runner = CountingRunner{};
  lab::run_sweep(config, opt);
  lab::AnalyzeOptions aopt;
  const auto input = lab::load_analysis_input(dir, aopt);
  CHECK(input.ensembles.size() == 4);
  CHECK(input.failed_runs == 0);
  for (const auto& e : input.ensembles) {
    REQUIRE(e.values.size() == 3);
    for (int s = 0; s < 3; ++s) CHECK(e.values[s] == doctest::Approx(e.f + 0.01 * s));
  }
  aopt.k = 3;
  const auto k3 = lab::load_analysis_input(dir, aopt);
  CHECK(k3.ensembles[0].values[0] != input.ensembles[0].values[0]);
}

TEST_CASE("analysis of the critical oracle") {
  oracle::CriticalPlant plant;
  plant.seed = 2;
  const std::vector<int> sizes{53, 89, 149, 251};
  const auto f = oracle::linear_grid(0.30, 0.50, 0.02);
  lab::AnalysisInput input;
  input.ensembles = oracle::gen_critical(plant, sizes, f, 50);
  lab::AnalyzeOptions aopt;
  const auto report = lab::analyze(input, aopt);
  CHECK_FALSE(report.partial);
  CHECK(report.json["status"] == "complete");
  const auto& add = report.json["operations"]["add"];
  CHECK(std::abs(add["crossing"]["f_c"].get<double>() - 0.40) <= 0.015);
  CHECK(add["collapse"]["exploratory"] == true);
  CHECK(report.json["reference"]["coarse"]["delta_aic"] == 11.4);

  const auto again = lab::analyze(input, aopt);
  CHECK(report.json.dump() == again.json.dump());

  const auto dir = scratch("figs");
  lab::write_figure_data(report, dir);
  for (const char* stem : {"fig1_order_parameter_add", "fig2_binder_add", "fig2_crossings_add",
                           "fig3_susceptibility_add", "fig3_peaks_add", "fig3_fits_add", "fig4_u4min_add",
                           "fig4_kde_add"}) {
    CHECK(fs::exists(dir / (std::string(stem) + ".csv")));
  }
  CHECK(fs::exists(dir / "fig2_binder_add.svg"));

  // CSV numbers are the plotted numbers.
  std::istringstream csv(lab::read_file(dir / "fig2_binder_add.csv"));
  std::string line;
  std::getline(csv, line);
  std::vector<double> u4;
  while (std::getline(csv, line)) {
    std::vector<std::string> cells;
    std::stringstream row(line);
    for (std::string c; std::getline(row, c, ',');) cells.push_back(c);
    u4.push_back(std::stod(cells[3]));
  }
  std::vector<double> plotted;
  for (const auto& chart : report.charts) {
    if (chart.stem != "fig2_binder_add") continue;
    for (const auto& s : chart.series) plotted.insert(plotted.end(), s.y.begin(), s.y.end());
  }
  REQUIRE(u4.size() == plotted.size());
  for (std::size_t i = 0; i < u4.size(); ++i) CHECK(u4[i] == doctest::Approx(plotted[i]).epsilon(1e-9));
}

TEST_CASE("analysis of the crossover oracle favors a smooth crossover") {
  // Large ensembles keep the chi_max sampling noise near 2%.
  oracle::CrossoverPlant plant;
  plant.seed = 1;
  const std::vector<int> sizes{53, 89, 149, 251};
  lab::AnalysisInput input;
  input.ensembles = oracle::gen_crossover(plant, sizes, oracle::linear_grid(0.30, 0.50, 0.02), 5000);
  lab::AnalyzeOptions aopt;
  aopt.resamples = 200;
  const auto report = lab::analyze(input, aopt);
  const auto& add = report.json["operations"]["add"];
  CHECK(add["interpretation"]["smooth_crossover"] == "smooth crossover favored");
  bool line = false;
  for (const auto& l : add["interpretation"]["lines"]) line |= l == "smooth crossover favored";
  CHECK(line);
}

TEST_CASE("single-size input yields a partial report") {
  oracle::CriticalPlant plant;
  const std::vector<int> sizes{53};
  lab::AnalysisInput input;
  input.ensembles = oracle::gen_critical(plant, sizes, oracle::linear_grid(0.30, 0.50, 0.02), 20);
  const auto report = lab::analyze(input, lab::AnalyzeOptions{});
  CHECK(report.partial);
  CHECK(report.json["status"] == "partial");
  CHECK(report.json["operations"]["add"]["crossing"]["available"] == false);
  CHECK(report.json["operations"]["add"]["interpretation"]["crossing"] == "unavailable");
}

TEST_CASE("oracle ensemble files load for analysis") {
  const auto dir = scratch("oracle");
  oracle::CriticalPlant plant;
  const std::vector<int> sizes{53, 89, 149};
  const auto ens = oracle::gen_critical(plant, sizes, oracle::linear_grid(0.30, 0.50, 0.02), 10);
  const std::string text = oracle::ensembles_to_json(ens, oracle::to_json(plant)).dump(1);
  lab::write_file_atomic(dir / "ensembles.json", text);
  CHECK(text == oracle::ensembles_to_json(oracle::gen_critical(plant, sizes, oracle::linear_grid(0.30, 0.50, 0.02), 10),
                                          oracle::to_json(plant))
                    .dump(1));
  const auto input = lab::load_analysis_input(dir, lab::AnalyzeOptions{});
  CHECK(input.ensembles.size() == ens.size());
  CHECK(input.ensembles[3].values == ens[3].values);
  CHECK_THROWS_AS(lab::load_analysis_input(scratch("empty"), lab::AnalyzeOptions{}), InputError);
}
