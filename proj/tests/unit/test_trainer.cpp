#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "grokscale/kernels.hpp"
#include "grokscale/trainer.hpp"

using namespace grokscale;

namespace {

ModelConfig small_model(int d = 32) {
  ModelConfig m;
  m.d_model = d;
  m.n_heads = 4;
  m.d_ff = 4 * d;
  return m;
}

OptimConfig short_run(int steps) {
  OptimConfig o;
  o.max_steps = steps;
  o.log_every = 25;
  o.batch_size = 128;
  return o;
}

std::string serialize(const RunHistory& h) {
  std::ostringstream out;
  write_history(out, h);
  return out.str();
}

}  // namespace

TEST_CASE("checkpoint cadence") {
  TrainOptions opt;
  opt.early_stop = false;
  const auto h = train_run({13, Operation::add, 0.5, 1}, small_model(), short_run(100), 1, opt);
  REQUIRE(h.records.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(h.records[i].step == 25 * (i + 1));
  CHECK(h.termination == Termination::completed);
  CHECK(h.stop_step == 100);
  CHECK(h.model.vocab == 13);
  CHECK(h.model.init_seed == 1);
  for (const auto& r : h.records) {
    CHECK(r.spectral.eig_mass.size() == 32);
    CHECK(std::isfinite(r.spectral.htc));
  }
}

TEST_CASE("untrained accuracy is at chance") {
  const int p = 53;
  const TaskSpec task{p, Operation::add, 0.5, 2};
  const auto split = partition(task);
  ModelConfig m = small_model(128);
  m.vocab = p;
  m.init_seed = 2;
  const auto params = init_model<float>(m);
  TransformerWorkspace<float> ws(m);
  const auto metrics = evaluate_split(ws, params, split.eval, 4096);
  const double n = static_cast<double>(split.eval.size());
  const double sigma = std::sqrt((1.0 / p) * (1.0 - 1.0 / p) / n);
  CHECK(std::abs(metrics.accuracy - 1.0 / p) <= 3.0 * sigma);
  CHECK(std::abs(metrics.loss - std::log(double(p))) < 0.5);
}

TEST_CASE("runs are reproducible and thread-count independent") {
  const TaskSpec task{17, Operation::mul, 0.6, 3};
  TrainOptions opt;
  opt.early_stop = false;
  const int saved = kernels::kernel_threads();
  kernels::set_kernel_threads(1);
  const auto a = serialize(train_run(task, small_model(), short_run(75), 3, opt));
  const auto b = serialize(train_run(task, small_model(), short_run(75), 3, opt));
  kernels::set_kernel_threads(3);
  const auto c = serialize(train_run(task, small_model(), short_run(75), 3, opt));
  kernels::set_kernel_threads(saved);
  CHECK(a == b);
  CHECK(a == c);
  CHECK(a != serialize(train_run(task, small_model(), short_run(75), 4, opt)));
}

TEST_CASE("smoothed training loss decreases on an easy task") {
  TrainOptions opt;
  opt.early_stop = false;
  OptimConfig o = short_run(500);
  o.batch_size = 512;
  const auto h = train_run({13, Operation::add, 0.8, 0}, small_model(64), o, 0, opt);
  REQUIRE(h.records.size() == 20);
  std::vector<double> smooth;
  for (std::size_t i = 0; i + 10 <= h.records.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = i; j < i + 10; ++j) s += h.records[j].train_loss;
    smooth.push_back(s / 10.0);
  }
  for (std::size_t i = 1; i < smooth.size(); ++i) CHECK(smooth[i] <= smooth[i - 1]);
  CHECK(h.records.back().train_loss < h.records.front().train_loss);
}

TEST_CASE("aborted and diverging runs are recorded as failed") {
  TrainOptions opt;
  opt.on_checkpoint = [](const CheckpointRecord& r) { return r.step < 50; };
  const auto h = train_run({11, Operation::add, 0.5, 0}, small_model(), short_run(200), 0, opt);
  CHECK(h.termination == Termination::failed);
  CHECK(h.error == "aborted");
  CHECK(h.records.size() == 2);

  OptimConfig wild = short_run(200);
  wild.learning_rate = 1e30;
  wild.weight_decay = 0.0;
  const auto d = train_run({11, Operation::add, 0.5, 0}, small_model(), wild, 0);
  CHECK(d.termination == Termination::failed);
  CHECK(!d.error.empty());
}
