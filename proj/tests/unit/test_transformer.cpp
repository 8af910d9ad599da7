#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "grokscale/errors.hpp"
#include "grokscale/gradcheck.hpp"
#include "grokscale/random.hpp"
#include "grokscale/transformer.hpp"

using namespace grokscale;

namespace {

ModelConfig small(int p, int d = 32) {
  ModelConfig c;
  c.d_model = d;
  c.n_layers = 2;
  c.n_heads = 4;
  c.d_ff = 4 * d;
  c.vocab = p;
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig c;
  CHECK(c.head_dim() == 32);
  c.d_model = 30;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.seq_len = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("init is deterministic in the seed") {
  ModelConfig c = small(11);
  c.init_seed = 4;
  CHECK(parameter_checksum(init_model<float>(c)) == parameter_checksum(init_model<float>(c)));
  ModelConfig d = c;
  d.init_seed = 5;
  CHECK(parameter_checksum(init_model<float>(c)) != parameter_checksum(init_model<float>(d)));
}

TEST_CASE("init layout: unit gains, zero biases") {
  const ModelConfig c = small(7);
  const auto params = init_model<double>(c);
  const ParameterLayout layout(c);
  for (const auto& b : layout.blocks()) {
    const auto v = params.view(b);
    const bool vector_block = b.name.find("gain") != std::string::npos || b.name.find("bias") != std::string::npos ||
                              b.name.find(".b_") != std::string::npos || b.name.find(".b1") != std::string::npos ||
                              b.name.find(".b2") != std::string::npos;
    CHECK(b.decay == !vector_block);
    if (b.name.find("gain") != std::string::npos) {
      for (double x : v) CHECK(x == 1.0);
    } else if (vector_block) {
      for (double x : v) CHECK(x == 0.0);
    }
  }
}

TEST_CASE("forward shapes and purity") {
  const ModelConfig c = small(13);
  const auto params = init_model<float>(c);
  const auto pairs = enumerate_pairs(13, Operation::add);
  std::vector<LabeledPair> batch(pairs.begin(), pairs.begin() + 9);
  batch.push_back(batch[3]);
  const auto out = forward(params, batch);
  CHECK(out.logits.rows == 10);
  CHECK(out.logits.cols == 13);
  CHECK(out.penultimate.rows == 10);
  CHECK(out.penultimate.cols == 32);
  for (std::size_t j = 0; j < 13; ++j) CHECK(out.logits(3, j) == out.logits(9, j));
  const auto again = forward(params, batch);
  CHECK(again.logits.data == out.logits.data);
}

TEST_CASE("zero decoder gives uniform softmax") {
  const ModelConfig c = small(11);
  auto params = init_model<double>(c);
  const ParameterLayout layout(c);
  for (auto& w : params.view(layout.block("decoder.weight"))) w = 0.0;
  const auto pairs = enumerate_pairs(11, Operation::mul);
  const auto out = forward(params, std::span<const LabeledPair>(pairs));
  for (double z : out.logits.data) CHECK(z == 0.0);
  CHECK(cross_entropy<double>(out.logits.data, 11, pairs) == doctest::Approx(std::log(11.0)).epsilon(1e-14));
}

TEST_CASE("initial loss is near log p") {
  for (int p : {13, 53}) {
    ModelConfig c = small(p);
    c.init_seed = 3;
    const auto pairs = enumerate_pairs(p, Operation::add);
    const double loss = loss_and_grads(init_model<float>(c), std::span<const LabeledPair>(pairs)).loss;
    CHECK(std::abs(loss - std::log(double(p))) < 0.5);
  }
}

TEST_CASE("duplicated batch leaves the mean loss and gradients unchanged") {
  const ModelConfig c = small(7, 16);
  const auto params = init_model<double>(c);
  const auto pairs = enumerate_pairs(7, Operation::add);
  std::vector<LabeledPair> once(pairs.begin(), pairs.begin() + 12), twice = once;
  twice.insert(twice.end(), once.begin(), once.end());
  const auto a = loss_and_grads(params, once);
  const auto b = loss_and_grads(params, twice);
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-13));
  double worst = 0.0;
  for (std::size_t i = 0; i < a.grads.values.size(); ++i) {
    worst = std::max(worst, std::abs(a.grads.values[i] - b.grads.values[i]));
  }
  CHECK(worst < 1e-13);
}

TEST_CASE("planted decoder saturates the logits") {
  const int p = 5;
  ModelConfig c = small(p);
  c.init_seed = 8;
  auto params = init_model<double>(c);
  const ParameterLayout layout(c);
  const auto pairs = enumerate_pairs(p, Operation::add);
  const auto out = forward(params, std::span<const LabeledPair>(pairs));

  const auto n = static_cast<Eigen::Index>(pairs.size()), d = static_cast<Eigen::Index>(c.d_model);
  Eigen::MatrixXd h(n, d + 1), target = Eigen::MatrixXd::Zero(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) h(i, j) = out.penultimate(i, j);
    h(i, d) = 1.0;
    target(i, pairs[i].label) = 30.0;
  }
  const Eigen::MatrixXd w = h.completeOrthogonalDecomposition().solve(target);
  auto dec = params.view(layout.block("decoder.weight"));
  auto bias = params.view(layout.block("decoder.bias"));
  for (Eigen::Index j = 0; j < d; ++j) {
    for (int k = 0; k < p; ++k) dec[j * p + k] = w(j, k);
  }
  for (int k = 0; k < p; ++k) bias[k] = w(d, k);
  CHECK(loss_and_grads(params, std::span<const LabeledPair>(pairs)).loss < 1e-3);
}

TEST_CASE("float and double forward agree") {
  const ModelConfig c = small(17);
  const auto pf = init_model<float>(c);
  const auto pd = convert_parameters<double>(pf);
  const auto pairs = enumerate_pairs(17, Operation::sub);
  const auto of = forward(pf, std::span<const LabeledPair>(pairs));
  const auto od = forward(pd, std::span<const LabeledPair>(pairs));
  double worst = 0.0;
  for (std::size_t i = 0; i < of.logits.data.size(); ++i) {
    worst = std::max(worst, std::abs(double(of.logits.data[i]) - od.logits.data[i]));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("gradients match central finite differences in every block") {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    GradCheckOptions options;
    options.seed = seed;
    const auto r = gradient_check(options);
    CHECK(r.blocks.size() == 16);
    for (const auto& b : r.blocks) {
      INFO(b.name << " rel " << b.rel_error);
      CHECK(b.rel_error < 1e-3);
    }
  }
}

TEST_CASE("random entries of a two-layer model match finite differences") {
  ModelConfig c = small(7, 16);
  auto params = init_model<double>(c);
  Xoshiro256 rng(21);
  for (auto& v : params.values) v = 0.3 * rng.normal();
  const auto pairs = enumerate_pairs(7, Operation::mul);
  std::vector<LabeledPair> batch(pairs.begin(), pairs.begin() + 20);
  const auto analytic = loss_and_grads(params, batch);
  const ParameterLayout layout(c);
  for (const auto& b : layout.blocks()) {
    for (int trial = 0; trial < 3; ++trial) {
      const std::size_t i = b.offset + rng.below(b.size());
      const double saved = params.values[i];
      params.values[i] = saved + 1e-5;
      const double up = loss_and_grads(params, batch).loss;
      params.values[i] = saved - 1e-5;
      const double down = loss_and_grads(params, batch).loss;
      params.values[i] = saved;
      const double fd = (up - down) / 2e-5, an = analytic.grads.values[i];
      INFO(b.name << " entry " << i);
      CHECK(std::abs(fd - an) <= 1e-3 * std::max(std::abs(fd) + std::abs(an), 1e-6));
    }
  }
}
