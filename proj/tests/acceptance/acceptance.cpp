#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "grokscale/fss.hpp"
#include "grokscale/gradcheck.hpp"
#include "grokscale/lab.hpp"
#include "grokscale/observables.hpp"
#include "grokscale/oracle.hpp"
#include "grokscale/random.hpp"
#include "grokscale/trainer.hpp"

using namespace grokscale;

namespace {

const std::vector<int> kSizes{53, 89, 149, 251};
const std::vector<int> kCoarsePrimes{53, 59, 67, 79, 89, 97, 107, 113, 127, 149, 179, 211, 251};
constexpr int kTrials = 20;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

std::vector<double> f_grid() { return oracle::linear_grid(0.30, 0.50, 0.02); }

oracle::CriticalPlant critical_plant(std::uint64_t seed) {
  oracle::CriticalPlant plant;
  plant.f_c = 0.40;
  plant.beta_over_nu = 0.25;
  plant.one_over_nu = 1.0;
  plant.gamma_over_nu = 1.5;
  plant.noise_amp = 0.03;
  plant.seed = seed;
  return plant;
}

oracle::CrossoverPlant crossover_plant(std::uint64_t seed) {
  oracle::CrossoverPlant plant;
  plant.f_0 = 0.40;
  plant.width = 0.05;
  plant.chi_ceiling = 1.0;
  plant.rate = 0.01;
  plant.seed = seed;
  return plant;
}

lab::DiagnosticsReport analyze_ensembles(std::vector<fss::SeedEnsemble> ensembles, std::uint64_t seed) {
  lab::AnalysisInput input;
  input.ensembles = std::move(ensembles);
  lab::AnalyzeOptions options;
  options.seed = seed;
  return lab::analyze(input, options);
}

const nlohmann::json& add_section(const lab::DiagnosticsReport& r) { return r.json.at("operations").at("add"); }

std::optional<double> crossing_fc(const lab::DiagnosticsReport& r) {
  const auto& c = add_section(r).at("crossing");
  if (!c.value("available", false)) return std::nullopt;
  return c.at("f_c").get<double>();
}

std::optional<double> delta_aic(const lab::DiagnosticsReport& r) {
  const auto& s = add_section(r).at("susceptibility");
  if (!s.value("available", false)) return std::nullopt;
  return s.at("delta_aic").get<double>();
}

std::vector<std::string> g_criterion1_dumps;

Outcome criterion1() {
  const auto t0 = Clock::now();
  int hits = 0;
  std::string worst;
  g_criterion1_dumps.clear();
  for (int s = 0; s < kTrials; ++s) {
    const auto report =
        analyze_ensembles(oracle::gen_critical(critical_plant(static_cast<std::uint64_t>(s)), kSizes, f_grid(), 50),
                          static_cast<std::uint64_t>(s));
    g_criterion1_dumps.push_back(report.json.dump());
    const auto fc = crossing_fc(report);
    if (fc && std::abs(*fc - 0.40) <= 0.015) {
      ++hits;
    } else {
      worst += fmt(" seed%d:%s", s, fc ? fmt("%.4f", *fc).c_str() : "none");
    }
  }
  const double t = seconds_since(t0);
  return {hits >= 18 && t < 60.0,
          fmt("f_c within 0.015 of 0.40 in %d/%d seeds, %.1f s;", hits, kTrials, t) + (worst.empty() ? " all hit" : worst)};
}

Outcome criterion2() {
  const auto t0 = Clock::now();
  int crit_ok = 0, cross_ok = 0, paired = 0;
  double crit_sum = 0.0, cross_sum = 0.0;
  for (int s = 0; s < kTrials; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    const auto c = delta_aic(analyze_ensembles(oracle::gen_critical(critical_plant(seed), kSizes, f_grid(), 50), seed));
    const auto x =
        delta_aic(analyze_ensembles(oracle::gen_crossover(crossover_plant(seed), kSizes, f_grid(), 50), seed));
    const bool a = c && *c >= 4.0;
    const bool b = x && *x <= -4.0;
    crit_ok += a;
    cross_ok += b;
    paired += a && b;
    crit_sum += c.value_or(0.0);
    cross_sum += x.value_or(0.0);
  }
  const double t = seconds_since(t0);
  return {paired >= 18 && t < 60.0,
          fmt("both signs correct in %d/%d pairs (critical >= +4: %d, crossover <= -4: %d; mean dAIC %+.2f / %+.2f), "
              "%.1f s",
              paired, kTrials, crit_ok, cross_ok, crit_sum / kTrials, cross_sum / kTrials, t)};
}

std::vector<fss::CrossingEstimate> drift_fixture(double slope, double sigma, Xoshiro256& rng) {
  std::vector<fss::CrossingEstimate> out;
  for (std::size_t i = 0; i < kCoarsePrimes.size(); ++i) {
    for (std::size_t j = i + 1; j < kCoarsePrimes.size(); ++j) {
      fss::CrossingEstimate c;
      c.p_pair = {kCoarsePrimes[i], kCoarsePrimes[j]};
      c.f_star = 0.40 + slope * fss::pair_inverse_size(c) + sigma * rng.normal();
      out.push_back(c);
    }
  }
  return out;
}

Outcome criterion3() {
  constexpr int trials = 50;
  int false_pos = 0, detected = 0;
  for (int t = 0; t < trials; ++t) {
    Xoshiro256 rng(derive_seed(300, static_cast<std::uint64_t>(t)));
    const stats::BootstrapOptions boot{2000, derive_seed(301, static_cast<std::uint64_t>(t))};
    false_pos += drift_test(drift_fixture(0.0, 0.005, rng), boot).value().significant;
    detected += drift_test(drift_fixture(1.0, 0.005, rng), boot).value().significant;
  }
  constexpr int reference_trials = 1000;
  int reference_fp = 0;
  for (int t = 0; t < reference_trials; ++t) {
    Xoshiro256 rng(derive_seed(302, static_cast<std::uint64_t>(t)));
    reference_fp += drift_test(drift_fixture(0.0, 0.005, rng), {2000, derive_seed(303, static_cast<std::uint64_t>(t))})
                        .value()
                        .significant;
  }
  return {false_pos * 10 <= trials && detected * 10 >= 9 * trials,
          fmt("slope 0 significant in %d/%d, slope 1 detected in %d/%d (slope 0 rate over %d extra trials: %.1f%%)",
              false_pos, trials, detected, trials, reference_trials, 100.0 * reference_fp / reference_trials)};
}

Outcome criterion4() {
  std::vector<std::pair<int, double>> exact;
  for (int p : kCoarsePrimes) exact.emplace_back(p, 0.1 + 3.0 / p);
  const auto e = fss::binder_min_extrapolate(exact).value();
  const double exact_err = std::abs(e.intercept - 0.1);

  constexpr int trials = 100;
  int bracketed = 0;
  for (int t = 0; t < trials; ++t) {
    Xoshiro256 rng(derive_seed(400, static_cast<std::uint64_t>(t)));
    std::vector<std::pair<int, double>> noisy;
    for (int p : kCoarsePrimes) noisy.emplace_back(p, 0.1 + 3.0 / p + 0.02 * rng.normal());
    const auto x = fss::binder_min_extrapolate(noisy, {2000, derive_seed(401, static_cast<std::uint64_t>(t))}).value();
    bracketed += std::abs(x.intercept - 0.1) <= 2.0 * x.intercept_se;
  }
  return {exact_err <= 1e-9 && bracketed * 10 >= 9 * trials,
          fmt("exact-line intercept error %.2e, noisy intercept within 2 SE in %d/%d", exact_err, bracketed, trials)};
}

Outcome criterion5() {
  constexpr int trials = 100;
  int detected = 0, false_pos = 0;
  for (int t = 0; t < trials; ++t) {
    detected += fss::bimodality(oracle::bimodal_fixture(50, 12.0, derive_seed(500, static_cast<std::uint64_t>(t)))).bimodal;
    Xoshiro256 rng(derive_seed(501, static_cast<std::uint64_t>(t)));
    std::vector<double> z(50);
    for (auto& v : z) v = rng.normal();
    false_pos += fss::bimodality(z).bimodal;
  }
  return {detected * 100 >= 95 * trials && false_pos * 100 <= 5 * trials,
          fmt("two-component detected %d/%d, unimodal false positives %d/%d", detected, trials, false_pos, trials)};
}

Outcome criterion6() {
  const auto t0 = Clock::now();
  const auto r = gradient_check(GradCheckOptions{});
  const double t = seconds_since(t0);
  std::string failing;
  for (const auto& b : r.blocks) {
    if (!b.ok) failing += " " + b.name;
  }
  return {r.ok && t < 30.0, fmt("%zu blocks, worst relative error %.2e, %.1f s", r.blocks.size(), r.worst, t) + failing};
}

Outcome criterion7() {
  int checked = 0, failed = 0;
  std::string which;
  auto near = [&](const char* name, double got, double want) {
    ++checked;
    if (!(std::abs(got - want) <= 1e-12)) {
      ++failed;
      which += fmt(" %s(%.15g vs %.15g)", name, got, want);
    }
  };

  std::vector<double> split(128, 0.0);
  split[0] = 0.9;
  split[5] = 0.1;
  near("htc_ln9", htc(split, 5), std::log((0.9 + 1e-10) / (0.1 + 1e-10)));
  near("htc_uniform", htc(std::vector<double>(128, 1.0 / 128.0), 5), std::log((5.0 / 128.0 + 1e-10) / (123.0 / 128.0 + 1e-10)));
  std::vector<double> spike(128, 0.0);
  spike[0] = 1.0;
  near("htc_floor", htc(spike, 5), std::log((1.0 + 1e-10) / 1e-10));

  near("u4_constant", fss::binder_ratio(std::vector<double>(10, 0.7)), 2.0 / 3.0);
  near("u4_01", fss::binder_ratio(std::vector<double>{0.0, 1.0}), 1.0 / 3.0);

  near("chi_constant", fss::susceptibility(std::vector<double>(8, 0.3)), 0.0);
  near("chi_01", fss::susceptibility(std::vector<double>{0.0, 1.0}), 1.0);
  const std::vector<double> v{0.1, 0.4, 0.35, 0.9};
  std::vector<double> v3(v);
  for (auto& x : v3) x *= 3.0;
  near("chi_scaling", fss::susceptibility(v3), 9.0 * fss::susceptibility(v));

  fss::BinderCurve a{53, {{0.3, 0.6, 0.0}, {0.5, 0.4, 0.0}}};
  fss::BinderCurve b{89, {{0.3, 0.4, 0.0}, {0.5, 0.6, 0.0}}};
  const auto x = fss::pairwise_crossings(a, b);
  ++checked;
  if (x.size() != 1) {
    ++failed;
    which += " crossing_count";
  } else {
    near("crossing_0.4", x[0].f_star, 0.4);
  }

  near("daic_equal", fss::aic(0.37, 6, 2) - fss::aic(0.37, 6, 2), 0.0);
  near("daic_e", fss::aic(std::exp(1.0) * 0.37, 6, 2) - fss::aic(0.37, 6, 2), 6.0);

  return {failed == 0, fmt("%d identities checked, %d off by more than 1e-12", checked, failed) + which};
}

Outcome criterion8() {
  const auto t0 = Clock::now();
  int delayed = 0;
  std::string per_seed;
  for (int s = 0; s < 3; ++s) {
    const TaskSpec task{53, Operation::add, 0.5, static_cast<std::uint64_t>(s)};
    ModelConfig model;
    model.d_model = 128;
    OptimConfig optim;
    optim.weight_decay = 1.0;
    optim.max_steps = 40000;
    const RunHistory h = train_run(task, model, optim, static_cast<std::uint64_t>(s));
    const GrokVerdict v = detect_grok(h);
    const bool ok = v.grokked && v.memorize_step && *v.grok_step - *v.memorize_step >= 1000;
    delayed += ok;
    per_seed += fmt(" seed%d: memorize %lld grok %lld stop %lld;", s, static_cast<long long>(v.memorize_step.value_or(-1)),
                    static_cast<long long>(v.grok_step.value_or(-1)), static_cast<long long>(h.stop_step));
  }
  return {delayed >= 2, fmt("delayed generalization (gap >= 1000) in %d/3 seeds, %.0f s;", delayed, seconds_since(t0)) +
                            per_seed};
}

std::vector<fss::SeedEnsemble> rescore(std::vector<fss::SeedEnsemble> ensembles, int k) {
  for (auto& e : ensembles) {
    for (auto& v : e.values) v = htc(oracle::synthetic_spectrum(v), k);
  }
  return ensembles;
}

Outcome criterion9() {
  int agree = 0;
  double worst = 0.0, worst10 = 0.0;
  for (int s = 0; s < kTrials; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    const auto base = oracle::gen_critical(critical_plant(seed), kSizes, f_grid(), 50);
    const auto f3 = crossing_fc(analyze_ensembles(rescore(base, 3), seed));
    const auto f5 = crossing_fc(analyze_ensembles(rescore(base, 5), seed));
    const auto f10 = crossing_fc(analyze_ensembles(rescore(base, 10), seed));
    if (f3 && f5) {
      const double d = std::abs(*f3 - *f5);
      worst = std::max(worst, d);
      agree += d <= 0.02;
      if (f10) worst10 = std::max(worst10, std::abs(*f10 - *f5));
    } else {
      worst = INFINITY;
    }
  }
  return {agree == kTrials, fmt("k=3 vs k=5 f_c within 0.02 in %d/%d seeds (max |diff| %.4f; k=10 vs k=5 max %.4f)",
                                agree, kTrials, worst, worst10)};
}

Outcome criterion10() {
  if (g_criterion1_dumps.size() != static_cast<std::size_t>(kTrials)) criterion1();
  const auto first = g_criterion1_dumps;
  g_criterion1_dumps.clear();
  criterion1();
  int identical = 0;
  for (int s = 0; s < kTrials; ++s) identical += first[static_cast<std::size_t>(s)] == g_criterion1_dumps[static_cast<std::size_t>(s)];
  return {identical == kTrials, fmt("%d/%d repeated reports byte-identical", identical, kTrials)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"oracle f_c recovery", criterion1},       {"dAIC sign discrimination", criterion2},
      {"drift test calibration", criterion3},    {"Binder-min extrapolation", criterion4},
      {"bimodality detector", criterion5},       {"gradient correctness", criterion6},
      {"unit identities", criterion7},           {"micro-grokking smoke test", criterion8},
      {"k-robustness", criterion9},              {"determinism", criterion10},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %2d %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
