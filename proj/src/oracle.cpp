#include "grokscale/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "grokscale/errors.hpp"
#include "grokscale/random.hpp"

namespace grokscale::oracle {

using nlohmann::json;

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw ConfigError(std::string(name) + " must be finite");
}

std::uint64_t cell_seed(std::uint64_t seed, int p, std::size_t f_index) {
  return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(p)), f_index);
}

std::vector<fss::SeedEnsemble> generate(std::span<const int> p_list, std::span<const double> f_grid, int n_s,
                                        Operation op, std::uint64_t seed,
                                        const std::function<double(int, double)>& mean,
                                        const std::function<double(int, double)>& variance) {
  if (p_list.empty() || f_grid.empty()) throw ConfigError("oracle grids must be nonempty");
  if (n_s < 1) throw ConfigError("oracle n_s must be positive");
  std::vector<fss::SeedEnsemble> out;
  out.reserve(p_list.size() * f_grid.size());
  for (int p : p_list) {
    if (p < 2) throw ConfigError("oracle sizes must be at least 2");
    for (std::size_t fi = 0; fi < f_grid.size(); ++fi) {
      const double f = f_grid[fi];
      const double m = mean(p, f);
      const double sd = std::sqrt(variance(p, f));
      Xoshiro256 rng(cell_seed(seed, p, fi));
      fss::SeedEnsemble e{p, f, op, std::vector<double>(static_cast<std::size_t>(n_s))};
      for (auto& v : e.values) {
        const double z = rng.normal();
        v = sd > 0.0 ? m + sd * z : m;
      }
      out.push_back(std::move(e));
    }
  }
  return out;
}

}  // namespace

void CriticalPlant::validate() const {
  require_finite(f_c, "f_c");
  require_finite(beta_over_nu, "beta_over_nu");
  require_finite(one_over_nu, "one_over_nu");
  require_finite(gamma_over_nu, "gamma_over_nu");
  require_finite(noise_amp, "noise_amp");
  if (beta_over_nu < 0.0) throw ConfigError("beta_over_nu must be non-negative");
  if (!(one_over_nu > 0.0)) throw ConfigError("one_over_nu must be positive");
  if (!(gamma_over_nu > 0.0)) throw ConfigError("gamma_over_nu must be positive");
  if (noise_amp < 0.0) throw ConfigError("noise_amp must be non-negative");
}

void CrossoverPlant::validate() const {
  require_finite(f_0, "f_0");
  require_finite(width, "width");
  require_finite(chi_ceiling, "chi_ceiling");
  require_finite(rate, "rate");
  if (!(width > 0.0)) throw ConfigError("crossover width must be positive");
  if (!(chi_ceiling > 0.0)) throw ConfigError("chi_ceiling must be positive");
  if (!(rate > 0.0)) throw ConfigError("rate must be positive");
}

double critical_mean(const CriticalPlant& plant, int p, double f) {
  const double x = (f - plant.f_c) * std::pow(p, plant.one_over_nu);
  return std::pow(p, -plant.beta_over_nu) * logistic(x);
}

double critical_noise_variance(const CriticalPlant& plant, int p, double f, int n_s) {
  const double x = (f - plant.f_c) * std::pow(p, plant.one_over_nu);
  return plant.noise_amp * plant.noise_amp / n_s * std::pow(p, plant.gamma_over_nu) * std::exp(-x * x);
}

double crossover_mean(const CrossoverPlant& plant, double f) { return logistic((f - plant.f_0) / plant.width); }

double crossover_noise_variance(const CrossoverPlant& plant, int p, double f, int n_s) {
  const double z = (f - plant.f_0) / plant.width;
  return plant.chi_ceiling / n_s * (1.0 - std::exp(-plant.rate * p)) * std::exp(-z * z);
}

std::vector<fss::SeedEnsemble> gen_critical(const CriticalPlant& plant, std::span<const int> p_list,
                                            std::span<const double> f_grid, int n_s, Operation op) {
  plant.validate();
  return generate(
      p_list, f_grid, n_s, op, plant.seed, [&](int p, double f) { return critical_mean(plant, p, f); },
      [&](int p, double f) { return critical_noise_variance(plant, p, f, n_s); });
}

std::vector<fss::SeedEnsemble> gen_crossover(const CrossoverPlant& plant, std::span<const int> p_list,
                                             std::span<const double> f_grid, int n_s, Operation op) {
  plant.validate();
  return generate(
      p_list, f_grid, n_s, op, plant.seed, [&](int, double f) { return crossover_mean(plant, f); },
      [&](int p, double f) { return crossover_noise_variance(plant, p, f, n_s); });
}

std::vector<double> linear_grid(double start, double stop, double step) {
  if (!(step > 0.0) || stop < start) throw ConfigError("grid needs step > 0 and stop >= start");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(std::round((start + step * static_cast<double>(i)) * 1e12) / 1e12);
  return out;
}

std::vector<double> synthetic_spectrum(double s, int d) {
  constexpr int kHead = 5;
  if (d <= kHead) throw ConfigError("synthetic spectrum needs d > 5");
  constexpr double weights[kHead] = {0.30, 0.25, 0.20, 0.15, 0.10};
  constexpr double ratio = 0.97;
  const double head = logistic(s);
  std::vector<double> mass(static_cast<std::size_t>(d));
  for (int i = 0; i < kHead; ++i) mass[static_cast<std::size_t>(i)] = head * weights[i];
  double norm = 0.0, term = 1.0;
  for (int i = kHead; i < d; ++i, term *= ratio) norm += term;
  term = 1.0;
  for (int i = kHead; i < d; ++i, term *= ratio) mass[static_cast<std::size_t>(i)] = (1.0 - head) * term / norm;
  std::sort(mass.begin(), mass.end(), std::greater<>());
  return mass;
}

std::vector<double> bimodal_fixture(int n, double separation, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = rng.normal() + (i % 2 == 0 ? 0.0 : separation);
  return out;
}

json ensembles_to_json(std::span<const fss::SeedEnsemble> ensembles, const json& source) {
  json list = json::array();
  for (const auto& e : ensembles) {
    list.push_back({{"p", e.p}, {"f", e.f}, {"op", std::string(to_string(e.op))}, {"values", e.values}});
  }
  return {{"format", "grokscale-ensembles"}, {"source", source}, {"ensembles", list}};
}

std::vector<fss::SeedEnsemble> ensembles_from_json(const json& j) {
  if (j.value("format", std::string{}) != "grokscale-ensembles") throw InputError("not a grokscale ensemble file");
  std::vector<fss::SeedEnsemble> out;
  try {
    for (const auto& e : j.at("ensembles")) {
      fss::SeedEnsemble s;
      s.p = e.at("p").get<int>();
      s.f = e.at("f").get<double>();
      s.op = parse_operation(e.value("op", std::string("add")));
      s.values = e.at("values").get<std::vector<double>>();
      out.push_back(std::move(s));
    }
  } catch (const json::exception& ex) {
    throw InputError(std::string("malformed ensemble file: ") + ex.what());
  }
  return out;
}

json to_json(const CriticalPlant& p) {
  return {{"kind", "critical"},           {"f_c", p.f_c},
          {"beta_over_nu", p.beta_over_nu}, {"one_over_nu", p.one_over_nu},
          {"gamma_over_nu", p.gamma_over_nu}, {"noise_amp", p.noise_amp},
          {"seed", p.seed}};
}

json to_json(const CrossoverPlant& p) {
  return {{"kind", "crossover"},      {"f_0", p.f_0},   {"width", p.width},
          {"chi_ceiling", p.chi_ceiling}, {"rate", p.rate}, {"seed", p.seed}};
}

CriticalPlant critical_from_json(const json& j) {
  CriticalPlant p;
  try {
    p.f_c = j.value("f_c", p.f_c);
    p.beta_over_nu = j.value("beta_over_nu", p.beta_over_nu);
    p.one_over_nu = j.value("one_over_nu", p.one_over_nu);
    p.gamma_over_nu = j.value("gamma_over_nu", p.gamma_over_nu);
    p.noise_amp = j.value("noise_amp", p.noise_amp);
    p.seed = j.value("seed", p.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("critical plant: ") + e.what());
  }
  p.validate();
  return p;
}

CrossoverPlant crossover_from_json(const json& j) {
  CrossoverPlant p;
  try {
    p.f_0 = j.value("f_0", p.f_0);
    p.width = j.value("width", p.width);
    p.chi_ceiling = j.value("chi_ceiling", p.chi_ceiling);
    p.rate = j.value("rate", p.rate);
    p.seed = j.value("seed", p.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("crossover plant: ") + e.what());
  }
  p.validate();
  return p;
}

}  // namespace grokscale::oracle
