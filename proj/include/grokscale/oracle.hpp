#pragma once

// Seed ensembles with a planted continuous transition or a planted smooth
// crossover, in the same form the analysis consumes from real sweeps.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "grokscale/fss.hpp"

namespace grokscale::oracle {

/// m(f, p) = p^-beta/nu F((f - f_c) p^1/nu), F logistic; seed noise peaks at f_c.
struct CriticalPlant {
  double f_c = 0.40;
  double beta_over_nu = 0.25;
  double one_over_nu = 1.0;
  double gamma_over_nu = 1.5;
  double noise_amp = 0.03;
  std::uint64_t seed = 0;

  void validate() const;
};

/// m(f) = logistic((f - f_0) / width) for every p; chi saturates at chi_ceiling.
struct CrossoverPlant {
  double f_0 = 0.40;
  double width = 0.05;
  double chi_ceiling = 1.0;
  double rate = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

double critical_mean(const CriticalPlant& plant, int p, double f);
double critical_noise_variance(const CriticalPlant& plant, int p, double f, int n_s);
double crossover_mean(const CrossoverPlant& plant, double f);
double crossover_noise_variance(const CrossoverPlant& plant, int p, double f, int n_s);

/// One ensemble per (p, f), p-major. Deterministic in (plant, grids, n_s).
std::vector<fss::SeedEnsemble> gen_critical(const CriticalPlant& plant, std::span<const int> p_list,
                                            std::span<const double> f_grid, int n_s,
                                            Operation op = Operation::add);
std::vector<fss::SeedEnsemble> gen_crossover(const CrossoverPlant& plant, std::span<const int> p_list,
                                             std::span<const double> f_grid, int n_s,
                                             Operation op = Operation::add);

/// f_grid from start to stop inclusive in steps of `step`, rounded to 1e-12.
std::vector<double> linear_grid(double start, double stop, double step);

/// Normalized d-mode spectrum whose k=5 head-tail contrast equals s: head
/// mass e^s / (1 + e^s) split 0.30/0.25/0.20/0.15/0.10, tail geometric with
/// ratio 0.97. Sorted descending.
std::vector<double> synthetic_spectrum(double s, int d = 128);

/// Two-component fixture for the bimodality detector: n values, half near
/// each of two centers separated by `separation` standard deviations.
std::vector<double> bimodal_fixture(int n, double separation, std::uint64_t seed);

/// Ensembles serialized as {"format": "grokscale-ensembles", "source", "ensembles": [{p, f, op, values}]}.
nlohmann::json ensembles_to_json(std::span<const fss::SeedEnsemble> ensembles, const nlohmann::json& source);
std::vector<fss::SeedEnsemble> ensembles_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CriticalPlant& plant);
nlohmann::json to_json(const CrossoverPlant& plant);
CriticalPlant critical_from_json(const nlohmann::json& j);
CrossoverPlant crossover_from_json(const nlohmann::json& j);

}  // namespace grokscale::oracle
