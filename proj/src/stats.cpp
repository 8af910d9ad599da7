#include "grokscale/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "grokscale/errors.hpp"
#include "grokscale/random.hpp"

namespace grokscale::stats {

double mean(std::span<const double> x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double sample_std(std::span<const double> x) { return std::sqrt(sample_variance(x)); }

double quantile(std::span<const double> x, double q) {
  if (x.empty()) throw InputError("quantile of empty data");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const double h = (static_cast<double>(s.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

LineFit ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("ols needs at least two paired points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw InputError("ols needs at least two distinct x values");
  const double slope = sxy / sxx;
  return {my - slope * mx, slope};
}

namespace {

double one_resample(std::size_t n, std::uint64_t seed, int b, std::vector<std::size_t>& idx,
                    const std::function<double(std::span<const std::size_t>)>& stat) {
  Xoshiro256 rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
  constexpr int kMaxRedraws = 1000;
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
    const double v = stat(idx);
    if (!std::isnan(v)) return v;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

std::vector<double> bootstrap(std::size_t n, const BootstrapOptions& options,
                              const std::function<double(std::span<const std::size_t>)>& stat) {
  if (n == 0) throw InputError("bootstrap of empty sample");
  std::vector<double> out(static_cast<std::size_t>(std::max(options.resamples, 0)));
  const int total = static_cast<int>(out.size());
#pragma omp parallel
  {
    std::vector<std::size_t> idx(n);
#pragma omp for schedule(static)
    for (int b = 0; b < total; ++b) out[static_cast<std::size_t>(b)] = one_resample(n, options.seed, b, idx, stat);
  }
  return out;
}

std::vector<double> bootstrap_serial(std::size_t n, const BootstrapOptions& options,
                                     const std::function<double(std::span<const std::size_t>)>& stat) {
  if (n == 0) throw InputError("bootstrap of empty sample");
  std::vector<double> out(static_cast<std::size_t>(std::max(options.resamples, 0)));
  std::vector<std::size_t> idx(n);
  for (std::size_t b = 0; b < out.size(); ++b) out[b] = one_resample(n, options.seed, static_cast<int>(b), idx, stat);
  return out;
}

Minimum nelder_mead(const std::function<double(std::span<const double>)>& objective, std::vector<double> start,
                    const NelderMeadOptions& options) {
  const std::size_t dim = start.size();
  if (dim == 0) throw InputError("nelder_mead needs at least one coordinate");
  std::vector<std::vector<double>> simplex(dim + 1, start);
  for (std::size_t i = 0; i < dim; ++i) {
    simplex[i + 1][i] += options.initial_step * std::max(std::abs(start[i]), 1e-3);
  }
  auto eval = [&](const std::vector<double>& x) {
    const double v = objective(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  std::vector<double> values(dim + 1);
  for (std::size_t i = 0; i <= dim; ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(dim + 1);
  std::vector<double> centroid(dim), trial(dim), trial2(dim);
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[dim - 1];

    double spread = 0.0;
    for (std::size_t i = 0; i <= dim; ++i) {
      for (std::size_t j = 0; j < dim; ++j) spread = std::max(spread, std::abs(simplex[i][j] - simplex[best][j]));
    }
    const double fspread = values[worst] - values[best];
    if (spread < options.x_tolerance || (std::isfinite(fspread) && fspread < options.f_tolerance)) break;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= dim; ++i) {
      if (i == worst) continue;
      for (std::size_t j = 0; j < dim; ++j) centroid[j] += simplex[i][j] / static_cast<double>(dim);
    }
    for (std::size_t j = 0; j < dim; ++j) trial[j] = centroid[j] + (centroid[j] - simplex[worst][j]);
    const double f_reflect = eval(trial);

    if (f_reflect < values[best]) {
      for (std::size_t j = 0; j < dim; ++j) trial2[j] = centroid[j] + 2.0 * (centroid[j] - simplex[worst][j]);
      const double f_expand = eval(trial2);
      if (f_expand < f_reflect) {
        simplex[worst] = trial2;
        values[worst] = f_expand;
      } else {
        simplex[worst] = trial;
        values[worst] = f_reflect;
      }
      continue;
    }
    if (f_reflect < values[second]) {
      simplex[worst] = trial;
      values[worst] = f_reflect;
      continue;
    }
    // Contraction: outside if the reflection improved on the worst point.
    const bool outside = f_reflect < values[worst];
    for (std::size_t j = 0; j < dim; ++j) {
      trial2[j] = outside ? centroid[j] + 0.5 * (trial[j] - centroid[j])
                          : centroid[j] + 0.5 * (simplex[worst][j] - centroid[j]);
    }
    const double f_contract = eval(trial2);
    if (f_contract < (outside ? f_reflect : values[worst])) {
      simplex[worst] = trial2;
      values[worst] = f_contract;
      continue;
    }
    for (std::size_t i = 0; i <= dim; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < dim; ++j) simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
      values[i] = eval(simplex[i]);
    }
  }
  const auto best_it = std::min_element(values.begin(), values.end());
  const auto best = static_cast<std::size_t>(best_it - values.begin());
  return Minimum{simplex[best], values[best], it};
}

}  // namespace grokscale::stats
