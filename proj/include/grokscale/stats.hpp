#pragma once

// Double-precision statistics shared by the analysis side: moments, OLS,
// case-resampling bootstrap, quantiles and a Nelder-Mead minimizer.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace grokscale::stats {

double mean(std::span<const double> x);
/// n - 1 denominator; 0 for fewer than two values.
double sample_variance(std::span<const double> x);
double sample_std(std::span<const double> x);

/// Linear-interpolation quantile (R type 7) of unsorted data.
double quantile(std::span<const double> x, double q);

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
};

/// Ordinary least squares y = intercept + slope * x. Requires two distinct x.
LineFit ols(std::span<const double> x, std::span<const double> y);

struct BootstrapOptions {
  int resamples = 2000;
  std::uint64_t seed = 0;
};

/// Draw `resamples` index sets of size n with replacement and evaluate `stat`
/// on each. Resample b uses its own generator derived from (seed, b), so the
/// output does not depend on thread count. `stat` must be thread-safe and may
/// return NaN to reject a degenerate resample; such resamples are redrawn
/// from the same stream.
std::vector<double> bootstrap(std::size_t n, const BootstrapOptions& options,
                              const std::function<double(std::span<const std::size_t>)>& stat);

/// Serial reference for bootstrap(); identical output.
std::vector<double> bootstrap_serial(std::size_t n, const BootstrapOptions& options,
                                     const std::function<double(std::span<const std::size_t>)>& stat);

struct NelderMeadOptions {
  double initial_step = 0.1;
  double x_tolerance = 1e-10;
  double f_tolerance = 1e-14;
  int max_iterations = 4000;
};

struct Minimum {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
};

/// Downhill simplex with standard reflection/expansion/contraction/shrink
/// coefficients (1, 2, 0.5, 0.5). The initial simplex offsets each coordinate
/// by initial_step * max(|x_i|, 1e-3).
Minimum nelder_mead(const std::function<double(std::span<const double>)>& objective, std::vector<double> start,
                    const NelderMeadOptions& options = {});

}  // namespace grokscale::stats
