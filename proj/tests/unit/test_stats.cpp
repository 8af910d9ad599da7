#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "grokscale/errors.hpp"
#include "grokscale/stats.hpp"

using namespace grokscale;

TEST_CASE("moments") {
  const std::vector<double> x{1, 2, 3, 4};
  CHECK(stats::mean(x) == 2.5);
  CHECK(stats::sample_variance(x) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  CHECK(stats::sample_std(x) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  CHECK(stats::sample_variance(std::vector<double>{0, 1}) == 0.5);
}

TEST_CASE("linear quantiles") {
  const std::vector<double> x{3, 1, 2, 5, 4};
  CHECK(stats::quantile(x, 0.0) == 1.0);
  CHECK(stats::quantile(x, 1.0) == 5.0);
  CHECK(stats::quantile(x, 0.5) == 3.0);
  CHECK(stats::quantile(x, 0.125) == 1.5);
  CHECK_THROWS_AS(stats::quantile(std::vector<double>{}, 0.5), InputError);
}

TEST_CASE("ordinary least squares") {
  const std::vector<double> x{0, 1, 2, 3, 4}, y{1, 3, 5, 7, 9};
  const auto fit = stats::ols(x, y);
  CHECK(fit.intercept == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-14));
  CHECK_THROWS_AS(stats::ols(std::vector<double>{1}, std::vector<double>{1}), InputError);
}

TEST_CASE("bootstrap is reproducible and thread-count independent") {
  std::vector<double> data(40);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = std::sin(double(i)) * 3.0;
  auto stat = [&](std::span<const std::size_t> idx) {
    double s = 0.0;
    for (auto i : idx) s += data[i];
    return s / static_cast<double>(idx.size());
  };
  const stats::BootstrapOptions opt{500, 99};
  const auto a = stats::bootstrap(data.size(), opt, stat);
  const auto b = stats::bootstrap(data.size(), opt, stat);
  const auto c = stats::bootstrap_serial(data.size(), opt, stat);
  CHECK(a.size() == 500);
  CHECK(a == b);
  CHECK(a == c);
  // Standard error of the mean is close to sd / sqrt(n).
  const double se = stats::sample_std(a);
  CHECK(se == doctest::Approx(stats::sample_std(data) / std::sqrt(40.0)).epsilon(0.15));
}

TEST_CASE("degenerate resamples are redrawn") {
  const std::vector<double> data{0, 0, 0, 0, 0, 0, 0, 1};
  auto stat = [&](std::span<const std::size_t> idx) {
    double s = 0.0;
    for (auto i : idx) s += data[i];
    return s == 0.0 ? std::numeric_limits<double>::quiet_NaN() : s;
  };
  const auto out = stats::bootstrap(data.size(), {300, 1}, stat);
  for (double v : out) CHECK(v >= 1.0);
}

TEST_CASE("nelder-mead finds a shifted quadratic and Rosenbrock") {
  auto quad = [](std::span<const double> x) { return (x[0] - 1.5) * (x[0] - 1.5) + 4 * (x[1] + 0.5) * (x[1] + 0.5); };
  auto m = stats::nelder_mead(quad, {0.0, 0.0});
  CHECK(m.x[0] == doctest::Approx(1.5).epsilon(1e-5));
  CHECK(m.x[1] == doctest::Approx(-0.5).epsilon(1e-5));

  auto rosen = [](std::span<const double> x) {
    return 100 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]) + (1 - x[0]) * (1 - x[0]);
  };
  stats::NelderMeadOptions opt;
  opt.max_iterations = 20000;
  m = stats::nelder_mead(rosen, {-1.2, 1.0}, opt);
  CHECK(m.x[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(m.x[1] == doctest::Approx(1.0).epsilon(1e-4));
}
