#include "grokscale/fss.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <Eigen/Dense>

#include "grokscale/errors.hpp"
#include "grokscale/observables.hpp"
#include "grokscale/random.hpp"

namespace grokscale::fss {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kGridMatch = 1e-9;

}  // namespace

double binder_ratio(std::span<const double> values) {
  if (values.empty()) throw InputError("Binder cumulant of an empty ensemble");
  double m2 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double sq = v * v;
    m2 += sq;
    m4 += sq * sq;
  }
  const auto n = static_cast<double>(values.size());
  m2 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) throw InputError("Binder cumulant undefined: second moment is zero");
  return 1.0 - m4 / (3.0 * m2 * m2);
}

U4Estimate binder_u4(const SeedEnsemble& ensemble, const stats::BootstrapOptions& boot) {
  if (ensemble.n_s() < 2) throw InputError("Binder cumulant needs at least two seeds");
  const auto& v = ensemble.values;
  U4Estimate est{binder_ratio(v), 0.0};
  const auto resampled = stats::bootstrap(v.size(), boot, [&v](std::span<const std::size_t> idx) {
    double m2 = 0.0, m4 = 0.0;
    for (std::size_t i : idx) {
      const double sq = v[i] * v[i];
      m2 += sq;
      m4 += sq * sq;
    }
    const auto n = static_cast<double>(idx.size());
    m2 /= n;
    m4 /= n;
    if (!(m2 > 0.0)) return kNaN;
    return 1.0 - m4 / (3.0 * m2 * m2);
  });
  est.se = stats::sample_std(resampled);
  return est;
}

double susceptibility(std::span<const double> values) {
  if (values.size() < 2) throw InputError("susceptibility needs at least two seeds");
  return static_cast<double>(values.size()) * stats::sample_variance(values);
}

BinderCurve binder_curve(int p, std::span<const SeedEnsemble* const> ensembles, const stats::BootstrapOptions& boot) {
  std::vector<const SeedEnsemble*> sorted(ensembles.begin(), ensembles.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return a->f < b->f; });
  BinderCurve curve{p, {}};
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0 && !(sorted[i]->f > sorted[i - 1]->f)) {
      throw InputError("duplicate fraction f=" + std::to_string(sorted[i]->f) + " at p=" + std::to_string(p));
    }
    stats::BootstrapOptions b = boot;
    b.seed = derive_seed(boot.seed, static_cast<std::uint64_t>(p) * 100003ULL + i);
    const U4Estimate e = binder_u4(*sorted[i], b);
    curve.points.push_back({sorted[i]->f, e.u4, e.se});
  }
  return curve;
}

std::vector<CrossingEstimate> pairwise_crossings(const BinderCurve& a, const BinderCurve& b) {
  std::vector<double> f, delta;
  std::size_t j = 0;
  for (const auto& pa : a.points) {
    while (j < b.points.size() && b.points[j].f < pa.f - kGridMatch) ++j;
    if (j < b.points.size() && std::abs(b.points[j].f - pa.f) <= kGridMatch) {
      f.push_back(pa.f);
      delta.push_back(pa.u4 - b.points[j].u4);
    }
  }
  if (f.size() < 2) {
    throw InputError("Binder curves for p=" + std::to_string(a.p) + " and p=" + std::to_string(b.p) +
                     " share fewer than two f values");
  }

  const std::pair<int, int> pair{std::min(a.p, b.p), std::max(a.p, b.p)};
  std::vector<CrossingEstimate> out;
  const std::size_t n = f.size();
  std::size_t i = 0;
  while (i < n) {
    if (delta[i] == 0.0) {
      std::size_t end = i;
      while (end + 1 < n && delta[end + 1] == 0.0) ++end;
      // A zero run counts once, and only if the curves change order across it.
      if (i > 0 && end + 1 < n && std::signbit(delta[i - 1]) != std::signbit(delta[end + 1])) {
        out.push_back({pair, 0.5 * (f[i] + f[end]), -1});
      }
      i = end + 1;
      continue;
    }
    if (i + 1 < n && delta[i + 1] != 0.0 && std::signbit(delta[i]) != std::signbit(delta[i + 1])) {
      const double t = delta[i] / (delta[i] - delta[i + 1]);
      out.push_back({pair, f[i] + (f[i + 1] - f[i]) * t, -1});
    }
    ++i;
  }
  return out;
}

std::vector<CrossingEstimate> all_crossings(std::span<const BinderCurve> curves) {
  std::vector<const BinderCurve*> sorted;
  for (const auto& c : curves) sorted.push_back(&c);
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto* x, const auto* y) { return x->p < y->p; });
  std::vector<CrossingEstimate> out;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    for (std::size_t k = i + 1; k < sorted.size(); ++k) {
      auto c = pairwise_crossings(*sorted[i], *sorted[k]);
      out.insert(out.end(), c.begin(), c.end());
    }
  }
  return out;
}

std::optional<BranchResult> dominant_branch(std::span<const CrossingEstimate> crossings, const FWindow& window,
                                            double gap) {
  if (crossings.empty()) return std::nullopt;
  std::vector<CrossingEstimate> sorted(crossings.begin(), crossings.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& x, const auto& y) { return x.f_star < y.f_star; });

  int cluster = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0 && sorted[i].f_star - sorted[i - 1].f_star > gap) ++cluster;
    sorted[i].branch_id = cluster;
  }
  const int clusters = cluster + 1;

  int best = -1;
  std::size_t best_count = 0;
  double best_distance = std::numeric_limits<double>::infinity();
  for (int c = 0; c < clusters; ++c) {
    std::vector<double> inside;
    for (const auto& x : sorted) {
      if (x.branch_id == c && window.contains(x.f_star)) inside.push_back(x.f_star);
    }
    if (inside.empty()) continue;
    const double distance = std::abs(stats::mean(inside) - window.center());
    if (inside.size() > best_count || (inside.size() == best_count && distance < best_distance)) {
      best = c;
      best_count = inside.size();
      best_distance = distance;
    }
  }
  if (best < 0) return std::nullopt;

  BranchResult result;
  result.clusters = clusters;
  std::vector<double> fs;
  for (const auto& x : sorted) {
    if (x.branch_id == best && window.contains(x.f_star)) {
      result.members.push_back(x);
      fs.push_back(x.f_star);
    }
  }
  result.f_c = stats::mean(fs);
  result.spread = fs.size() > 1 ? stats::sample_std(fs) : 0.0;
  return result;
}

std::optional<DriftResult> drift_test(std::span<const CrossingEstimate> members, const stats::BootstrapOptions& boot) {
  std::vector<double> x, y;
  std::set<double> distinct;
  for (const auto& m : members) {
    x.push_back(pair_inverse_size(m));
    y.push_back(m.f_star);
    distinct.insert(x.back());
  }
  if (members.size() < 3 || distinct.size() < 3) return std::nullopt;

  DriftResult result;
  result.members = members.size();
  result.slope = stats::ols(x, y).slope;
  const auto slopes = stats::bootstrap(x.size(), boot, [&x, &y](std::span<const std::size_t> idx) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i : idx) {
      mx += x[i];
      my += y[i];
    }
    mx /= static_cast<double>(idx.size());
    my /= static_cast<double>(idx.size());
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i : idx) {
      sxx += (x[i] - mx) * (x[i] - mx);
      sxy += (x[i] - mx) * (y[i] - my);
    }
    // Tiny relative Sxx means the resample drew a single size coordinate.
    if (!(sxx > 1e-24)) return kNaN;
    return sxy / sxx;
  });
  result.ci_low = stats::quantile(slopes, 0.025);
  result.ci_high = stats::quantile(slopes, 0.975);
  result.significant = result.ci_low > 0.0 || result.ci_high < 0.0;
  return result;
}

ChiPeak chi_peak(int p, std::span<const double> f, std::span<const double> chi) {
  if (f.size() != chi.size() || f.size() < 3) throw InputError("chi_peak needs at least three f points");
  const auto it = std::max_element(chi.begin(), chi.end());
  const auto i = static_cast<std::size_t>(it - chi.begin());
  ChiPeak peak{p, chi[i], f[i], false};
  if (i == 0 || i + 1 == chi.size()) {
    peak.boundary = true;
    return peak;
  }
  const double x0 = f[i - 1], x1 = f[i], x2 = f[i + 1];
  const double y0 = chi[i - 1], y1 = chi[i], y2 = chi[i + 1];
  const double denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
  const double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
  const double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
  const double c = (x1 * x2 * (x1 - x2) * y0 + x2 * x0 * (x2 - x0) * y1 + x0 * x1 * (x0 - x1) * y2) / denom;
  if (a < 0.0) {
    const double xv = std::clamp(-b / (2.0 * a), x0, x2);
    const double yv = (a * xv + b) * xv + c;
    if (yv >= y1) {
      peak.chi_max = yv;
      peak.f_at_max = xv;
    }
  }
  return peak;
}

double aic(double ss, int n, int k) {
  const double floor_ss = std::max(ss, std::numeric_limits<double>::min());
  return n * std::log(floor_ss / n) + 2.0 * k;
}

AICComparison aic_compare(std::span<const SizePeak> peaks) {
  if (peaks.size() < 4) throw InputError("aic_compare needs at least four sizes");
  std::vector<SizePeak> sorted(peaks.begin(), peaks.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.p < b.p; });

  const int n = static_cast<int>(sorted.size());
  std::vector<double> p(sorted.size()), chi(sorted.size()), lp(sorted.size()), lc(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    p[i] = sorted[i].p;
    chi[i] = sorted[i].chi_max;
    if (!(chi[i] > 0.0) || !std::isfinite(chi[i])) {
      throw NumericError("power_law fit: chi_max must be positive and finite (p=" + std::to_string(sorted[i].p) + ")");
    }
    lp[i] = std::log(p[i]);
    lc[i] = std::log(chi[i]);
  }

  AICComparison out;
  out.n = n;

  const stats::LineFit loglog = stats::ols(lp, lc);
  out.power_law.name = "power_law";
  out.power_law.amplitude = std::exp(loglog.intercept);
  out.power_law.shape = loglog.slope;
  double ss_pow = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double r = chi[i] - out.power_law.amplitude * std::pow(p[i], loglog.slope);
    ss_pow += r * r;
  }
  if (!std::isfinite(ss_pow)) throw NumericError("power_law fit produced non-finite SS");
  out.power_law.ss = ss_pow;

  auto saturating_ss = [&](double a, double b) {
    if (!(b > 0.0)) return std::numeric_limits<double>::infinity();
    double ss = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double r = chi[i] - a * (1.0 - std::exp(-b * p[i]));
      ss += r * r;
    }
    return ss;
  };
  auto best_amplitude = [&](double b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = 1.0 - std::exp(-b * p[i]);
      num += chi[i] * g;
      den += g * g;
    }
    return den > 0.0 ? num / den : 0.0;
  };

  constexpr int kStarts = 25;
  double best_ss = std::numeric_limits<double>::infinity();
  double best_a = 0.0, best_b = 0.0;
  for (int s = 0; s < kStarts; ++s) {
    const double b0 = std::pow(10.0, -4.0 + 4.0 * s / (kStarts - 1));
    const double a0 = best_amplitude(b0);
    const auto fit = stats::nelder_mead(
        [&](std::span<const double> x) { return saturating_ss(x[0], x[1]); }, {a0, b0});
    if (fit.value < best_ss) {
      best_ss = fit.value;
      best_a = fit.x[0];
      best_b = fit.x[1];
    }
  }
  // At the optimum b the amplitude is linear least squares.
  const double polished_a = best_amplitude(best_b);
  const double polished_ss = saturating_ss(polished_a, best_b);
  if (polished_ss < best_ss) {
    best_ss = polished_ss;
    best_a = polished_a;
  }
  if (!std::isfinite(best_ss)) throw NumericError("saturating fit produced non-finite SS");
  out.saturating.name = "saturating";
  out.saturating.amplitude = best_a;
  out.saturating.shape = best_b;
  out.saturating.ss = best_ss;

  out.power_law.aic = aic(out.power_law.ss, n, out.power_law.k_params);
  out.saturating.aic = aic(out.saturating.ss, n, out.saturating.k_params);
  out.delta_aic = out.saturating.aic - out.power_law.aic;
  return out;
}

double binder_minimum(const BinderCurve& curve) {
  if (curve.points.empty()) throw InputError("Binder minimum of an empty curve");
  double m = curve.points.front().u4;
  for (const auto& pt : curve.points) m = std::min(m, pt.u4);
  return m;
}

std::optional<Extrapolation> binder_min_extrapolate(std::span<const std::pair<int, double>> u4min_per_p,
                                                    const stats::BootstrapOptions& boot) {
  std::set<int> sizes;
  for (const auto& [p, u] : u4min_per_p) sizes.insert(p);
  if (u4min_per_p.size() < 3 || sizes.size() < 3) return std::nullopt;

  std::vector<double> x, y;
  for (const auto& [p, u] : u4min_per_p) {
    x.push_back(1.0 / p);
    y.push_back(u);
  }
  const stats::LineFit fit = stats::ols(x, y);
  Extrapolation out{fit.intercept, 0.0, fit.slope, u4min_per_p.size()};
  const auto intercepts = stats::bootstrap(x.size(), boot, [&x, &y](std::span<const std::size_t> idx) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i : idx) {
      mx += x[i];
      my += y[i];
    }
    mx /= static_cast<double>(idx.size());
    my /= static_cast<double>(idx.size());
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i : idx) {
      sxx += (x[i] - mx) * (x[i] - mx);
      sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 1e-24)) return kNaN;
    return my - (sxy / sxx) * mx;
  });
  out.intercept_se = stats::sample_std(intercepts);
  return out;
}

double silverman_bandwidth(std::span<const double> values) {
  const double sigma = stats::sample_std(values);
  const double iqr = stats::quantile(values, 0.75) - stats::quantile(values, 0.25);
  double spread = sigma;
  if (iqr > 0.0) spread = std::min(sigma, iqr / 1.34);
  return 0.9 * spread * std::pow(static_cast<double>(values.size()), -0.2);
}

namespace {

double kde_at(std::span<const double> values, double bandwidth, double x) {
  const double inv_h = 1.0 / bandwidth;
  double sum = 0.0;
  for (double v : values) {
    const double z = (x - v) * inv_h;
    sum += std::exp(-0.5 * z * z);
  }
  return sum * inv_h / (static_cast<double>(values.size()) * std::sqrt(2.0 * 3.14159265358979323846));
}

double grid_point(double lo, double hi, int grid, int i) {
  return grid > 1 ? lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid - 1) : lo;
}

}  // namespace

std::vector<double> kde(std::span<const double> values, double bandwidth, double lo, double hi, int grid) {
  std::vector<double> density(static_cast<std::size_t>(grid));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < grid; ++i) {
    density[static_cast<std::size_t>(i)] = kde_at(values, bandwidth, grid_point(lo, hi, grid, i));
  }
  return density;
}

std::vector<double> kde_serial(std::span<const double> values, double bandwidth, double lo, double hi, int grid) {
  std::vector<double> density(static_cast<std::size_t>(grid));
  for (int i = 0; i < grid; ++i) {
    density[static_cast<std::size_t>(i)] = kde_at(values, bandwidth, grid_point(lo, hi, grid, i));
  }
  return density;
}

BimodalityResult bimodality(std::span<const double> values) {
  if (values.size() < 10) throw InputError("bimodality needs at least ten seeds");
  BimodalityResult out;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  if (*mn == *mx) return out;
  const double sigma = stats::sample_std(values);

  out.bandwidth = silverman_bandwidth(values);
  const auto density = kde(values, out.bandwidth, *mn - 3.0 * out.bandwidth, *mx + 3.0 * out.bandwidth, kKdeGrid);
  out.n_modes = 0;
  for (std::size_t i = 1; i + 1 < density.size(); ++i) {
    if (density[i] > density[i - 1] && density[i] > density[i + 1]) ++out.n_modes;
  }

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t at = 0;
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    const double g = sorted[i + 1] - sorted[i];
    if (g > out.gap) {
      out.gap = g;
      at = i;
    }
  }
  const double n = static_cast<double>(sorted.size());
  const double left = static_cast<double>(at + 1);
  const double right = n - left;
  out.gap_ok = out.gap > sigma;
  out.balanced_ok = left >= kBalanceFraction * n && right >= kBalanceFraction * n;
  out.bimodal = out.n_modes >= 2 && out.gap_ok && out.balanced_ok;
  return out;
}

namespace {

constexpr int kMasterBins = 10;
constexpr double kCollapseBetaLo = 0.0, kCollapseBetaHi = 1.0;
constexpr double kCollapseNuLo = 0.25, kCollapseNuHi = 3.0;

}  // namespace

double collapse_quality(std::span<const CollapsePoint> points, double f_c, double beta_over_nu, double one_over_nu,
                        int* dof_out) {
  const std::size_t n = points.size();
  const int dof = static_cast<int>(n) - kMasterBins - 2;
  if (dof_out) *dof_out = dof;
  if (dof <= 0) return kNaN;

  double rms = 0.0;
  for (const auto& pt : points) rms += pt.mean * pt.mean;
  rms = std::sqrt(rms / static_cast<double>(n));
  const double floor = 1e-3 * rms + 1e-300;

  struct Scaled {
    double x, y, sigma;
  };
  std::vector<Scaled> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = points[i].p;
    const double scale_y = std::pow(p, beta_over_nu);
    s[i].x = (points[i].f - f_c) * std::pow(p, one_over_nu);
    s[i].y = points[i].mean * scale_y;
    s[i].sigma = std::sqrt(points[i].se * points[i].se + floor * floor) * scale_y;
  }
  std::vector<double> xs(n);
  std::transform(s.begin(), s.end(), xs.begin(), [](const Scaled& q) { return q.x; });
  std::vector<double> knots(kMasterBins);
  for (int k = 0; k < kMasterBins; ++k) knots[k] = stats::quantile(xs, static_cast<double>(k) / (kMasterBins - 1));

  // Weighted least-squares linear spline on equal-count knots.
  const int m = kMasterBins;
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  struct Basis {
    int j;
    double u;
  };
  std::vector<Basis> basis(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto j = static_cast<int>(std::upper_bound(knots.begin(), knots.end(), s[i].x) - knots.begin());
    j = std::clamp(j, 1, m - 1);
    const double span = knots[j] - knots[j - 1];
    const double u = span > 0.0 ? std::clamp((s[i].x - knots[j - 1]) / span, 0.0, 1.0) : 0.5;
    basis[i] = {j, u};
    const double w = 1.0 / (s[i].sigma * s[i].sigma);
    const double a = 1.0 - u, b = u;
    normal(j - 1, j - 1) += w * a * a;
    normal(j - 1, j) += w * a * b;
    normal(j, j - 1) += w * a * b;
    normal(j, j) += w * b * b;
    rhs(j - 1) += w * a * s[i].y;
    rhs(j) += w * b * s[i].y;
  }
  normal.diagonal().array() += 1e-12 * normal.diagonal().maxCoeff();
  const Eigen::VectorXd height = normal.ldlt().solve(rhs);

  double chi2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [j, u] = basis[i];
    const double r = (s[i].y - ((1.0 - u) * height(j - 1) + u * height(j))) / s[i].sigma;
    chi2 += r * r;
  }
  return chi2 / dof;
}

std::optional<CollapseResult> collapse_fit(std::span<const SeedEnsemble> ensembles, double f_c) {
  std::set<int> sizes;
  std::set<double> fractions;
  std::vector<CollapsePoint> points;
  for (const auto& e : ensembles) {
    if (e.n_s() < 2) continue;
    sizes.insert(e.p);
    fractions.insert(e.f);
    points.push_back({e.p, e.f, stats::mean(e.values),
                      stats::sample_std(e.values) / std::sqrt(static_cast<double>(e.n_s()))});
  }
  if (sizes.size() < 3 || fractions.size() < 5) return std::nullopt;
  int dof = 0;
  collapse_quality(points, f_c, 0.5, 1.0, &dof);
  if (dof <= 0) return std::nullopt;

  constexpr int kBetaSteps = 21, kNuSteps = 23;
  std::vector<double> grid_values;
  double best_q = std::numeric_limits<double>::infinity();
  double best_beta = 0.0, best_nu = 1.0;
  for (int i = 0; i < kBetaSteps; ++i) {
    const double beta = kCollapseBetaLo + (kCollapseBetaHi - kCollapseBetaLo) * i / (kBetaSteps - 1);
    for (int j = 0; j < kNuSteps; ++j) {
      const double nu = kCollapseNuLo + (kCollapseNuHi - kCollapseNuLo) * j / (kNuSteps - 1);
      const double q = collapse_quality(points, f_c, beta, nu);
      grid_values.push_back(q);
      if (q < best_q) {
        best_q = q;
        best_beta = beta;
        best_nu = nu;
      }
    }
  }

  auto objective = [&](std::span<const double> x) {
    if (x[0] < kCollapseBetaLo || x[0] > kCollapseBetaHi || x[1] < kCollapseNuLo || x[1] > kCollapseNuHi) {
      return std::numeric_limits<double>::infinity();
    }
    return collapse_quality(points, f_c, x[0], x[1]);
  };
  stats::NelderMeadOptions nm;
  nm.initial_step = 0.05;
  nm.x_tolerance = 1e-6;
  const auto refined = stats::nelder_mead(objective, {std::max(best_beta, 0.02), best_nu}, nm);

  CollapseResult out;
  if (refined.value < best_q) {
    out.beta_over_nu = refined.x[0];
    out.one_over_nu = refined.x[1];
    out.quality = refined.value;
  } else {
    out.beta_over_nu = best_beta;
    out.one_over_nu = best_nu;
    out.quality = best_q;
  }
  out.dof = dof;
  const double median = stats::quantile(grid_values, 0.5);
  out.sharpness = out.quality > 0.0 ? median / out.quality : std::numeric_limits<double>::infinity();
  out.low_confidence = out.sharpness < 2.0;
  out.overfit_warning = out.quality < 0.01 || dof < 10;
  return out;
}

std::string_view to_string(PhaseLabel label) {
  switch (label) {
    case PhaseLabel::no_memorization: return "no_memorization";
    case PhaseLabel::memorization_only: return "memorization_only";
    case PhaseLabel::grokking: return "grokking";
    case PhaseLabel::instant_generalization: return "instant_generalization";
  }
  return "?";
}

PhaseLabel phase_label(const RunHistory& history, std::int64_t instant_gap) {
  const GrokVerdict v = detect_grok(history);
  const bool memorized = v.memorize_step.has_value();
  if (!memorized) return PhaseLabel::no_memorization;
  if (!v.grokked) return PhaseLabel::memorization_only;
  return (*v.grok_step - *v.memorize_step) > instant_gap ? PhaseLabel::grokking : PhaseLabel::instant_generalization;
}

PhaseCell summarize_cell(std::span<const SeedOutcome> seeds) {
  PhaseCell cell;
  cell.seeds = seeds.size();
  double grok_sum = 0.0;
  std::size_t grokked = 0;
  for (const auto& s : seeds) {
    ++cell.counts[s.label];
    if (s.grok_step) {
      grok_sum += static_cast<double>(*s.grok_step);
      ++grokked;
    }
  }
  constexpr std::array priority{PhaseLabel::grokking, PhaseLabel::memorization_only,
                                PhaseLabel::instant_generalization, PhaseLabel::no_memorization};
  std::size_t best = 0;
  for (PhaseLabel label : priority) {
    const auto it = cell.counts.find(label);
    const std::size_t c = it == cell.counts.end() ? 0 : it->second;
    if (c > best) {
      best = c;
      cell.majority = label;
    }
  }
  cell.grok_fraction = seeds.empty() ? 0.0 : static_cast<double>(grokked) / static_cast<double>(seeds.size());
  if (grokked > 0) cell.mean_grok_time = grok_sum / static_cast<double>(grokked);
  return cell;
}

PhaseMap majority_phase_map(const std::map<std::pair<double, double>, std::vector<SeedOutcome>>& cells) {
  PhaseMap out;
  for (const auto& [key, seeds] : cells) {
    if (seeds.empty()) throw InputError("phase map cell without seeds");
    out[key] = summarize_cell(seeds);
  }
  return out;
}

}  // namespace grokscale::fss
