#pragma once

// Finite-size-scaling diagnostics over seed ensembles of the order parameter.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "grokscale/history.hpp"
#include "grokscale/stats.hpp"
#include "grokscale/task_data.hpp"

namespace grokscale::fss {

/// Final order-parameter values across seeds at one (p, f, op).
struct SeedEnsemble {
  int p = 0;
  double f = 0.0;
  Operation op = Operation::add;
  std::vector<double> values;

  std::size_t n_s() const { return values.size(); }
};

struct BinderPoint {
  double f = 0.0;
  double u4 = 0.0;
  double se = 0.0;
};

struct BinderCurve {
  int p = 0;
  std::vector<BinderPoint> points;  // f strictly increasing
};

struct U4Estimate {
  double u4 = 0.0;
  double se = 0.0;
};

/// 1 - <m^4> / (3 <m^2>^2) with raw moments. Throws InputError when <m^2> == 0.
double binder_ratio(std::span<const double> values);

/// U4 with a case-resampling bootstrap standard error over seeds.
U4Estimate binder_u4(const SeedEnsemble& ensemble, const stats::BootstrapOptions& boot = {});

/// n_s * sample variance.
double susceptibility(std::span<const double> values);
inline double susceptibility(const SeedEnsemble& e) { return susceptibility(e.values); }

/// Binder curve for one size from its ensembles (any order; sorted by f).
BinderCurve binder_curve(int p, std::span<const SeedEnsemble* const> ensembles, const stats::BootstrapOptions& boot);

struct CrossingEstimate {
  std::pair<int, int> p_pair{0, 0};
  double f_star = 0.0;
  int branch_id = -1;
};

/// Linear-interpolation roots of U4_a - U4_b on the shared f grid.
std::vector<CrossingEstimate> pairwise_crossings(const BinderCurve& a, const BinderCurve& b);

/// All pairwise crossings of a set of curves (pairs in ascending p order).
std::vector<CrossingEstimate> all_crossings(std::span<const BinderCurve> curves);

struct FWindow {
  double lo = 0.0;
  double hi = 1.0;
  bool contains(double f) const { return f >= lo && f <= hi; }
  double center() const { return 0.5 * (lo + hi); }
};

inline constexpr double kBranchGap = 0.05;

struct BranchResult {
  double f_c = 0.0;
  double spread = 0.0;
  std::vector<CrossingEstimate> members;  // cluster members inside the window
  int clusters = 0;
};

/// Single-linkage clustering of f_star (gap threshold `gap`); the dominant
/// branch is the cluster with the most members inside `window`, ties broken
/// toward the window center. Absent when no crossing lies inside the window.
std::optional<BranchResult> dominant_branch(std::span<const CrossingEstimate> crossings, const FWindow& window,
                                            double gap = kBranchGap);

/// Size coordinate of a crossing for the drift regression: 2 / (p_i + p_j).
inline double pair_inverse_size(const CrossingEstimate& c) { return 2.0 / (c.p_pair.first + c.p_pair.second); }

struct DriftResult {
  double slope = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool significant = false;
  std::size_t members = 0;
};

/// OLS of f_star on 2/(p_i + p_j) with a 95% percentile bootstrap CI on the
/// slope. Absent (insufficient data) with fewer than three distinct sizes.
std::optional<DriftResult> drift_test(std::span<const CrossingEstimate> members,
                                      const stats::BootstrapOptions& boot = {});

struct ChiPeak {
  int p = 0;
  double chi_max = 0.0;
  double f_at_max = 0.0;
  bool boundary = false;  // maximum at a grid edge; left unrefined
};

/// Grid maximum of chi(f), refined by the parabola through its neighbors when interior.
ChiPeak chi_peak(int p, std::span<const double> f, std::span<const double> chi);

struct SizePeak {
  int p = 0;
  double chi_max = 0.0;
};

struct ModelFit {
  std::string name;
  int k_params = 2;
  double ss = 0.0;
  double aic = 0.0;
  double amplitude = 0.0;
  double shape = 0.0;  // exponent gamma/nu for the power law, rate b for the saturating form
};

struct AICComparison {
  int n = 0;
  ModelFit power_law;
  ModelFit saturating;
  double delta_aic = 0.0;  // AIC_saturating - AIC_power; positive favors the power law
  double exponent() const { return power_law.shape; }
  double rate() const { return saturating.shape; }
};

double aic(double ss, int n, int k);

/// Power law a p^g (log-log least squares) against a (1 - exp(-b p))
/// (multi-start Nelder-Mead), both scored by SS in the original scale.
/// Needs n >= 4 sizes with positive chi_max.
AICComparison aic_compare(std::span<const SizePeak> peaks);

struct Extrapolation {
  double intercept = 0.0;
  double intercept_se = 0.0;
  double slope = 0.0;
  std::size_t sizes = 0;
};

/// OLS of U4_min on 1/p; SE is the std of intercepts over case resamples.
/// Absent with fewer than three sizes.
std::optional<Extrapolation> binder_min_extrapolate(std::span<const std::pair<int, double>> u4min_per_p,
                                                    const stats::BootstrapOptions& boot = {});

double binder_minimum(const BinderCurve& curve);

struct BimodalityResult {
  int n_modes = 1;
  bool gap_ok = false;
  bool balanced_ok = false;
  bool bimodal = false;
  double bandwidth = 0.0;
  double gap = 0.0;
};

inline constexpr int kKdeGrid = 512;
inline constexpr double kBalanceFraction = 0.2;

double silverman_bandwidth(std::span<const double> values);

/// Gaussian KDE on `grid` evaluation points over [lo, hi].
std::vector<double> kde(std::span<const double> values, double bandwidth, double lo, double hi, int grid);
std::vector<double> kde_serial(std::span<const double> values, double bandwidth, double lo, double hi, int grid);

/// Silverman-bandwidth KDE mode count plus the largest-gap statistic.
/// Requires n_s >= 10.
BimodalityResult bimodality(std::span<const double> values);

struct CollapseResult {
  double beta_over_nu = 0.0;
  double one_over_nu = 0.0;
  double quality = 0.0;  // chi^2 / dof around the binned master curve
  int dof = 0;
  double sharpness = 0.0;  // median grid quality / minimum grid quality
  bool low_confidence = false;
  bool overfit_warning = false;
  bool exploratory = true;
};

struct CollapsePoint {
  int p = 0;
  double f = 0.0;
  double mean = 0.0;
  double se = 0.0;
};

/// Collapse quality at fixed exponents.
double collapse_quality(std::span<const CollapsePoint> points, double f_c, double beta_over_nu, double one_over_nu,
                        int* dof_out = nullptr);

/// Grid search over beta/nu in [0, 1], 1/nu in [0.25, 3] followed by
/// Nelder-Mead. Absent with fewer than three sizes or five fractions.
std::optional<CollapseResult> collapse_fit(std::span<const SeedEnsemble> ensembles, double f_c);

enum class PhaseLabel { no_memorization, memorization_only, grokking, instant_generalization };

std::string_view to_string(PhaseLabel label);

inline constexpr std::int64_t kInstantGap = 2500;

PhaseLabel phase_label(const RunHistory& history, std::int64_t instant_gap = kInstantGap);

struct SeedOutcome {
  PhaseLabel label = PhaseLabel::no_memorization;
  std::optional<std::int64_t> grok_step;
};

struct PhaseCell {
  PhaseLabel majority = PhaseLabel::no_memorization;
  double grok_fraction = 0.0;
  std::optional<double> mean_grok_time;
  std::size_t seeds = 0;
  std::map<PhaseLabel, std::size_t> counts;
};

/// Majority label with ties broken toward grokking, then memorization_only.
/// grok_fraction and mean_grok_time use the seeds where grokking was detected
/// (grokking and instant_generalization).
PhaseCell summarize_cell(std::span<const SeedOutcome> seeds);

/// Keyed by (f, weight decay).
using PhaseMap = std::map<std::pair<double, double>, PhaseCell>;
PhaseMap majority_phase_map(const std::map<std::pair<double, double>, std::vector<SeedOutcome>>& cells);

}  // namespace grokscale::fss
