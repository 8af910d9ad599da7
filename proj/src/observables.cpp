#include "grokscale/observables.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "grokscale/errors.hpp"
#include "grokscale/kernels.hpp"
#include "grokscale/stats.hpp"

namespace grokscale {

std::vector<double> probe_spectrum(std::span<const double> rows, std::size_t n, std::size_t d) {
  if (n < 2) throw InputError("probe_spectrum needs at least two rows");
  if (rows.size() != n * d) throw InputError("probe_spectrum: matrix size does not match n x d");

  std::vector<double> centered(rows.begin(), rows.end());
  std::vector<double> mean(d, 0.0);
  kernels::column_sums<double>(n, d, rows, std::span<double>(mean), false);
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double* r = centered.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) r[j] -= mean[j];
  }

  std::vector<double> cov(d * d);
  kernels::gemm_tn<double>(d, d, n, std::span<const double>(centered), std::span<const double>(centered),
                           std::span<double>(cov), false);
  Eigen::MatrixXd c(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      // Symmetrize explicitly; the two triangles are computed independently.
      const double v = 0.5 * (cov[i * d + j] + cov[j * d + i]) * inv;
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v + (i == j ? kCovarianceRidge : 0.0);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("covariance eigendecomposition failed");
  std::vector<double> eig(solver.eigenvalues().data(), solver.eigenvalues().data() + d);
  std::sort(eig.begin(), eig.end(), std::greater<>());
  return eig;
}

std::vector<double> normalize_spectrum(std::span<const double> eigenvalues) {
  const double total = std::accumulate(eigenvalues.begin(), eigenvalues.end(), 0.0);
  if (!(total > 0.0)) throw NumericError("spectrum has non-positive total mass");
  std::vector<double> mass(eigenvalues.size());
  for (std::size_t i = 0; i < mass.size(); ++i) mass[i] = std::max(0.0, eigenvalues[i]) / total;
  return mass;
}

double htc(std::span<const double> eig_mass, int k, double eps) {
  if (k < 1 || static_cast<std::size_t>(k) >= eig_mass.size()) {
    throw ConfigError("HTC head size k=" + std::to_string(k) + " must satisfy 1 <= k < d=" +
                      std::to_string(eig_mass.size()));
  }
  const auto split = eig_mass.begin() + k;
  const double head = std::accumulate(eig_mass.begin(), split, 0.0);
  const double tail = std::accumulate(split, eig_mass.end(), 0.0);
  return std::log((head + eps) / (tail + eps));
}

double htc(const SpectralRecord& record, int k, double eps) {
  const auto& m = record.eig_mass;
  if (k < 1 || static_cast<std::size_t>(k) > m.size() ||
      (static_cast<std::size_t>(k) == m.size() && record.tail_mass <= 0.0)) {
    throw ConfigError("HTC head size k=" + std::to_string(k) + " exceeds the stored spectrum");
  }
  const auto split = m.begin() + k;
  const double head = std::accumulate(m.begin(), split, 0.0);
  const double tail = std::accumulate(split, m.end(), 0.0) + record.tail_mass;
  return std::log((head + eps) / (tail + eps));
}

SpectralRecord spectral_record(std::int64_t step, std::span<const double> eigenvalues, int k) {
  SpectralRecord rec;
  rec.step = step;
  rec.eig_mass = normalize_spectrum(eigenvalues);
  rec.tail_mass = 0.0;
  rec.htc = htc(rec.eig_mass, k);
  return rec;
}

double tail_mean(const RunHistory& history, int window, int k) {
  if (history.records.empty()) throw InputError("tail_mean needs a nonempty history");
  const std::size_t n = history.records.size();
  const std::size_t take = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(window, 1)));
  double sum = 0.0;
  for (std::size_t i = n - take; i < n; ++i) {
    const auto& rec = history.records[i].spectral;
    sum += (k == kDefaultHead) ? rec.htc : htc(rec, k);
  }
  return sum / static_cast<double>(take);
}

GrokVerdict detect_grok(std::span<const CheckpointRecord> records) {
  GrokVerdict verdict;
  for (const auto& r : records) {
    if (r.train_acc > kMemorizeThreshold) {
      verdict.memorize_step = r.step;
      break;
    }
  }
  const std::size_t window = kGrokWindow;
  if (records.size() < window) return verdict;

  double sum = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    sum += records[i].eval_acc;
    if (i >= window) sum -= records[i - window].eval_acc;
    if (i + 1 < window) continue;
    // The running sum only pre-screens; both gates are recomputed exactly.
    if (!(sum / static_cast<double>(window) > kGrokMeanThreshold - 1e-9)) continue;
    if (!(records[i].train_acc > kMemorizeThreshold)) continue;
    const auto slice = records.subspan(i + 1 - window, window);
    std::vector<double> acc(window);
    std::transform(slice.begin(), slice.end(), acc.begin(), [](const auto& r) { return r.eval_acc; });
    if (stats::mean(acc) > kGrokMeanThreshold && stats::sample_std(acc) < kGrokStdThreshold) {
      verdict.grokked = true;
      verdict.grok_step = records[i].step;
      return verdict;
    }
  }
  return verdict;
}

bool early_stop_check(std::span<const CheckpointRecord> records) {
  if (records.size() < static_cast<std::size_t>(kHtcStableWindow)) return false;
  const GrokVerdict verdict = detect_grok(records);
  if (!verdict.grokked) return false;
  const std::int64_t current = records.back().step;
  if (current - *verdict.grok_step < kPostGrokSteps) return false;
  std::vector<double> recent;
  recent.reserve(kHtcStableWindow);
  for (std::size_t i = records.size() - kHtcStableWindow; i < records.size(); ++i) {
    recent.push_back(records[i].spectral.htc);
  }
  return stats::sample_std(recent) < kHtcStableStd;
}

}  // namespace grokscale
