#pragma once

// Spectral order parameter and the run-level detectors built on it.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "grokscale/history.hpp"
#include "grokscale/transformer.hpp"

namespace grokscale {

inline constexpr double kCovarianceRidge = 1e-6;
inline constexpr double kHtcEpsilon = 1e-10;
inline constexpr int kDefaultHead = 5;

inline constexpr int kTailWindow = 40;
inline constexpr int kGrokWindow = 40;
inline constexpr double kGrokMeanThreshold = 0.98;
inline constexpr double kGrokStdThreshold = 0.02;
inline constexpr double kMemorizeThreshold = 0.995;
inline constexpr std::int64_t kPostGrokSteps = 5000;
inline constexpr int kHtcStableWindow = 20;
inline constexpr double kHtcStableStd = 0.02;

/// Eigenvalues (descending) of cov(rows) + 1e-6 I, where rows is n x d
/// row-major and the covariance uses the 1/(n - 1) normalization.
std::vector<double> probe_spectrum(std::span<const double> rows, std::size_t n, std::size_t d);

/// Eigenvalues divided by their sum.
std::vector<double> normalize_spectrum(std::span<const double> eigenvalues);

/// log((sum_{j<k} p_j + eps) / (sum_{j>=k} p_j + eps)). Throws ConfigError
/// unless 1 <= k < d.
double htc(std::span<const double> eig_mass, int k = kDefaultHead, double eps = kHtcEpsilon);

/// HTC of a possibly truncated record: the dropped tail mass counts toward the tail.
double htc(const SpectralRecord& record, int k = kDefaultHead, double eps = kHtcEpsilon);

SpectralRecord spectral_record(std::int64_t step, std::span<const double> eigenvalues, int k = kDefaultHead);

/// Mean HTC over the last min(window, available) records.
double tail_mean(const RunHistory& history, int window = kTailWindow, int k = kDefaultHead);

struct GrokVerdict {
  bool grokked = false;
  std::optional<std::int64_t> grok_step;
  std::optional<std::int64_t> memorize_step;
};

GrokVerdict detect_grok(std::span<const CheckpointRecord> records);
inline GrokVerdict detect_grok(const RunHistory& history) { return detect_grok(history.records); }

bool early_stop_check(std::span<const CheckpointRecord> records);
inline bool early_stop_check(const RunHistory& history) { return early_stop_check(history.records); }

}  // namespace grokscale
