#pragma once

// Central finite-difference check of the analytic transformer gradients.

#include <cstdint>
#include <string>
#include <vector>

#include "grokscale/transformer.hpp"

namespace grokscale {

struct GradCheckOptions {
  int d_model = 16;
  int n_heads = 2;
  int d_ff = 64;
  int p = 7;
  int batch = 16;
  double step = 1e-5;
  double init_scale = 0.3;
  double tolerance = 1e-3;
  std::uint64_t seed = 0;
};

struct BlockCheck {
  std::string name;
  std::size_t entries = 0;
  double rel_error = 0.0;  // ||g_fd - g|| / max(||g_fd|| + ||g||, 1e-12)
  double max_abs_error = 0.0;
  bool ok = false;
};

struct GradCheckResult {
  std::vector<BlockCheck> blocks;
  double worst = 0.0;
  bool ok = false;
};

/// One-layer double-precision model with N(0, init_scale) parameters; every
/// entry of every block is perturbed by +-step.
GradCheckResult gradient_check(const GradCheckOptions& options = {});

}  // namespace grokscale
