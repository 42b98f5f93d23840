// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mpg/molgnet/molgnet.hpp"
#include "mpg/numcore/gradcheck.hpp"

namespace mpg::cli {

struct GradCheckSuiteResult {
  std::vector<std::pair<std::string, nc::GradCheckReport>> checks;
  double tol = 1e-4;
  bool passed() const {
    for (const auto& [name, report] : checks)
      if (!report.passed(tol)) return false;
    return true;
  }
  double worst() const {
    double w = 0.0;
    for (const auto& [name, report] : checks) w = std::max(w, report.max_rel_err);
    return w;
  }
};

/**
 * Finite-difference verification of every differentiable op on small seeded
 * inputs (exhaustive coordinates) and of the full model with both heads on a
 * stitched 4-atom molecule. Model parameters are spot-checked on a seeded
 * subset of coordinates per tensor (`model_coords_per_param`; 0 = all).
 */
GradCheckSuiteResult run_gradcheck_suite(const molgnet::MolGNetConfig& config,
                                         std::uint64_t seed, double tol = 1e-4,
                                         std::size_t model_coords_per_param = 12);

}  // namespace mpg::cli
