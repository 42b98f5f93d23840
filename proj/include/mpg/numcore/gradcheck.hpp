// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mpg/numcore/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace mpg::nc {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst;  // "param[coord]" of the worst coordinate
  std::vector<GradCheckEntry> entries;
  bool passed(double tol) const { return max_rel_err <= tol; }
};

struct GradCheckOptions {
  double h = 1e-5;
  double tol = 1e-4;
  /// 0 = every coordinate; otherwise a seeded subset per parameter
  /// (first, last, and random picks), which keeps large models tractable.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
};

/**
 * Central finite-difference check of reverse-mode gradients.
 *
 * `f` must rebuild the loss from the current parameter values on every call
 * and be deterministic. Analytic gradients come from one taped backward pass;
 * each checked coordinate is then perturbed by ±h and the numeric slope
 * (f(x+h e_i) - f(x-h e_i)) / 2h compared against it. Relative error uses a
 * unit floor: |a-n| / max(1, |a|, |n|). Failure is reported, not thrown.
 */
GradCheckReport finite_difference_check(
    const std::function<Tensor()>& f,
    const std::vector<std::pair<std::string, Tensor>>& params,
    const GradCheckOptions& options = {});

/// Single-input convenience form matching the oracle's basic contract.
GradCheckReport finite_difference_check(const std::function<Tensor(const Tensor&)>& f,
                                        const Tensor& x, double h, double tol);

}  // namespace mpg::nc
