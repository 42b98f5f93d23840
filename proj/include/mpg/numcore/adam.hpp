// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mpg/numcore/tensor.hpp"

#include <cstdint>

namespace mpg::nc {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed set of parameter tensors.
class Adam {
public:
  Adam(std::vector<Tensor> params, AdamConfig config = {});

  /// One update from the parameters' accumulated gradients.
  void step();
  void zero_grad();

  std::uint64_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }

private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamConfig config_;
  std::uint64_t step_ = 0;
};

}  // namespace mpg::nc
