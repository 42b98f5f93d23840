// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mpg/molgnet/molgnet.hpp"

#include <cstdint>
#include <string>

namespace mpg::cli {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/**
 * One reproducible run: model, optimizer, sampling, and path settings.
 * The seed fully determines initialization, sample order, and masking, and
 * the whole config travels inside every checkpoint.
 */
struct RunConfig {
  molgnet::MolGNetConfig model;
  double lr = 1e-3;  // pre-training default; fine-tuning uses 1e-4
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 7;
  int batch_size = 32;
  int steps = 300;
  int epochs = 40;
  int patience = 10;
  double mask_rate = 0.15;
  double lambda = 1.0;
  int precision = 64;  // 64 or 32
  std::string readout = "collect";  // or "mean"
  bool no_pretrain = false;
  std::string corpus_path;
  std::string dataset_path;
  std::string checkpoint_path;
  std::string out_path;
  std::string log_path;

  void validate() const;
  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::string& path);
};

}  // namespace mpg::cli
