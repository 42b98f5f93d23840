// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mpg/numcore/tensor.hpp"

#include <cstdint>
#include <string>

namespace mpg::cli {

class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/**
 * On-disk layout (all integers little-endian):
 *   "MPGC" | version u16 | config_len u32 | config JSON bytes |
 *   step u64 | n_params u32 | records...
 * each record: name_len u32 | name | rank u32 | dims u32 x rank | f32 data.
 * Floats are stored in 32 bits; save(load(file)) reproduces the file
 * byte for byte.
 */
struct Checkpoint {
  std::uint16_t version = 1;
  std::string config_json;
  std::uint64_t step = 0;
  std::vector<std::pair<std::string, nc::Tensor>> params;

  const nc::Tensor* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

/// Copies checkpoint values into same-named destination tensors.
/// Missing names or shape mismatches raise CheckpointError; extra checkpoint
/// entries are ignored (heads from other phases).
void load_into(const Checkpoint& checkpoint,
               const std::vector<std::pair<std::string, nc::Tensor>>& destination);

}  // namespace mpg::cli
