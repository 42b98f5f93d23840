// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mpg/cli/runconfig.hpp"

#include <iosfwd>
#include <string>

namespace mpg::cli {

class IOError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

int cmd_parse(const RunConfig& config, std::ostream& out);
int cmd_pretrain(RunConfig config, std::ostream& status);
int cmd_finetune(RunConfig config, std::ostream& status);
int cmd_embed(const RunConfig& config, std::ostream& status);
int cmd_attend(const RunConfig& config, const std::string& smiles, std::ostream& out);
int cmd_gradcheck(const RunConfig& config, bool exhaustive, std::ostream& out);
int cmd_eval(const RunConfig& config, std::ostream& out);

/// Maps a thrown error to the documented exit code, printing the message.
int run_guarded(const std::function<int()>& body, std::ostream& err);

/// One SMILES per line, optional tab-separated trailing columns ignored.
std::vector<std::string> read_corpus_lines(const std::string& path);

/// FNV-1a over the raw parameter bytes in naming order.
std::uint64_t params_hash(const std::vector<std::pair<std::string, nc::Tensor>>& named);

}  // namespace mpg::cli
