// SPDX-License-Identifier: Apache-2.0
//
// mpg — SMILES parsing, self-supervised pre-training, fine-tuning, and
// embedding/attention extraction for the MolGNet graph network.

#include "mpg/cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace cli = mpg::cli;

namespace {

// Config file first, flags win on top of it.
cli::RunConfig initial_config(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") return cli::RunConfig::load(argv[i + 1]);
  return cli::RunConfig{};
}

void add_common(CLI::App* cmd, cli::RunConfig& config) {
  // the config file itself was consumed in the pre-pass; accept and ignore
  static std::string config_path_sink;
  cmd->add_option("--config", config_path_sink, "JSON config file (flags override it)");
  cmd->add_option("--seed", config.seed, "master seed");
  cmd->add_option("--checkpoint", config.checkpoint_path, "checkpoint to load");
  cmd->add_option("--out", config.out_path, "output path");
  cmd->add_option("--precision", config.precision, "floating point mode (32 or 64)")
      ->check(CLI::IsMember({32, 64}));
  cmd->add_flag("--no-pretrain", config.no_pretrain,
                "ignore the checkpoint and start from random parameters");
}

void add_model_options(CLI::App* cmd, cli::RunConfig& config) {
  cmd->add_option("--layers", config.model.n_layers, "number of layers N");
  cmd->add_option("--steps-per-layer", config.model.steps_per_layer,
                  "message passing steps T per layer");
  cmd->add_option("--hidden", config.model.hidden, "hidden dimension d");
  cmd->add_option("--ffn", config.model.ffn, "feed-forward dimension");
  cmd->add_option("--heads", config.model.heads, "attention heads");
  cmd->add_flag("--gru-standard-blend", config.model.gru_standard_blend,
                "blend the GRU with the hidden state instead of the node state");
  cmd->add_flag("--gru-persistent-hidden", config.model.gru_persistent_hidden,
                "carry the GRU hidden state across layers");
}

void add_train_options(CLI::App* cmd, cli::RunConfig& config) {
  cmd->add_option("--lr", config.lr, "learning rate");
  cmd->add_option("--batch-size", config.batch_size, "minibatch size");
  cmd->add_option("--log", config.log_path, "metrics log path (JSON lines)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MolGNet pre-training and fine-tuning"};
  app.require_subcommand(1);

  cli::RunConfig config;
  try {
    config = initial_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitUsage;
  }

  std::string attend_smiles;
  bool gradcheck_exhaustive = false;

  auto* parse = app.add_subcommand("parse", "parse a SMILES corpus into graph records");
  parse->add_option("--corpus", config.corpus_path, "corpus file, one SMILES per line");
  add_common(parse, config);

  auto* pretrain = app.add_subcommand("pretrain", "joint PSD + AttrMasking pre-training");
  pretrain->add_option("--corpus", config.corpus_path, "corpus file");
  pretrain->add_option("--steps", config.steps, "optimizer steps");
  pretrain->add_option("--mask-rate", config.mask_rate, "fraction of atoms to mask");
  pretrain->add_option("--lambda", config.lambda, "mask loss weight");
  add_common(pretrain, config);
  add_model_options(pretrain, config);
  add_train_options(pretrain, config);

  auto* finetune = app.add_subcommand("finetune", "train a task head on labeled data");
  finetune->add_option("--data", config.dataset_path, "labeled dataset (TSV with header)");
  finetune->add_option("--epochs", config.epochs, "maximum epochs");
  finetune->add_option("--patience", config.patience, "early stopping patience");
  finetune->add_option("--readout", config.readout, "graph readout: collect or mean")
      ->check(CLI::IsMember({"collect", "mean"}));
  add_common(finetune, config);
  add_model_options(finetune, config);
  add_train_options(finetune, config);

  auto* embed = app.add_subcommand("embed", "write collection-node embeddings");
  embed->add_option("--corpus", config.corpus_path, "corpus file");
  add_common(embed, config);

  auto* attend = app.add_subcommand("attend", "per-atom collection attention weights");
  attend->add_option("smiles", attend_smiles, "molecule to inspect")->required();
  add_common(attend, config);

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gradcheck->add_flag("--exhaustive", gradcheck_exhaustive,
                      "check every coordinate of every model parameter");
  add_common(gradcheck, config);
  add_model_options(gradcheck, config);

  auto* eval = app.add_subcommand("eval", "evaluate a fine-tuned checkpoint");
  eval->add_option("--data", config.dataset_path, "labeled dataset");
  add_common(eval, config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n";
    return cli::kExitUsage;
  }

  return cli::run_guarded(
      [&]() -> int {
        if (parse->parsed()) return cli::cmd_parse(config, std::cout);
        if (pretrain->parsed()) return cli::cmd_pretrain(config, std::cout);
        if (finetune->parsed()) return cli::cmd_finetune(config, std::cout);
        if (embed->parsed()) return cli::cmd_embed(config, std::cout);
        if (attend->parsed()) return cli::cmd_attend(config, attend_smiles, std::cout);
        if (gradcheck->parsed())
          return cli::cmd_gradcheck(config, gradcheck_exhaustive, std::cout);
        if (eval->parsed()) return cli::cmd_eval(config, std::cout);
        return cli::kExitUsage;
      },
      std::cerr);
}
