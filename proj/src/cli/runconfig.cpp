// SPDX-License-Identifier: Apache-2.0
#include "mpg/cli/runconfig.hpp"

#include <fstream>
#include <json.hpp>

namespace mpg::cli {

using nlohmann::json;

void RunConfig::validate() const {
  model.validate();
  if (precision != 32 && precision != 64)
    throw ConfigError("precision must be 32 or 64");
  if (readout != "collect" && readout != "mean")
    throw ConfigError("readout must be 'collect' or 'mean'");
  if (batch_size < 1 || steps < 0 || epochs < 1 || patience < 1)
    throw ConfigError("batch_size/steps/epochs/patience out of range");
  if (mask_rate <= 0.0 || mask_rate >= 1.0)
    throw ConfigError("mask_rate must lie in (0, 1)");
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
}

std::string RunConfig::to_json() const {
  json j;
  j["model"]["n_layers"] = model.n_layers;
  j["model"]["steps_per_layer"] = model.steps_per_layer;
  j["model"]["hidden"] = model.hidden;
  j["model"]["ffn"] = model.ffn;
  j["model"]["heads"] = model.heads;
  j["model"]["atom_vocab"] = model.atom_vocab;
  j["model"]["bond_vocab"] = model.bond_vocab;
  j["model"]["gru_standard_blend"] = model.gru_standard_blend;
  j["model"]["gru_persistent_hidden"] = model.gru_persistent_hidden;
  j["optim"]["lr"] = lr;
  j["optim"]["beta1"] = beta1;
  j["optim"]["beta2"] = beta2;
  j["optim"]["eps"] = adam_eps;
  j["train"]["seed"] = seed;
  j["train"]["batch_size"] = batch_size;
  j["train"]["steps"] = steps;
  j["train"]["epochs"] = epochs;
  j["train"]["patience"] = patience;
  j["train"]["mask_rate"] = mask_rate;
  j["train"]["lambda"] = lambda;
  j["train"]["precision"] = precision;
  j["readout"] = readout;
  j["no_pretrain"] = no_pretrain;
  j["paths"]["corpus"] = corpus_path;
  j["paths"]["dataset"] = dataset_path;
  j["paths"]["checkpoint"] = checkpoint_path;
  j["paths"]["out"] = out_path;
  j["paths"]["log"] = log_path;
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  try {
    if (j.contains("model")) {
      const auto& m = j["model"];
      c.model.n_layers = m.value("n_layers", c.model.n_layers);
      c.model.steps_per_layer = m.value("steps_per_layer", c.model.steps_per_layer);
      c.model.hidden = m.value("hidden", c.model.hidden);
      c.model.ffn = m.value("ffn", c.model.ffn);
      c.model.heads = m.value("heads", c.model.heads);
      c.model.atom_vocab = m.value("atom_vocab", c.model.atom_vocab);
      c.model.bond_vocab = m.value("bond_vocab", c.model.bond_vocab);
      c.model.gru_standard_blend = m.value("gru_standard_blend", false);
      c.model.gru_persistent_hidden = m.value("gru_persistent_hidden", false);
    }
    if (j.contains("optim")) {
      const auto& o = j["optim"];
      c.lr = o.value("lr", c.lr);
      c.beta1 = o.value("beta1", c.beta1);
      c.beta2 = o.value("beta2", c.beta2);
      c.adam_eps = o.value("eps", c.adam_eps);
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      c.seed = t.value("seed", c.seed);
      c.batch_size = t.value("batch_size", c.batch_size);
      c.steps = t.value("steps", c.steps);
      c.epochs = t.value("epochs", c.epochs);
      c.patience = t.value("patience", c.patience);
      c.mask_rate = t.value("mask_rate", c.mask_rate);
      c.lambda = t.value("lambda", c.lambda);
      c.precision = t.value("precision", c.precision);
    }
    c.readout = j.value("readout", c.readout);
    c.no_pretrain = j.value("no_pretrain", c.no_pretrain);
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      c.corpus_path = p.value("corpus", std::string{});
      c.dataset_path = p.value("dataset", std::string{});
      c.checkpoint_path = p.value("checkpoint", std::string{});
      c.out_path = p.value("out", std::string{});
      c.log_path = p.value("log", std::string{});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

}  // namespace mpg::cli
