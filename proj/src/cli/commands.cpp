// SPDX-License-Identifier: Apache-2.0
#include "mpg/cli/commands.hpp"

#include "mpg/cli/checkpoint.hpp"
#include "mpg/cli/gradcheck_suite.hpp"
#include "mpg/ssl/ssl.hpp"
#include "mpg/tasks/tasks.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>

namespace mpg::cli {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

void apply_precision(const RunConfig& config) {
  nc::set_precision(config.precision == 32 ? nc::Precision::Float32
                                           : nc::Precision::Float64);
}

std::vector<chem::MolGraph> parse_corpus(const std::vector<std::string>& lines) {
  std::vector<chem::MolGraph> corpus;
  corpus.reserve(lines.size());
  for (const auto& line : lines) corpus.push_back(chem::parse_smiles(line));
  return corpus;
}

molgnet::MolGNetParams init_model(const RunConfig& config) {
  Rng rng = Rng(config.seed).fork(0);
  return molgnet::MolGNetParams::init(config.model, rng);
}

// Model config travels inside the checkpoint; a differing active config is
// an error rather than a silent reshape.
void require_matching_model(const RunConfig& active, const Checkpoint& checkpoint) {
  const RunConfig stored = RunConfig::from_json(checkpoint.config_json);
  if (!(stored.model == active.model))
    throw CheckpointError("checkpoint model config differs from the requested one");
}

molgnet::MolGNetParams load_model_params(const RunConfig& config,
                                         const Checkpoint& checkpoint) {
  require_matching_model(config, checkpoint);
  molgnet::MolGNetParams params = init_model(config);
  load_into(checkpoint, params.named());
  return params;
}

json metrics_json(const ssl::PretrainMetricsRow& row) {
  json j;
  j["step"] = row.step;
  j["psd_loss"] = row.train.psd_loss;
  j["mask_loss"] = row.train.mask_loss;
  j["psd_acc"] = row.train.psd_accuracy;
  j["mask_acc"] = row.train.mask_accuracy;
  return j;
}

}  // namespace

std::vector<std::string> read_corpus_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open corpus file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab != std::string::npos) line = line.substr(0, tab);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw IOError("corpus file has no molecules: " + path);
  return lines;
}

std::uint64_t params_hash(const std::vector<std::pair<std::string, nc::Tensor>>& named) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, tensor] : named) {
    mix(name.data(), name.size());
    mix(tensor.data(), tensor.size() * sizeof(double));
  }
  return h;
}

int cmd_parse(const RunConfig& config, std::ostream& out) {
  if (config.corpus_path.empty()) throw ConfigError("parse requires --corpus");
  for (const auto& line : read_corpus_lines(config.corpus_path)) {
    json record;
    record["smiles"] = line;
    try {
      chem::MolGraph mol = chem::parse_smiles(line, /*check_valence=*/false);
      json atoms = json::array();
      for (const auto& atom : mol.atoms)
        atoms.push_back({{"element", std::string(chem::element_symbol(atom.element))},
                         {"charge", atom.formal_charge},
                         {"h", atom.total_h()},
                         {"aromatic", atom.aromatic},
                         {"degree", atom.degree}});
      json bonds = json::array();
      static const char* kOrder[] = {"single", "double", "triple", "aromatic"};
      for (const auto& bond : mol.bonds)
        bonds.push_back({{"a", bond.a},
                         {"b", bond.b},
                         {"order", kOrder[static_cast<int>(bond.order)]},
                         {"in_ring", bond.in_ring}});
      record["atoms"] = std::move(atoms);
      record["bonds"] = std::move(bonds);
      try {
        chem::check_valences(mol);
        record["valid"] = true;
      } catch (const chem::ValenceError& e) {
        record["valid"] = false;
        record["error"] = e.what();
      }
    } catch (const chem::SyntaxError& e) {
      record["valid"] = false;
      record["error"] = e.what();
    }
    out << record.dump() << "\n";
  }
  return kExitOk;
}

int cmd_pretrain(RunConfig config, std::ostream& status) {
  if (config.lr <= 0.0) config.lr = 1e-3;
  config.validate();
  if (config.corpus_path.empty()) throw ConfigError("pretrain requires --corpus");
  if (config.out_path.empty()) throw ConfigError("pretrain requires --out");
  apply_precision(config);

  std::vector<chem::MolGraph> corpus = parse_corpus(read_corpus_lines(config.corpus_path));

  Rng init_rng = Rng(config.seed).fork(0);
  molgnet::MolGNetParams params = molgnet::MolGNetParams::init(config.model, init_rng);
  ssl::PsdHead psd_head = ssl::PsdHead::init(config.model.hidden, init_rng);
  ssl::MaskHead mask_head =
      ssl::MaskHead::init(config.model.hidden, chem::kElementCount, init_rng);

  const std::string log_path =
      config.log_path.empty() ? config.out_path + ".metrics.jsonl" : config.log_path;
  std::ofstream log(log_path);
  if (!log) throw IOError("cannot open metrics log: " + log_path);

  ssl::PretrainOptions options;
  options.steps = config.steps;
  options.batch_size = config.batch_size;
  options.mask_rate = config.mask_rate;
  options.lambda = config.lambda;
  options.seed = config.seed;
  options.adam = {config.lr, config.beta1, config.beta2, config.adam_eps};

  auto save = [&](std::uint64_t step) {
    Checkpoint checkpoint;
    checkpoint.config_json = config.to_json();
    checkpoint.step = step;
    checkpoint.params = params.named();
    for (auto& [n, t] : psd_head.named()) checkpoint.params.emplace_back(n, t);
    for (auto& [n, t] : mask_head.named()) checkpoint.params.emplace_back(n, t);
    save_checkpoint(config.out_path, checkpoint);
  };

  ssl::PretrainResult result = ssl::pretrain(
      corpus, params, psd_head, mask_head, config.model, options,
      [&](const ssl::PretrainMetricsRow& row) { log << metrics_json(row).dump() << "\n"; },
      [&](int step) { save(static_cast<std::uint64_t>(step)); });
  log.close();

  json report;
  report["steps"] = config.steps;
  report["held_out_psd_acc"] = result.held_out.psd_accuracy;
  report["held_out_mask_acc"] = result.held_out.mask_accuracy;
  report["held_out_psd_loss"] = result.held_out.psd_loss;
  report["held_out_mask_loss"] = result.held_out.mask_loss;
  report["checkpoint"] = config.out_path;
  report["metrics_log"] = log_path;
  status << report.dump(2) << "\n";
  return kExitOk;
}

int cmd_finetune(RunConfig config, std::ostream& status) {
  if (config.lr <= 0.0) config.lr = 1e-4;
  config.validate();
  if (config.dataset_path.empty()) throw ConfigError("finetune requires --data");
  apply_precision(config);

  tasks::LabeledDataset dataset = tasks::load_dataset(config.dataset_path);
  tasks::assign_splits(dataset, config.seed);
  status << "NOTE: seeded random split (" << (dataset.paired ? "7:1:2" : "8:1:1")
         << "); scaffold splitting is out of scope for this implementation\n";

  molgnet::MolGNetParams params;
  bool from_checkpoint = false;
  if (!config.no_pretrain && !config.checkpoint_path.empty()) {
    Checkpoint checkpoint = load_checkpoint(config.checkpoint_path);
    params = load_model_params(config, checkpoint);
    from_checkpoint = true;
  } else {
    params = init_model(config);
  }
  char hash_hex[32];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016" PRIx64, params_hash(params.named()));
  status << "init: " << (from_checkpoint ? "pretrained" : "random") << " hash "
         << hash_hex << "\n";

  tasks::FinetuneOptions options;
  options.epochs = config.epochs;
  options.batch_size = config.batch_size;
  options.patience = config.patience;
  options.seed = config.seed;
  options.adam = {config.lr, config.beta1, config.beta2, config.adam_eps};
  options.readout =
      config.readout == "mean" ? tasks::Readout::MeanNodes : tasks::Readout::Collect;

  tasks::FinetuneResult result = tasks::finetune(dataset, std::move(params),
                                                 config.model, options);

  if (!config.log_path.empty()) {
    std::ofstream log(config.log_path);
    if (!log) throw IOError("cannot open metrics log: " + config.log_path);
    for (const auto& e : result.history) {
      json j;
      j["epoch"] = e.epoch;
      j["train_loss"] = e.train_loss;
      j["val_metric"] = e.val_metric;
      log << j.dump() << "\n";
    }
  }
  if (!config.out_path.empty()) {
    Checkpoint checkpoint;
    checkpoint.config_json = config.to_json();
    checkpoint.step = static_cast<std::uint64_t>(result.history.size());
    checkpoint.params = result.params.named();
    for (auto& [n, t] : result.head.named()) checkpoint.params.emplace_back(n, t);
    save_checkpoint(config.out_path, checkpoint);
  }

  json report;
  report["metric"] = dataset.kind == tasks::TaskKind::Regression ? "rmse" : "auc_roc";
  report["task"] = dataset.kind == tasks::TaskKind::Regression ? "regression"
                   : dataset.kind == tasks::TaskKind::Multilabel ? "multilabel"
                                                                 : "binary";
  report["best_epoch"] = result.best_epoch;
  report["val"] = result.best_val_metric;
  report["test"] = result.test_metric;
  report["epochs_run"] = result.history.size();
  report["pretrained"] = from_checkpoint;
  status << report.dump(2) << "\n";
  return kExitOk;
}

int cmd_embed(const RunConfig& config, std::ostream& status) {
  if (config.checkpoint_path.empty()) throw ConfigError("embed requires --checkpoint");
  if (config.corpus_path.empty()) throw ConfigError("embed requires --corpus");
  if (config.out_path.empty()) throw ConfigError("embed requires --out");
  Checkpoint checkpoint = load_checkpoint(config.checkpoint_path);
  RunConfig stored = RunConfig::from_json(checkpoint.config_json);
  apply_precision(config);
  molgnet::MolGNetParams params = init_model(stored);
  load_into(checkpoint, params.named());

  const std::vector<std::string> lines = read_corpus_lines(config.corpus_path);
  std::vector<chem::MolGraph> corpus = parse_corpus(lines);
  const auto embeddings = tasks::embed_molecules(corpus, params, stored.model);

  std::ofstream out(config.out_path);
  if (!out) throw IOError("cannot open output file: " + config.out_path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out << lines[i];
    for (double v : embeddings[i]) out << "\t" << fmt_double(v);
    out << "\n";
  }
  status << "wrote " << lines.size() << " embeddings of dimension "
         << (embeddings.empty() ? 0 : embeddings[0].size()) << " to " << config.out_path
         << "\n";
  return kExitOk;
}

int cmd_attend(const RunConfig& config, const std::string& smiles, std::ostream& out) {
  if (config.checkpoint_path.empty()) throw ConfigError("attend requires --checkpoint");
  Checkpoint checkpoint = load_checkpoint(config.checkpoint_path);
  RunConfig stored = RunConfig::from_json(checkpoint.config_json);
  apply_precision(config);
  molgnet::MolGNetParams params = init_model(stored);
  load_into(checkpoint, params.named());

  chem::MolGraph mol = chem::parse_smiles(smiles);
  molgnet::BatchedGraph batch =
      tasks::assemble_single(mol, chem::FeatureVocab::standard());
  molgnet::ForwardOut fwd = molgnet::forward(batch, params, stored.model);
  const auto weights = molgnet::collection_attention_weights(fwd, batch);
  for (std::size_t i = 0; i < weights[0].size(); ++i)
    out << i << "\t" << chem::element_symbol(mol.atoms[i].element) << "\t"
        << fmt_double(weights[0][i]) << "\n";
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& config, bool exhaustive, std::ostream& out) {
  config.model.validate();
  nc::set_precision(nc::Precision::Float64);  // the oracle is 64-bit only
  GradCheckSuiteResult result =
      run_gradcheck_suite(config.model, config.seed, 1e-4, exhaustive ? 0 : 12);
  for (const auto& [name, report] : result.checks) {
    std::size_t coords = 0;
    for (const auto& entry : report.entries) coords += entry.coords_checked;
    out << (report.passed(result.tol) ? "pass" : "FAIL") << "  " << name
        << "  max_rel_err=" << fmt_double(report.max_rel_err) << "  coords=" << coords;
    if (!report.worst.empty() && !report.passed(result.tol))
      out << "  worst=" << report.worst;
    out << "\n";
  }
  out << (result.passed() ? "gradcheck passed" : "gradcheck FAILED")
      << " (worst " << fmt_double(result.worst()) << ", tol "
      << fmt_double(result.tol) << ")\n";
  return result.passed() ? kExitOk : kExitNumerical;
}

int cmd_eval(const RunConfig& config, std::ostream& out) {
  if (config.checkpoint_path.empty()) throw ConfigError("eval requires --checkpoint");
  if (config.dataset_path.empty()) throw ConfigError("eval requires --data");
  Checkpoint checkpoint = load_checkpoint(config.checkpoint_path);
  RunConfig stored = RunConfig::from_json(checkpoint.config_json);
  apply_precision(config);

  tasks::LabeledDataset dataset = tasks::load_dataset(config.dataset_path);
  tasks::assign_splits(dataset, stored.seed);  // reproduce the training split

  molgnet::MolGNetParams params = init_model(stored);
  load_into(checkpoint, params.named());
  Rng head_rng = Rng(stored.seed).fork(21);
  tasks::TaskHead head = tasks::TaskHead::init(
      dataset.kind, stored.model.hidden, static_cast<int>(dataset.label_names.size()),
      head_rng);
  load_into(checkpoint, head.named());

  const auto readout =
      stored.readout == "mean" ? tasks::Readout::MeanNodes : tasks::Readout::Collect;
  const auto rows = dataset.indices(tasks::Split::Test);
  const auto scores = tasks::predict(dataset, tasks::Split::Test, params, head,
                                     stored.model, readout);
  json report;
  report["split"] = "test";
  report["rows"] = rows.size();
  if (dataset.kind == tasks::TaskKind::Regression) {
    std::vector<double> p, t;
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < dataset.label_names.size(); ++j)
        if (dataset.rows[rows[i]].labels[j]) {
          p.push_back(scores[i][j]);
          t.push_back(*dataset.rows[rows[i]].labels[j]);
        }
    report["rmse"] = tasks::rmse(p, t);
  } else {
    report["auc_roc"] =
        tasks::evaluate_split(dataset, tasks::Split::Test, params, head, stored.model, readout);
    if (dataset.kind == tasks::TaskKind::Binary) {
      std::vector<double> s;
      std::vector<int> y;
      for (std::size_t i = 0; i < rows.size(); ++i)
        if (dataset.rows[rows[i]].labels[0]) {
          s.push_back(scores[i][0]);
          y.push_back(*dataset.rows[rows[i]].labels[0] != 0.0 ? 1 : 0);
        }
      report["prc_auc"] = tasks::prc_auc(s, y);
      report["f1"] = tasks::f1(s, y);
    }
  }
  out << report.dump(2) << "\n";
  return kExitOk;
}

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const chem::SyntaxError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const chem::ValenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const chem::VocabError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const IOError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const tasks::DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const tasks::DegenerateError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace mpg::cli
