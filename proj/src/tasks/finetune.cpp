// SPDX-License-Identifier: Apache-2.0
#include "mpg/tasks/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mpg::tasks {

namespace {

// single-graph assemblies built once per dataset
std::vector<molgnet::BatchedGraph> prepare_rows(const LabeledDataset& dataset,
                                                const chem::FeatureVocab& vocab) {
  std::vector<molgnet::BatchedGraph> prepared;
  prepared.reserve(dataset.rows.size());
  for (const auto& row : dataset.rows) {
    chem::MolGraph a = chem::parse_smiles(row.smiles);
    if (dataset.paired) {
      chem::MolGraph b = chem::parse_smiles(row.smiles2);
      prepared.push_back(assemble_pair(a, b, vocab));
    } else {
      prepared.push_back(assemble_single(a, vocab));
    }
  }
  return prepared;
}

nc::Tensor readout_of(const molgnet::BatchedGraph& batch, const nc::Tensor& states,
                      Readout readout) {
  return readout == Readout::Collect ? molgnet::collection_embedding(batch, states)
                                     : molgnet::mean_node_embedding(batch, states);
}

nc::Tensor batch_logits(const std::vector<molgnet::BatchedGraph>& prepared,
                        const std::vector<std::size_t>& rows,
                        const molgnet::MolGNetParams& params, const TaskHead& head,
                        const molgnet::MolGNetConfig& config, Readout readout) {
  std::vector<const molgnet::BatchedGraph*> parts;
  parts.reserve(rows.size());
  for (std::size_t r : rows) parts.push_back(&prepared[r]);
  molgnet::BatchedGraph merged = molgnet::merge_batches(parts);
  molgnet::ForwardOut out = molgnet::forward(merged, params, config);
  return nc::linear(readout_of(merged, out.node_states, readout), head.w, &head.b);
}

std::vector<std::vector<double>> scores_for(const std::vector<molgnet::BatchedGraph>& prepared,
                                            const std::vector<std::size_t>& rows,
                                            const molgnet::MolGNetParams& params,
                                            const TaskHead& head,
                                            const molgnet::MolGNetConfig& config,
                                            Readout readout) {
  std::vector<std::vector<double>> scores;
  scores.reserve(rows.size());
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < rows.size(); start += kChunk) {
    std::vector<std::size_t> chunk(rows.begin() + start,
                                   rows.begin() + std::min(rows.size(), start + kChunk));
    nc::Tensor logits = batch_logits(prepared, chunk, params, head, config, readout);
    const std::size_t arity = logits.row_size();
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      std::vector<double> row(arity);
      for (std::size_t j = 0; j < arity; ++j)
        row[j] = head.kind == TaskKind::Regression ? logits.at(i, j)
                                                   : nc::sigmoid_value(logits.at(i, j));
      scores.push_back(std::move(row));
    }
  }
  return scores;
}

double metric_for(const LabeledDataset& dataset, const std::vector<std::size_t>& rows,
                  const std::vector<std::vector<double>>& scores, TaskKind kind) {
  if (rows.empty()) throw DegenerateError("evaluate_split: empty split");
  const std::size_t arity = dataset.label_names.size();
  if (kind == TaskKind::Regression) {
    std::vector<double> preds, targets;
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < arity; ++j)
        if (dataset.rows[rows[i]].labels[j]) {
          preds.push_back(scores[i][j]);
          targets.push_back(*dataset.rows[rows[i]].labels[j]);
        }
    return rmse(preds, targets);
  }
  // mean AUC over label columns where both classes appear
  double total = 0.0;
  int usable = 0;
  for (std::size_t j = 0; j < arity; ++j) {
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (dataset.rows[rows[i]].labels[j]) {
        s.push_back(scores[i][j]);
        y.push_back(*dataset.rows[rows[i]].labels[j] != 0.0 ? 1 : 0);
      }
    const bool has_pos = std::count(y.begin(), y.end(), 1) > 0;
    const bool has_neg = std::count(y.begin(), y.end(), 0) > 0;
    if (!has_pos || !has_neg) continue;
    total += auc_roc(s, y);
    ++usable;
  }
  if (usable == 0) throw DegenerateError("evaluate_split: no label column has both classes");
  return total / usable;
}

void flatten_labels(const LabeledDataset& dataset, const std::vector<std::size_t>& rows,
                    std::vector<double>& targets, std::vector<double>& mask) {
  for (std::size_t r : rows)
    for (const auto& label : dataset.rows[r].labels) {
      targets.push_back(label.value_or(0.0));
      mask.push_back(label.has_value() ? 1.0 : 0.0);
    }
}

struct Snapshot {
  std::vector<std::vector<double>> values;
};

Snapshot snapshot_params(const std::vector<std::pair<std::string, nc::Tensor>>& named) {
  Snapshot s;
  for (const auto& [name, t] : named) s.values.push_back(t.vec());
  return s;
}

void restore_params(const std::vector<std::pair<std::string, nc::Tensor>>& named,
                    const Snapshot& s) {
  for (std::size_t i = 0; i < named.size(); ++i)
    const_cast<nc::Tensor&>(named[i].second).vec() = s.values[i];
}

}  // namespace

TaskHead TaskHead::init(TaskKind kind, int hidden, int arity, Rng& rng) {
  TaskHead head;
  head.kind = kind;
  head.w = molgnet::init_weight(arity, hidden, rng);
  head.b = molgnet::init_bias(arity);
  return head;
}

std::vector<std::pair<std::string, nc::Tensor>> TaskHead::named() const {
  return {{"head.w", w}, {"head.b", b}};
}

std::vector<std::vector<double>> predict(const LabeledDataset& dataset, Split split,
                                         const molgnet::MolGNetParams& params,
                                         const TaskHead& head,
                                         const molgnet::MolGNetConfig& config,
                                         Readout readout) {
  const auto prepared = prepare_rows(dataset, chem::FeatureVocab::standard());
  return scores_for(prepared, dataset.indices(split), params, head, config, readout);
}

double evaluate_split(const LabeledDataset& dataset, Split split,
                      const molgnet::MolGNetParams& params, const TaskHead& head,
                      const molgnet::MolGNetConfig& config, Readout readout) {
  const auto rows = dataset.indices(split);
  return metric_for(dataset, rows, predict(dataset, split, params, head, config, readout),
                    head.kind);
}

FinetuneResult finetune(const LabeledDataset& dataset, molgnet::MolGNetParams params,
                        const molgnet::MolGNetConfig& config,
                        const FinetuneOptions& options) {
  if (dataset.split.size() != dataset.rows.size())
    throw DataError("finetune: dataset has no split assignment");
  const auto& vocab = chem::FeatureVocab::standard();
  const int arity = static_cast<int>(dataset.label_names.size());
  Rng rng = Rng(options.seed).fork(21);
  TaskHead head = TaskHead::init(dataset.kind, config.hidden, arity, rng);

  const auto prepared = prepare_rows(dataset, vocab);
  auto train_rows = dataset.indices(Split::Train);
  const auto valid_rows = dataset.indices(Split::Valid);
  const auto test_rows = dataset.indices(Split::Test);
  if (train_rows.empty()) throw DataError("finetune: empty training split");

  std::vector<nc::Tensor> trainable = params.all();
  for (auto& [name, t] : head.named()) trainable.push_back(t);
  nc::Adam optimizer(trainable, options.adam);

  auto named_model = params.named();
  auto named_head = head.named();
  const bool maximize = dataset.kind != TaskKind::Regression;

  FinetuneResult result;
  Snapshot best_model = snapshot_params(named_model);
  Snapshot best_head = snapshot_params(named_head);
  result.best_val_metric = maximize ? -1.0 : std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    rng.shuffle(train_rows);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < train_rows.size();
         start += static_cast<std::size_t>(options.batch_size)) {
      std::vector<std::size_t> batch_rows(
          train_rows.begin() + start,
          train_rows.begin() +
              std::min(train_rows.size(), start + static_cast<std::size_t>(options.batch_size)));
      std::vector<double> targets, mask;
      flatten_labels(dataset, batch_rows, targets, mask);
      nc::Tensor loss;
      {
        nc::Tape tape;
        nc::Tensor logits =
            batch_logits(prepared, batch_rows, params, head, config, options.readout);
        loss = dataset.kind == TaskKind::Regression
                   ? nc::mse_masked(logits, targets, mask)
                   : nc::cross_entropy_logits_masked(logits, targets, mask);
        tape.backward(loss);
      }
      optimizer.step();
      optimizer.zero_grad();
      epoch_loss += loss.value();
      ++batches;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / std::max(batches, 1);
    stats.val_metric = metric_for(
        dataset, valid_rows,
        scores_for(prepared, valid_rows, params, head, config, options.readout), head.kind);
    result.history.push_back(stats);

    const bool improved = maximize ? stats.val_metric > result.best_val_metric
                                   : stats.val_metric < result.best_val_metric;
    if (improved) {
      result.best_val_metric = stats.val_metric;
      result.best_epoch = epoch;
      best_model = snapshot_params(named_model);
      best_head = snapshot_params(named_head);
    } else if (epoch - result.best_epoch >= options.patience) {
      break;
    }
  }

  restore_params(named_model, best_model);
  restore_params(named_head, best_head);
  result.test_metric = metric_for(
      dataset, test_rows,
      scores_for(prepared, test_rows, params, head, config, options.readout), head.kind);
  result.params = std::move(params);
  result.head = std::move(head);
  return result;
}

}  // namespace mpg::tasks
