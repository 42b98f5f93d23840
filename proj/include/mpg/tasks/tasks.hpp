// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mpg/ssl/ssl.hpp"

#include <optional>
#include <string>

namespace mpg::tasks {

class DegenerateError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// ---- datasets ---------------------------------------------------------------

enum class TaskKind { Binary, Multilabel, Regression };

struct LabeledRow {
  std::string smiles;
  std::string smiles2;  // empty unless the dataset is paired
  std::vector<std::optional<double>> labels;
};

enum class Split { Train = 0, Valid = 1, Test = 2 };

struct LabeledDataset {
  std::vector<std::string> label_names;
  std::vector<LabeledRow> rows;
  bool paired = false;
  TaskKind kind = TaskKind::Binary;
  std::vector<Split> split;  // parallel to rows once assign_splits ran

  std::vector<std::size_t> indices(Split s) const;
};

/// Tab-separated file with a header line: column "smiles" (plus "smiles_2"
/// for pair tasks), remaining columns are labels; empty cell = missing.
/// Task kind is inferred: all labels in {0,1} means classification
/// (multilabel when there is more than one label column), else regression.
LabeledDataset load_dataset(const std::string& path);
LabeledDataset dataset_from_rows(std::vector<std::string> label_names,
                                 std::vector<LabeledRow> rows, bool paired);

/// Seeded random split. Single-molecule tasks use 8:1:1, pair tasks 7:1:2.
void assign_splits(LabeledDataset& dataset, std::uint64_t seed);

// ---- batch assembly ---------------------------------------------------------

/// One molecule: all atoms under seg1 plus a collection node.
molgnet::BatchedGraph assemble_single(const chem::MolGraph& mol,
                                      const chem::FeatureVocab& vocab);

/// Molecule pair under seg1/seg2 with one collection node — the same shape
/// contract as PSD stitching, so pre-trained weights transfer unchanged.
molgnet::BatchedGraph assemble_pair(const chem::MolGraph& a, const chem::MolGraph& b,
                                    const chem::FeatureVocab& vocab);

// ---- metrics ----------------------------------------------------------------

/// Probability that a random positive outranks a random negative; ties count
/// half. Throws DegenerateError when a class is absent.
double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels);

double rmse(const std::vector<double>& predictions, const std::vector<double>& targets);

/// Area under the precision-recall step curve.
double prc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// F1 at the 0.5 threshold.
double f1(const std::vector<double>& scores, const std::vector<int>& labels);

/// Davies-Bouldin index over Euclidean geometry; lower is better separated.
double davies_bouldin(const std::vector<std::vector<double>>& points,
                      const std::vector<int>& cluster);

// ---- fine-tuning ------------------------------------------------------------

/// Randomly initialized linear classifier over the graph-level readout.
struct TaskHead {
  TaskKind kind = TaskKind::Binary;
  nc::Tensor w, b;
  static TaskHead init(TaskKind kind, int hidden, int arity, Rng& rng);
  std::vector<std::pair<std::string, nc::Tensor>> named() const;
};

enum class Readout { Collect, MeanNodes };

struct FinetuneOptions {
  int epochs = 40;
  int batch_size = 16;
  int patience = 10;
  std::uint64_t seed = 7;
  nc::AdamConfig adam = {1e-4, 0.9, 0.999, 1e-8};
  Readout readout = Readout::Collect;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
};

struct FinetuneResult {
  molgnet::MolGNetParams params;
  TaskHead head;
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_val_metric = 0.0;
  double test_metric = 0.0;
};

/// Trains model plus fresh head with the task loss, tracks the validation
/// metric (AUC-ROC for classification, RMSE for regression), stops after
/// `patience` epochs without improvement, and returns the best-validation
/// parameters along with the test metric at that point.
FinetuneResult finetune(const LabeledDataset& dataset, molgnet::MolGNetParams params,
                        const molgnet::MolGNetConfig& config, const FinetuneOptions& options);

/// Scores for one split under frozen parameters; rows with any missing label
/// contribute only their present labels.
std::vector<std::vector<double>> predict(const LabeledDataset& dataset, Split split,
                                         const molgnet::MolGNetParams& params,
                                         const TaskHead& head,
                                         const molgnet::MolGNetConfig& config,
                                         Readout readout);

/// Validation/test metric for a split: mean per-label AUC-ROC (classification)
/// or RMSE (regression).
double evaluate_split(const LabeledDataset& dataset, Split split,
                      const molgnet::MolGNetParams& params, const TaskHead& head,
                      const molgnet::MolGNetConfig& config, Readout readout);

// ---- embedding analyses -----------------------------------------------------

/// Collection embeddings of each molecule under frozen parameters.
std::vector<std::vector<double>> embed_molecules(const std::vector<chem::MolGraph>& mols,
                                                 const molgnet::MolGNetParams& params,
                                                 const molgnet::MolGNetConfig& config);

struct ValiditySeparation {
  double db_untrained = 0.0;
  double db_pretrained = 0.0;
};

/// Valid set versus feature-shuffled copies, embedded under both parameter
/// sets; returns the two Davies-Bouldin indexes.
ValiditySeparation validity_separation_experiment(
    const std::vector<chem::MolGraph>& corpus, const molgnet::MolGNetParams& untrained,
    const molgnet::MolGNetParams& pretrained, const molgnet::MolGNetConfig& config,
    std::uint64_t shuffle_seed);

}  // namespace mpg::tasks
