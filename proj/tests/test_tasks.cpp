// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mpg/tasks/tasks.hpp"
#include "support/corpora.hpp"

#include <cmath>
#include <fstream>

using namespace mpg;
using tasks::Split;
using tasks::TaskKind;

namespace {

const chem::FeatureVocab& vocab() { return chem::FeatureVocab::standard(); }

molgnet::MolGNetConfig tiny_config() {
  molgnet::MolGNetConfig config;
  config.n_layers = 1;
  config.steps_per_layer = 1;
  config.hidden = 16;
  config.ffn = 32;
  config.heads = 2;
  return config;
}

// exhaustive pair counting, the independent AUC oracle
double auc_by_pairs(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[i] == 0 || labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  return wins / pairs;
}

tasks::LabeledDataset toy_dataset(int n, bool marker_task = true) {
  const auto smiles = testsupport::toy_corpus(n);
  std::vector<tasks::LabeledRow> rows;
  for (int i = 0; i < n; ++i) {
    tasks::LabeledRow row;
    row.smiles = smiles[i];
    const int label = marker_task ? (testsupport::toy_marker(i) == 0 ? 1 : 0)
                                  : testsupport::toy_family(i);
    row.labels.push_back(static_cast<double>(label));
    rows.push_back(std::move(row));
  }
  return tasks::dataset_from_rows({"label"}, std::move(rows), false);
}

}  // namespace

TEST_CASE("auc_roc") {
  CHECK(tasks::auc_roc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == doctest::Approx(0.75));
  CHECK(tasks::auc_roc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
  CHECK(tasks::auc_roc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(tasks::auc_roc({0.1, 0.2}, {1, 1}), tasks::DegenerateError);

  SUBCASE("matches exhaustive pair counting exactly") {
    Rng rng(2025);
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t n = 2 + rng.below(49);
      std::vector<double> scores(n);
      std::vector<int> labels(n);
      bool pos = false, neg = false;
      for (std::size_t i = 0; i < n; ++i) {
        scores[i] = std::round(rng.uniform() * 8.0) / 8.0;  // force ties
        labels[i] = rng.uniform() < 0.5 ? 1 : 0;
        (labels[i] ? pos : neg) = true;
      }
      if (!pos) labels[0] = 1;
      if (!neg) labels[n - 1] = 0;
      CHECK(tasks::auc_roc(scores, labels) == auc_by_pairs(scores, labels));
    }
  }

  SUBCASE("invariant under strictly monotone transforms") {
    Rng rng(4);
    std::vector<double> scores(30);
    std::vector<int> labels(30);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      scores[i] = rng.uniform(-2, 2);
      labels[i] = i % 3 == 0 ? 1 : 0;
    }
    std::vector<double> warped(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
      warped[i] = std::exp(3.0 * scores[i]) + 7.0;
    CHECK(tasks::auc_roc(scores, labels) == doctest::Approx(tasks::auc_roc(warped, labels)));
  }
}

TEST_CASE("rmse f1 prc_auc") {
  CHECK(tasks::rmse({0, 0}, {3, 4}) == doctest::Approx(std::sqrt(12.5)));
  CHECK(tasks::rmse({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(tasks::f1({1, 0, 1, 0}, {1, 0, 1, 0}) == 1.0);
  CHECK(tasks::f1({0.9, 0.8, 0.1}, {1, 0, 0}) == doctest::Approx(2.0 / 3.0));
  CHECK(tasks::prc_auc({0.9, 0.2, 0.1}, {1, 0, 0}) == 1.0);
  // two positives, one interloper: precision steps 1, then 2/3 at full recall
  CHECK(tasks::prc_auc({0.9, 0.8, 0.7}, {1, 0, 1}) ==
        doctest::Approx(0.5 * 1.0 + 0.5 * (2.0 / 3.0)));
  CHECK_THROWS_AS(tasks::prc_auc({0.5}, {0}), tasks::DegenerateError);
  CHECK(tasks::f1({0.9, 0.8}, {0, 0}) == 0.0);  // false positives, no hits
}

TEST_CASE("davies_bouldin") {
  SUBCASE("hand-computed 1-D pair of clusters") {
    const std::vector<std::vector<double>> points = {{-1.5}, {-0.5}, {0.5}, {1.5}};
    const std::vector<int> cluster = {0, 0, 1, 1};
    CHECK(tasks::davies_bouldin(points, cluster) == doctest::Approx(0.5));
  }
  SUBCASE("tight far clusters score near zero") {
    const std::vector<std::vector<double>> points = {
        {0.0, 0.001}, {0.0, -0.001}, {100.0, 0.001}, {100.0, -0.001}};
    CHECK(tasks::davies_bouldin(points, {0, 0, 1, 1}) < 1e-4);
  }
  SUBCASE("coincident centroids are degenerate") {
    const std::vector<std::vector<double>> points = {{1.0}, {-1.0}, {1.0}, {-1.0}};
    CHECK_THROWS_AS(tasks::davies_bouldin(points, {0, 0, 1, 1}), tasks::DegenerateError);
  }
  SUBCASE("needs two clusters") {
    CHECK_THROWS_AS(tasks::davies_bouldin({{1.0}, {2.0}}, {0, 0}), tasks::DegenerateError);
  }
}

TEST_CASE("assembly") {
  molgnet::MolGNetConfig config = tiny_config();
  Rng rng(7);
  molgnet::MolGNetParams params = molgnet::MolGNetParams::init(config, rng);

  SUBCASE("single molecule counts") {
    chem::MolGraph mol = chem::parse_smiles("CCCCO");
    molgnet::BatchedGraph batch = tasks::assemble_single(mol, vocab());
    CHECK(batch.n_nodes() == 6);
    int virtual_arcs = 0;
    for (const auto& arc : batch.arcs) virtual_arcs += arc.is_virtual;
    CHECK(virtual_arcs == 5);
    CHECK(batch.n_arcs() == 5 + 2 * mol.bond_count());
    for (int i = 0; i < 5; ++i) CHECK(batch.node_seg[i] == molgnet::kSeg1);
    CHECK_NOTHROW(batch.validate());
  }

  SUBCASE("pair counts and segment split") {
    chem::MolGraph a = chem::parse_smiles("CCC");
    chem::MolGraph b = chem::parse_smiles("CCCO");
    molgnet::BatchedGraph batch = tasks::assemble_pair(a, b, vocab());
    CHECK(batch.n_nodes() == 8);
    int virtual_arcs = 0;
    for (const auto& arc : batch.arcs) virtual_arcs += arc.is_virtual;
    CHECK(virtual_arcs == 7);
    molgnet::BatchedGraph swapped = tasks::assemble_pair(b, a, vocab());
    // same multiset of features, only segment assignments move
    CHECK(batch.node_seg[0] == molgnet::kSeg1);
    CHECK(swapped.node_seg[0] == molgnet::kSeg1);
    CHECK(batch.node_feats[0] == swapped.node_feats[4]);

    auto fwd = molgnet::forward(batch, params, config);
    auto fwd_swapped = molgnet::forward(swapped, params, config);
    auto ca = molgnet::collection_embedding(batch, fwd.node_states);
    auto cb = molgnet::collection_embedding(swapped, fwd_swapped.node_states);
    double delta = 0.0;
    for (int j = 0; j < config.hidden; ++j)
      delta = std::max(delta, std::abs(ca.at(0, j) - cb.at(0, j)));
    CHECK(delta > 1e-9);  // segment embeddings are live inputs
  }
}

TEST_CASE("dataset loading and splits") {
  const std::string path = "test_dataset.tsv";
  {
    std::ofstream out(path);
    out << "smiles\ttox\tsol\n";
    out << "CCO\t1\t0\n";
    out << "CCC\t0\t\n";
    out << "CCN\t1\t1\n";
    out << "CCCC\t\t0\n";
    out << "CCOC\t0\t1\n";
    out << "CCCO\t1\t0\n";
    out << "CCCN\t0\t1\n";
    out << "CC(C)C\t1\t\n";
    out << "CC(C)O\t0\t0\n";
    out << "CC(C)N\t1\t1\n";
  }
  tasks::LabeledDataset ds = tasks::load_dataset(path);
  CHECK(ds.kind == TaskKind::Multilabel);
  CHECK(ds.label_names == std::vector<std::string>{"tox", "sol"});
  CHECK(ds.rows.size() == 10);
  CHECK_FALSE(ds.rows[1].labels[1].has_value());
  CHECK(ds.rows[0].labels[0].value() == 1.0);

  tasks::assign_splits(ds, 3);
  CHECK(ds.indices(Split::Train).size() == 8);
  CHECK(ds.indices(Split::Valid).size() == 1);
  CHECK(ds.indices(Split::Test).size() == 1);

  SUBCASE("regression kind inferred from real labels") {
    std::vector<tasks::LabeledRow> rows;
    for (int i = 0; i < 6; ++i) {
      tasks::LabeledRow row;
      row.smiles = "CCO";
      row.labels.push_back(0.5 * i);
      rows.push_back(row);
    }
    auto reg = tasks::dataset_from_rows({"y"}, rows, false);
    CHECK(reg.kind == TaskKind::Regression);
  }

  SUBCASE("pair dataset detection") {
    const std::string pair_path = "test_pairs.tsv";
    {
      std::ofstream out(pair_path);
      out << "smiles\tsmiles_2\tinteracts\n";
      for (int i = 0; i < 20; ++i)
        out << "CCO\tCCN\t" << i % 2 << "\n";
    }
    tasks::LabeledDataset pairs = tasks::load_dataset(pair_path);
    CHECK(pairs.paired);
    CHECK(pairs.kind == TaskKind::Binary);
    tasks::assign_splits(pairs, 9);
    CHECK(pairs.indices(Split::Train).size() == 14);  // 7:1:2
    CHECK(pairs.indices(Split::Valid).size() == 2);
    CHECK(pairs.indices(Split::Test).size() == 4);
  }

  SUBCASE("header must start with smiles") {
    const std::string bad_path = "test_bad.tsv";
    {
      std::ofstream out(bad_path);
      out << "mol\ty\nCCO\t1\n";
    }
    CHECK_THROWS_AS(tasks::load_dataset(bad_path), tasks::DataError);
  }
}

TEST_CASE("finetune fits a constant regression target") {
  molgnet::MolGNetConfig config = tiny_config();
  std::vector<tasks::LabeledRow> rows;
  const auto smiles = testsupport::toy_corpus(40);
  for (const auto& s : smiles) {
    tasks::LabeledRow row;
    row.smiles = s;
    row.labels.push_back(0.7);
    rows.push_back(row);
  }
  tasks::LabeledDataset ds = tasks::dataset_from_rows({"y"}, std::move(rows), false);
  tasks::assign_splits(ds, 11);

  Rng rng(13);
  molgnet::MolGNetParams params = molgnet::MolGNetParams::init(config, rng);
  tasks::FinetuneOptions options;
  options.epochs = 30;
  options.patience = 30;
  options.batch_size = 8;
  options.seed = 11;
  options.adam.lr = 1e-2;
  auto result = tasks::finetune(ds, std::move(params), config, options);
  CHECK(result.test_metric < 0.05);
  CHECK(result.history.front().val_metric > result.best_val_metric);
}

TEST_CASE("finetune improves on the marker task") {
  molgnet::MolGNetConfig config = tiny_config();
  tasks::LabeledDataset ds = toy_dataset(60);
  tasks::assign_splits(ds, 17);
  Rng rng(19);
  molgnet::MolGNetParams params = molgnet::MolGNetParams::init(config, rng);
  tasks::FinetuneOptions options;
  options.epochs = 12;
  options.patience = 12;
  options.batch_size = 8;
  options.seed = 17;
  options.adam.lr = 3e-3;
  auto result = tasks::finetune(ds, std::move(params), config, options);
  CHECK(result.history.back().train_loss < result.history.front().train_loss);
  CHECK(result.best_val_metric >= 0.5);
  CHECK(result.test_metric >= 0.0);
  CHECK(result.test_metric <= 1.0);
}

TEST_CASE("finetune handles pair input") {
  molgnet::MolGNetConfig config = tiny_config();
  const auto smiles = testsupport::toy_corpus(120);
  std::vector<tasks::LabeledRow> rows;
  for (int k = 0; k < 60; ++k) {
    // even k pairs molecules six apart (same marker), odd k three apart
    const int j = (k + (k % 2 == 0 ? 6 : 3)) % 120;
    tasks::LabeledRow row;
    row.smiles = smiles[k];
    row.smiles2 = smiles[j];
    row.labels.push_back(
        testsupport::toy_marker(k) == testsupport::toy_marker(j) ? 1.0 : 0.0);
    rows.push_back(std::move(row));
  }
  tasks::LabeledDataset ds = tasks::dataset_from_rows({"match"}, std::move(rows), true);
  tasks::assign_splits(ds, 31);
  CHECK(ds.indices(tasks::Split::Test).size() == 12);  // 7:1:2 on 60 rows
  Rng rng(31);
  molgnet::MolGNetParams params = molgnet::MolGNetParams::init(config, rng);
  tasks::FinetuneOptions options;
  options.epochs = 3;
  options.patience = 3;
  options.batch_size = 8;
  options.seed = 31;
  auto result = tasks::finetune(ds, std::move(params), config, options);
  CHECK(result.test_metric >= 0.0);
  CHECK(result.test_metric <= 1.0);
  CHECK(result.history.size() == 3);
}

TEST_CASE("embedding determinism and shape") {
  molgnet::MolGNetConfig config = tiny_config();
  Rng rng(23);
  molgnet::MolGNetParams params = molgnet::MolGNetParams::init(config, rng);
  std::vector<chem::MolGraph> mols;
  for (const auto& s : testsupport::toy_corpus(10)) mols.push_back(chem::parse_smiles(s));
  auto a = tasks::embed_molecules(mols, params, config);
  auto b = tasks::embed_molecules(mols, params, config);
  CHECK(a == b);
  CHECK(a.size() == 10);
  CHECK(a[0].size() == static_cast<std::size_t>(config.hidden));
}

TEST_CASE("validity separation identical parameters give identical indexes") {
  molgnet::MolGNetConfig config = tiny_config();
  Rng rng(29);
  molgnet::MolGNetParams params = molgnet::MolGNetParams::init(config, rng);
  std::vector<chem::MolGraph> corpus;
  for (const auto& s : testsupport::toy_corpus(100)) corpus.push_back(chem::parse_smiles(s));
  auto result = tasks::validity_separation_experiment(corpus, params, params, config, 31);
  CHECK(result.db_untrained == result.db_pretrained);
  CHECK(result.db_untrained >= 0.0);
}
