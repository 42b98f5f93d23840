// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Each test case prints one PASS/FAIL line. Pre-trained
// models are cached on disk under ./acceptance_cache so the later criteria
// reuse the runs made by the earlier ones.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mpg/cli/checkpoint.hpp"
#include "mpg/cli/commands.hpp"
#include "mpg/cli/gradcheck_suite.hpp"
#include "mpg/ssl/ssl.hpp"
#include "mpg/tasks/tasks.hpp"
#include "support/corpora.hpp"
#include "support/naive_molgnet.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

using namespace mpg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCacheTag = "v3";

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.3g", v);
  return buffer;
}

void report(const std::string& criterion, bool pass, const std::string& detail) {
  std::cout << "ACCEPTANCE " << criterion << " " << (pass ? "PASS" : "FAIL") << " — "
            << detail << std::endl;
}

molgnet::MolGNetConfig desk_config() {
  return molgnet::MolGNetConfig{};  // N=3, T=2, d=64, d_ff=256, K=4
}

const chem::FeatureVocab& vocab() { return chem::FeatureVocab::standard(); }

std::vector<chem::MolGraph> parse_all(const std::vector<std::string>& smiles) {
  std::vector<chem::MolGraph> out;
  out.reserve(smiles.size());
  for (const auto& s : smiles) out.push_back(chem::parse_smiles(s));
  return out;
}

molgnet::BatchedGraph bare_batch(const chem::MolGraph& mol) {
  molgnet::BatchBuilder builder(vocab());
  builder.begin_graph();
  builder.add_fragment(mol, molgnet::kSeg1);
  return builder.finish();
}

struct Pretrained {
  molgnet::MolGNetParams params;
  ssl::PsdHead psd_head;
  ssl::MaskHead mask_head;
  double held_out_psd_acc = 0.0;
  double held_out_mask_acc = 0.0;
  double elapsed_seconds = 0.0;
};

ssl::PretrainOptions accept_options(std::uint64_t seed) {
  ssl::PretrainOptions options;
  options.steps = 300;
  options.batch_size = 64;
  options.seed = seed;
  return options;
}

fs::path cache_path(std::uint64_t seed) {
  fs::create_directories("acceptance_cache");
  return fs::path("acceptance_cache") /
         ("pretrained_" + std::string(kCacheTag) + "_seed" + std::to_string(seed) + ".ckpt");
}

// 300 joint steps on the 200-molecule two-family corpus, desk configuration
Pretrained& pretrained_model(std::uint64_t seed) {
  static std::map<std::uint64_t, Pretrained> memo;
  auto found = memo.find(seed);
  if (found != memo.end()) return found->second;

  const molgnet::MolGNetConfig config = desk_config();
  Rng init_rng = Rng(seed).fork(0);
  Pretrained entry{molgnet::MolGNetParams::init(config, init_rng),
                   ssl::PsdHead::init(config.hidden, init_rng),
                   ssl::MaskHead::init(config.hidden, chem::kElementCount, init_rng)};

  const fs::path path = cache_path(seed);
  if (fs::exists(path)) {
    cli::Checkpoint checkpoint = cli::load_checkpoint(path.string());
    auto named = entry.params.named();
    for (auto& [n, t] : entry.psd_head.named()) named.emplace_back(n, t);
    for (auto& [n, t] : entry.mask_head.named()) named.emplace_back(n, t);
    cli::load_into(checkpoint, named);
    const json j = json::parse(checkpoint.config_json);
    entry.held_out_psd_acc = j["held_out_psd_acc"];
    entry.held_out_mask_acc = j["held_out_mask_acc"];
    entry.elapsed_seconds = j["elapsed_seconds"];
  } else {
    const auto corpus = parse_all(testsupport::toy_corpus(200));
    const auto start = std::chrono::steady_clock::now();
    ssl::PretrainResult result = ssl::pretrain(corpus, entry.params, entry.psd_head,
                                               entry.mask_head, config,
                                               accept_options(seed));
    entry.elapsed_seconds = seconds_since(start);
    entry.held_out_psd_acc = result.held_out.psd_accuracy;
    entry.held_out_mask_acc = result.held_out.mask_accuracy;

    cli::Checkpoint checkpoint;
    json j;
    j["held_out_psd_acc"] = entry.held_out_psd_acc;
    j["held_out_mask_acc"] = entry.held_out_mask_acc;
    j["elapsed_seconds"] = entry.elapsed_seconds;
    j["seed"] = seed;
    checkpoint.config_json = j.dump();
    checkpoint.step = 300;
    checkpoint.params = entry.params.named();
    for (auto& [n, t] : entry.psd_head.named()) checkpoint.params.emplace_back(n, t);
    for (auto& [n, t] : entry.mask_head.named()) checkpoint.params.emplace_back(n, t);
    cli::save_checkpoint(path.string(), checkpoint);
  }
  return memo.emplace(seed, std::move(entry)).first->second;
}

// Separable but not additively decodable: the label is the XOR of the marker
// attribute and the family attribute, so neither heteroatom counts nor ring
// flags alone carry any signal — the readout must expose their interaction.
tasks::LabeledDataset xor_dataset(int count) {
  const auto smiles = testsupport::toy_corpus(count);
  std::vector<tasks::LabeledRow> rows;
  for (int i = 0; i < count; ++i) {
    tasks::LabeledRow row;
    row.smiles = smiles[i];
    const bool is_n = testsupport::toy_marker(i) == 0;
    const bool is_ring = testsupport::toy_family(i) == 0;
    row.labels.push_back(is_n != is_ring ? 1.0 : 0.0);
    rows.push_back(std::move(row));
  }
  return tasks::dataset_from_rows({"xor"}, std::move(rows), false);
}

// first epoch reaching the AUC bar, or cap + 1 when never reached
int epochs_to_auc(const tasks::FinetuneResult& result, double bar, int cap) {
  for (const auto& stats : result.history)
    if (stats.val_metric >= bar) return stats.epoch;
  return cap + 1;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

TEST_CASE("c1 gradient oracle over every op and the full model") {
  const auto start = std::chrono::steady_clock::now();
  auto result = cli::run_gradcheck_suite(desk_config(), 2025, 1e-4, 12);
  const double elapsed = seconds_since(start);
  std::size_t coords = 0;
  for (const auto& [name, rep] : result.checks)
    for (const auto& entry : rep.entries) coords += entry.coords_checked;
  const bool pass = result.passed() && elapsed < 300.0;
  report("c1", pass,
         "worst rel err " + fmt(result.worst()) + " over " +
             std::to_string(result.checks.size()) + " checks / " + std::to_string(coords) +
             " coords in " + fmt(elapsed) + "s (tol 1e-4, limit 300s)");
  for (const auto& [name, rep] : result.checks) {
    CAPTURE(name);
    CHECK(rep.passed(1e-4));
  }
  CHECK(elapsed < 300.0);
}

TEST_CASE("c2 naive oracle equivalence on 50 random graphs") {
  const auto start = std::chrono::steady_clock::now();
  const molgnet::MolGNetConfig config = desk_config();
  Rng prng(4242);
  molgnet::MolGNetParams params = molgnet::MolGNetParams::init(config, prng);

  int tested = 0;
  double worst = 0.0;
  for (const auto& smiles : testsupport::random_smiles_corpus(600, 777)) {
    if (tested >= 50) break;
    chem::MolGraph mol = chem::parse_smiles(smiles);
    if (mol.atom_count() > 8 || mol.atom_count() < 2) continue;
    ++tested;
    molgnet::BatchedGraph batch =
        tested % 2 ? tasks::assemble_single(mol, vocab()) : bare_batch(mol);
    auto out = molgnet::forward(batch, params, config);
    auto naive = testsupport::naive_forward(batch, params, config);
    for (int i = 0; i < batch.n_nodes(); ++i)
      for (int j = 0; j < config.hidden; ++j)
        worst = std::max(worst, std::abs(out.node_states.at(i, j) - naive[i][j]));
  }
  const double elapsed = seconds_since(start);
  const bool pass = tested == 50 && worst <= 1e-10 && elapsed < 60.0;
  report("c2", pass,
         "max deviation " + fmt(worst) + " over " + std::to_string(tested) +
             " graphs in " + fmt(elapsed) + "s (tol 1e-10, limit 60s)");
  CHECK(tested == 50);
  CHECK(worst <= 1e-10);
  CHECK(elapsed < 60.0);
}

TEST_CASE("c3 collection node leaves ordinary states bitwise unchanged") {
  const molgnet::MolGNetConfig config = desk_config();
  Rng prng(3333);
  molgnet::MolGNetParams params = molgnet::MolGNetParams::init(config, prng);
  int tested = 0, identical = 0;
  for (const auto& smiles : testsupport::random_smiles_corpus(80, 888)) {
    if (tested >= 20) break;
    chem::MolGraph mol = chem::parse_smiles(smiles);
    if (mol.atom_count() < 2) continue;
    ++tested;
    auto with = molgnet::forward(tasks::assemble_single(mol, vocab()), params, config);
    auto without = molgnet::forward(bare_batch(mol), params, config);
    bool same = true;
    for (int i = 0; i < mol.atom_count(); ++i)
      for (int j = 0; j < config.hidden; ++j)
        same = same && with.node_states.at(i, j) == without.node_states.at(i, j);
    identical += same;
  }
  const bool pass = tested == 20 && identical == 20;
  report("c3", pass,
         std::to_string(identical) + "/" + std::to_string(tested) +
             " graphs bitwise identical after removing the collection node");
  CHECK(tested == 20);
  CHECK(identical == tested);
}

TEST_CASE("c4 decomposition borders and negative sampling rate") {
  Rng rng(4444);
  int draws = 0;
  bool borders_ok = true;
  while (draws < 10000) {
    const int n = 3 + draws % 28;  // covers {3..30}
    chem::MolGraph mol = chem::parse_smiles(std::string(n, 'C'));
    auto [left, right] = ssl::decompose(mol, rng, 0);
    const int b = left.graph.atom_count();
    borders_ok = borders_ok && b >= (n + 2) / 3 && b <= (2 * n) / 3;
    ++draws;
  }

  const auto corpus = parse_all(testsupport::toy_corpus(40));
  Rng label_rng(4545);
  int negatives = 0;
  for (int i = 0; i < 10000; ++i)
    negatives +=
        ssl::make_psd_sample(corpus, i % corpus.size(), label_rng).label == 0;
  const double rate = negatives / 10000.0;
  const bool pass = borders_ok && rate >= 0.48 && rate <= 0.52;
  report("c4", pass,
         "10000 borders in range: " + std::string(borders_ok ? "yes" : "no") +
             ", negative rate " + fmt(rate) + " (target [0.48, 0.52])");
  CHECK(borders_ok);
  CHECK(rate >= 0.48);
  CHECK(rate <= 0.52);
}

TEST_CASE("c5 desk-scale pre-training reaches the accuracy bars") {
  const Pretrained& model = pretrained_model(11);
  const bool pass = model.held_out_psd_acc >= 0.85 && model.held_out_mask_acc >= 0.60 &&
                    model.elapsed_seconds < 900.0;
  report("c5", pass,
         "held-out psd_acc " + fmt(model.held_out_psd_acc) + " (>= 0.85), mask_acc " +
             fmt(model.held_out_mask_acc) + " (>= 0.60), " +
             fmt(model.elapsed_seconds) + "s (< 900s)");
  CHECK(model.held_out_psd_acc >= 0.85);
  CHECK(model.held_out_mask_acc >= 0.60);
  CHECK(model.elapsed_seconds < 900.0);
}

TEST_CASE("c6 validity separation improves with pre-training") {
  const molgnet::MolGNetConfig config = desk_config();
  const auto corpus = parse_all(testsupport::toy_corpus(100));
  int improved = 0;
  std::string detail;
  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    const Pretrained& model = pretrained_model(seed);
    Rng untrained_rng = Rng(seed + 500).fork(0);
    molgnet::MolGNetParams untrained = molgnet::MolGNetParams::init(config, untrained_rng);
    auto result = tasks::validity_separation_experiment(corpus, untrained, model.params,
                                                        config, seed);
    improved += result.db_pretrained < result.db_untrained;
    detail += "seed " + std::to_string(seed) + ": " + fmt(result.db_untrained) +
              " -> " + fmt(result.db_pretrained) + "  ";
  }
  const bool pass = improved == 3;
  report("c6", pass, detail + "(" + std::to_string(improved) + "/3 improved)");
  CHECK(improved == 3);
}

TEST_CASE("c7 pre-training reaches 0.9 AUC in fewer epochs") {
  const molgnet::MolGNetConfig config = desk_config();
  tasks::LabeledDataset dataset = xor_dataset(200);
  const int cap = 20;
  std::vector<int> pre_epochs, rand_epochs;
  std::string detail;
  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    tasks::assign_splits(dataset, seed);
    tasks::FinetuneOptions options;
    options.epochs = cap;
    options.patience = cap;
    options.batch_size = 16;
    options.seed = seed;
    options.adam.lr = 1e-3;  // same schedule for both arms

    auto pre = tasks::finetune(dataset, pretrained_model(seed).params.clone(), config, options);
    Rng rand_rng = Rng(seed + 900).fork(0);
    auto rnd = tasks::finetune(dataset, molgnet::MolGNetParams::init(config, rand_rng),
                               config, options);
    pre_epochs.push_back(epochs_to_auc(pre, 0.9, cap));
    rand_epochs.push_back(epochs_to_auc(rnd, 0.9, cap));
    detail += "seed " + std::to_string(seed) + ": pre " + std::to_string(pre_epochs.back()) +
              " vs rand " + std::to_string(rand_epochs.back()) + "  ";
  }
  std::sort(pre_epochs.begin(), pre_epochs.end());
  std::sort(rand_epochs.begin(), rand_epochs.end());
  const int pre_median = pre_epochs[1];
  const int rand_median = rand_epochs[1];
  const bool pass = pre_median < rand_median;
  report("c7", pass,
         detail + "median " + std::to_string(pre_median) + " vs " +
             std::to_string(rand_median) + " epochs to 0.9 AUC (cap " + std::to_string(cap) +
             ", cap+1 = never)");
  CHECK(pre_median < rand_median);
}

TEST_CASE("c8 metric oracles") {
  Rng rng(8888);
  bool auc_exact = true;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = std::round(rng.uniform() * 10.0) / 10.0;
      labels[i] = rng.uniform() < 0.5 ? 1 : 0;
      (labels[i] ? pos : neg) = true;
    }
    if (!pos) labels[0] = 1;
    if (!neg) labels[n - 1] = 0;
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (labels[i] == 0 || labels[j] != 0) continue;
        pairs += 1.0;
        wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
      }
    auc_exact = auc_exact && tasks::auc_roc(scores, labels) == wins / pairs;
  }

  const bool rmse_ok = std::abs(tasks::rmse({0, 0}, {3, 4}) - std::sqrt(12.5)) < 1e-9;
  const bool f1_ok = std::abs(tasks::f1({0.9, 0.8, 0.1}, {1, 0, 0}) - 2.0 / 3.0) < 1e-9;
  const bool prc_ok =
      std::abs(tasks::prc_auc({0.9, 0.8, 0.7}, {1, 0, 1}) - (0.5 + 1.0 / 3.0)) < 1e-9 &&
      std::abs(tasks::prc_auc({0.9, 0.2, 0.1}, {1, 0, 0}) - 1.0) < 1e-9;
  const bool db_ok =
      std::abs(tasks::davies_bouldin({{-1.5}, {-0.5}, {0.5}, {1.5}}, {0, 0, 1, 1}) - 0.5) <
      1e-9;
  const bool pass = auc_exact && rmse_ok && f1_ok && prc_ok && db_ok;
  report("c8", pass,
         std::string("auc exact on 100 datasets: ") + (auc_exact ? "yes" : "no") +
             ", fixtures (rmse/f1/prc/db) to 1e-9: " +
             (rmse_ok && f1_ok && prc_ok && db_ok ? "yes" : "no"));
  CHECK(auc_exact);
  CHECK(rmse_ok);
  CHECK(f1_ok);
  CHECK(prc_ok);
  CHECK(db_ok);
}

TEST_CASE("c9 parser corpus, mutants, and valence fixtures") {
  const auto corpus = testsupport::random_smiles_corpus(500, 2024);
  int parsed = 0;
  for (const auto& smiles : corpus) {
    try {
      chem::parse_smiles(smiles);
      ++parsed;
    } catch (const std::exception&) {
    }
  }
  const auto invalid = testsupport::mutated_invalid(corpus, 100, 77);
  int rejected = 0;
  for (const auto& smiles : invalid) {
    try {
      chem::parse_smiles(smiles, false);
    } catch (const chem::SyntaxError&) {
      ++rejected;
    }
  }
  const auto& fixtures = testsupport::overvalence_fixtures();
  int flagged = 0;
  for (const auto& smiles : fixtures) {
    try {
      chem::parse_smiles(smiles);
    } catch (const chem::ValenceError&) {
      ++flagged;
    }
  }
  const bool pass = parsed == 500 && rejected == 100 &&
                    flagged == static_cast<int>(fixtures.size()) && fixtures.size() == 50;
  report("c9", pass,
         std::to_string(parsed) + "/500 parsed, " + std::to_string(rejected) +
             "/100 mutants rejected, " + std::to_string(flagged) + "/" +
             std::to_string(fixtures.size()) + " over-valence fixtures flagged");
  CHECK(parsed == 500);
  CHECK(rejected == 100);
  CHECK(flagged == static_cast<int>(fixtures.size()));
  CHECK(fixtures.size() == 50);
}

TEST_CASE("c10 identical CLI invocations are bitwise identical") {
  fs::create_directories("acceptance_cache");
  const fs::path corpus = "acceptance_cache/c10_corpus.smi";
  {
    std::ofstream out(corpus);
    for (const auto& s : testsupport::toy_corpus(60)) out << s << "\n";
  }
  const std::string ckpt = "acceptance_cache/c10_run.ckpt";
  const std::string log = "acceptance_cache/c10_run.jsonl";
  const std::string invocation = std::string(MPG_CLI_PATH) +
                                 " pretrain --corpus " + corpus.string() + " --out " + ckpt +
                                 " --log " + log +
                                 " --steps 25 --batch-size 8 --seed 5 > /dev/null";
  REQUIRE(WEXITSTATUS(std::system(invocation.c_str())) == 0);
  const std::string ckpt_once = read_file(ckpt);
  const std::string log_once = read_file(log);
  fs::remove(ckpt);
  fs::remove(log);
  REQUIRE(WEXITSTATUS(std::system(invocation.c_str())) == 0);
  const bool ckpt_same = read_file(ckpt) == ckpt_once;
  const bool log_same = read_file(log) == log_once;
  const bool pass = ckpt_same && log_same;
  report("c10", pass,
         std::string("checkpoint bytes identical: ") + (ckpt_same ? "yes" : "no") +
             ", metrics log identical: " + (log_same ? "yes" : "no"));
  CHECK(ckpt_same);
  CHECK(log_same);
}
