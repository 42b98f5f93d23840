// SPDX-License-Identifier: Apache-2.0
#include "mpg/tasks/tasks.hpp"

#include <fstream>
#include <sstream>

namespace mpg::tasks {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, '\t')) out.push_back(field);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}

TaskKind infer_kind(const std::vector<LabeledRow>& rows, std::size_t n_labels) {
  bool all_binary = true;
  for (const auto& row : rows)
    for (const auto& label : row.labels)
      if (label && *label != 0.0 && *label != 1.0) all_binary = false;
  if (!all_binary) return TaskKind::Regression;
  return n_labels > 1 ? TaskKind::Multilabel : TaskKind::Binary;
}

}  // namespace

std::vector<std::size_t> LabeledDataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

LabeledDataset dataset_from_rows(std::vector<std::string> label_names,
                                 std::vector<LabeledRow> rows, bool paired) {
  if (rows.empty()) throw DataError("dataset has no rows");
  for (const auto& row : rows)
    if (row.labels.size() != label_names.size())
      throw DataError("dataset row label arity differs from header");
  LabeledDataset ds;
  ds.label_names = std::move(label_names);
  ds.paired = paired;
  ds.kind = infer_kind(rows, ds.label_names.size());
  ds.rows = std::move(rows);
  return ds;
}

LabeledDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset file is empty: " + path);
  const auto header = split_tabs(line);
  if (header.empty() || header[0] != "smiles")
    throw DataError("dataset header must start with 'smiles'");
  std::size_t first_label = 1;
  bool paired = false;
  if (header.size() > 1 && header[1] == "smiles_2") {
    paired = true;
    first_label = 2;
  }
  if (header.size() <= first_label) throw DataError("dataset has no label columns");
  std::vector<std::string> label_names(header.begin() + first_label, header.end());

  std::vector<LabeledRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() > header.size())
      throw DataError("dataset row has more fields than the header");
    fields.resize(header.size());
    LabeledRow row;
    row.smiles = fields[0];
    if (paired) row.smiles2 = fields[1];
    for (std::size_t c = first_label; c < header.size(); ++c) {
      if (fields[c].empty()) {
        row.labels.emplace_back(std::nullopt);
      } else {
        try {
          row.labels.emplace_back(std::stod(fields[c]));
        } catch (const std::exception&) {
          throw DataError("non-numeric label '" + fields[c] + "' in " + path);
        }
      }
    }
    rows.push_back(std::move(row));
  }
  return dataset_from_rows(std::move(label_names), std::move(rows), paired);
}

void assign_splits(LabeledDataset& dataset, std::uint64_t seed) {
  const std::size_t n = dataset.rows.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng(seed).fork(11);
  rng.shuffle(order);
  // properties 8:1:1, pairs 7:1:2
  const double train_frac = dataset.paired ? 0.7 : 0.8;
  const double valid_frac = 0.1;
  auto n_train = static_cast<std::size_t>(train_frac * static_cast<double>(n));
  auto n_valid = static_cast<std::size_t>(valid_frac * static_cast<double>(n));
  n_train = std::max<std::size_t>(n_train, 1);
  n_valid = std::max<std::size_t>(n_valid, 1);
  if (n_train + n_valid >= n) throw DataError("dataset too small to split");
  dataset.split.assign(n, Split::Test);
  for (std::size_t i = 0; i < n_train; ++i) dataset.split[order[i]] = Split::Train;
  for (std::size_t i = n_train; i < n_train + n_valid; ++i)
    dataset.split[order[i]] = Split::Valid;
}

}  // namespace mpg::tasks
