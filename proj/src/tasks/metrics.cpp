// SPDX-License-Identifier: Apache-2.0
#include "mpg/tasks/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mpg::tasks {

double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw DegenerateError("auc_roc: scores/labels mismatch");
  const auto n = scores.size();
  std::size_t positives = 0;
  for (int y : labels) positives += (y != 0);
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0)
    throw DegenerateError("auc_roc: both classes must be present");

  // Mann-Whitney U via average ranks; ties get the midrank, which matches
  // pair counting with half credit exactly.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] != 0) rank_sum_pos += midrank;
    i = j;
  }
  const double u = rank_sum_pos - static_cast<double>(positives) *
                                      (static_cast<double>(positives) + 1.0) / 2.0;
  return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

double rmse(const std::vector<double>& predictions, const std::vector<double>& targets) {
  if (predictions.size() != targets.size() || predictions.empty())
    throw DegenerateError("rmse: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(predictions.size()));
}

double prc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw DegenerateError("prc_auc: scores/labels mismatch");
  std::size_t positives = 0;
  for (int y : labels) positives += (y != 0);
  if (positives == 0) throw DegenerateError("prc_auc: needs at least one positive");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  // step curve: precision at each new recall level, tied scores grouped
  double area = 0.0;
  double tp = 0.0, fp = 0.0, prev_recall = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k)
      (labels[order[k]] != 0 ? tp : fp) += 1.0;
    const double recall = tp / static_cast<double>(positives);
    const double precision = tp / (tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

double f1(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw DegenerateError("f1: scores/labels mismatch");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= 0.5;
    const bool actual = labels[i] != 0;
    if (predicted && actual) ++tp;
    else if (predicted && !actual) ++fp;
    else if (!predicted && actual) ++fn;
  }
  if (tp == 0 && (fp > 0 || fn > 0)) return 0.0;
  if (tp == 0) throw DegenerateError("f1: no positives in labels or predictions");
  return 2.0 * tp / (2.0 * tp + fp + fn);
}

double davies_bouldin(const std::vector<std::vector<double>>& points,
                      const std::vector<int>& cluster) {
  if (points.size() != cluster.size() || points.empty())
    throw DegenerateError("davies_bouldin: points/cluster mismatch");
  const int k = 1 + *std::max_element(cluster.begin(), cluster.end());
  if (k < 2) throw DegenerateError("davies_bouldin: needs at least two clusters");
  const std::size_t dim = points[0].size();
  std::vector<std::vector<double>> centroid(k, std::vector<double>(dim, 0.0));
  std::vector<double> count(k, 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (cluster[i] < 0) throw DegenerateError("davies_bouldin: negative cluster id");
    count[cluster[i]] += 1.0;
    for (std::size_t j = 0; j < dim; ++j) centroid[cluster[i]][j] += points[i][j];
  }
  for (int c = 0; c < k; ++c) {
    if (count[c] == 0.0) throw DegenerateError("davies_bouldin: empty cluster");
    for (auto& v : centroid[c]) v /= count[c];
  }
  auto dist = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) acc += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(acc);
  };
  std::vector<double> scatter(k, 0.0);  // mean distance to centroid
  for (std::size_t i = 0; i < points.size(); ++i)
    scatter[cluster[i]] += dist(points[i], centroid[cluster[i]]);
  for (int c = 0; c < k; ++c) scatter[c] /= count[c];
  double total = 0.0;
  for (int a = 0; a < k; ++a) {
    double worst = 0.0;
    for (int b = 0; b < k; ++b) {
      if (a == b) continue;
      const double gap = dist(centroid[a], centroid[b]);
      if (gap == 0.0) throw DegenerateError("davies_bouldin: coincident centroids");
      worst = std::max(worst, (scatter[a] + scatter[b]) / gap);
    }
    total += worst;
  }
  return total / static_cast<double>(k);
}

}  // namespace mpg::tasks
