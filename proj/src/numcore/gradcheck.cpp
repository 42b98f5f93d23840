// SPDX-License-Identifier: Apache-2.0
#include "mpg/numcore/gradcheck.hpp"

#include "mpg/rng.hpp"

#include <algorithm>
#include <cmath>

namespace mpg::nc {

namespace {

std::vector<std::size_t> coords_to_check(std::size_t n, std::size_t max_coords,
                                         Rng& rng) {
  if (max_coords == 0 || n <= max_coords) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return all;
  }
  std::vector<std::size_t> picked = {0, n - 1};
  while (picked.size() < max_coords) {
    const std::size_t c = static_cast<std::size_t>(rng.below(n));
    if (std::find(picked.begin(), picked.end(), c) == picked.end())
      picked.push_back(c);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace

GradCheckReport finite_difference_check(
    const std::function<Tensor()>& f,
    const std::vector<std::pair<std::string, Tensor>>& params,
    const GradCheckOptions& options) {
  // analytic pass
  for (const auto& [name, p] : params) const_cast<Tensor&>(p).zero_grad();
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = f();
    tape.backward(loss);
  }
  for (const auto& [name, p] : params) {
    auto g = p.grad_or_empty();
    if (g.empty()) g.assign(p.size(), 0.0);
    analytic.push_back(std::move(g));
    const_cast<Tensor&>(p).zero_grad();
  }

  GradCheckReport report;
  Rng rng(options.seed ^ 0xfd1e5u);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& name = params[k].first;
    Tensor p = params[k].second;
    GradCheckEntry entry{name, 0.0, 0};
    for (std::size_t i : coords_to_check(p.size(), options.max_coords_per_param, rng)) {
      const double saved = p.data()[i];
      p.data()[i] = saved + options.h;
      const double up = f().value();
      p.data()[i] = saved - options.h;
      const double down = f().value();
      p.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * options.h);
      const double a = analytic[k][i];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      const double rel = std::abs(a - numeric) / denom;
      ++entry.coords_checked;
      if (rel > entry.max_rel_err) entry.max_rel_err = rel;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = name + "[" + std::to_string(i) + "]";
      }
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

GradCheckReport finite_difference_check(const std::function<Tensor(const Tensor&)>& f,
                                        const Tensor& x, double h, double tol) {
  GradCheckOptions options;
  options.h = h;
  options.tol = tol;
  Tensor input = x;
  if (!input.requires_grad()) input.set_requires_grad(true);
  return finite_difference_check([&] { return f(input); }, {{"x", input}}, options);
}

}  // namespace mpg::nc
