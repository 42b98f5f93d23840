// SPDX-License-Identifier: Apache-2.0
#include "mpg/cli/gradcheck_suite.hpp"

#include "mpg/ssl/ssl.hpp"

namespace mpg::cli {

namespace {

using nc::Tensor;

Tensor random_tensor(nc::Shape shape, Rng& rng, double scale = 1.0) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> data(n);
  for (auto& v : data) v = rng.uniform(-scale, scale);
  Tensor t = Tensor::from(std::move(shape), std::move(data));
  t.set_requires_grad(true);
  return t;
}

// fixed random projection, constant across perturbations
Tensor probe(const nc::Shape& shape, Rng& rng) {
  nc::Shape s = shape;
  std::size_t n = 1;
  for (auto d : s) n *= d;
  std::vector<double> data(n);
  for (auto& v : data) v = rng.uniform(-1.0, 1.0);
  return Tensor::from(std::move(s), std::move(data));
}

void check(GradCheckSuiteResult& result, const std::string& name,
           const std::function<Tensor()>& f,
           std::vector<std::pair<std::string, Tensor>> params, double h = 1e-5) {
  nc::GradCheckOptions options;
  options.h = h;
  options.tol = result.tol;
  result.checks.emplace_back(name, nc::finite_difference_check(f, params, options));
}

}  // namespace

GradCheckSuiteResult run_gradcheck_suite(const molgnet::MolGNetConfig& config,
                                         std::uint64_t seed, double tol,
                                         std::size_t model_coords_per_param) {
  GradCheckSuiteResult result;
  result.tol = tol;
  Rng rng(seed);

  {
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
    Tensor c = probe({3, 4}, rng);
    check(result, "add", [&] { return nc::sum_all(nc::mul(nc::add(a, b), c)); },
          {{"a", a}, {"b", b}});
    check(result, "sub", [&] { return nc::sum_all(nc::mul(nc::sub(a, b), c)); },
          {{"a", a}, {"b", b}});
    check(result, "mul", [&] { return nc::sum_all(nc::mul(nc::mul(a, b), c)); },
          {{"a", a}, {"b", b}});
    check(result, "scale", [&] { return nc::sum_all(nc::mul(nc::scale(a, -1.7), c)); },
          {{"a", a}});
    Tensor c2 = probe({3, 8}, rng);
    check(result, "concat_last",
          [&] { return nc::sum_all(nc::mul(nc::concat_last(a, b), c2)); },
          {{"a", a}, {"b", b}});
  }
  {
    Tensor x = random_tensor({2, 5}, rng, 2.0);
    Tensor c = probe({2, 5}, rng);
    check(result, "sigmoid", [&] { return nc::sum_all(nc::mul(nc::sigmoid(x), c)); },
          {{"x", x}});
    check(result, "tanh", [&] { return nc::sum_all(nc::mul(nc::tanh(x), c)); }, {{"x", x}});
    check(result, "gelu", [&] { return nc::sum_all(nc::mul(nc::gelu(x), c)); }, {{"x", x}});
    check(result, "softmax_rows",
          [&] { return nc::sum_all(nc::mul(nc::softmax_rows(x), c)); }, {{"x", x}});
    Tensor mask = Tensor::from({2, 5}, {1, 0, 1, 1, 0, 0, 1, 1, 0, 1});
    check(result, "softmax_rows_masked",
          [&] { return nc::sum_all(nc::mul(nc::softmax_rows(x, &mask), c)); }, {{"x", x}});
  }
  {
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
    Tensor c = probe({3, 2}, rng);
    check(result, "matmul", [&] { return nc::sum_all(nc::mul(nc::matmul(a, b), c)); },
          {{"a", a}, {"b", b}});
    Tensor x = random_tensor({3, 4}, rng), w = random_tensor({2, 4}, rng);
    Tensor bias = random_tensor({2}, rng);
    check(result, "linear",
          [&] { return nc::sum_all(nc::mul(nc::linear(x, w, &bias), c)); },
          {{"x", x}, {"w", w}, {"b", bias}});
  }
  {
    Tensor x = random_tensor({4, 6}, rng, 2.0);
    Tensor gamma = random_tensor({6}, rng), beta = random_tensor({6}, rng);
    Tensor c = probe({4, 6}, rng);
    check(result, "layer_norm",
          [&] { return nc::sum_all(nc::mul(nc::layer_norm(x, gamma, beta), c)); },
          {{"x", x}, {"gamma", gamma}, {"beta", beta}});
  }
  {
    Tensor x = random_tensor({5, 3}, rng);
    const std::vector<int> idx = {3, 0, 0, 4, 2, 1};
    Tensor cg = probe({6, 3}, rng);
    check(result, "gather_rows",
          [&] { return nc::sum_all(nc::mul(nc::gather_rows(x, idx), cg)); }, {{"x", x}});
    const std::vector<int> seg = {0, 2, 2, 1, 0};
    Tensor cs = probe({3, 3}, rng);
    check(result, "segment_sum",
          [&] { return nc::sum_all(nc::mul(nc::segment_sum(x, seg, 3), cs)); }, {{"x", x}});
    Tensor cx = probe({5, 3}, rng);
    check(result, "segment_softmax",
          [&] { return nc::sum_all(nc::mul(nc::segment_softmax(x, seg, 3), cx)); },
          {{"x", x}});
  }
  {
    Tensor a = random_tensor({3, 8}, rng), b = random_tensor({3, 8}, rng);
    Tensor w = random_tensor({3, 2}, rng);
    Tensor ch = probe({3, 2}, rng);
    Tensor cv = probe({3, 8}, rng);
    check(result, "headwise_dot",
          [&] { return nc::sum_all(nc::mul(nc::headwise_dot(a, b, 2), ch)); },
          {{"a", a}, {"b", b}});
    check(result, "scale_heads",
          [&] { return nc::sum_all(nc::mul(nc::scale_heads(a, w, 2), cv)); },
          {{"a", a}, {"w", w}});
  }
  {
    Tensor logits = random_tensor({6}, rng, 2.0);
    const std::vector<double> targets = {1, 0, 1, 1, 0, 0};
    check(result, "cross_entropy_binary",
          [&] { return nc::cross_entropy_logits(logits, targets); }, {{"z", logits}});
    const std::vector<double> mask = {1, 1, 0, 1, 0, 1};
    check(result, "cross_entropy_masked",
          [&] { return nc::cross_entropy_logits_masked(logits, targets, mask); },
          {{"z", logits}});
    check(result, "mse_masked", [&] { return nc::mse_masked(logits, targets, mask); },
          {{"z", logits}});
    Tensor cat = random_tensor({4, 5}, rng, 2.0);
    const std::vector<int> classes = {2, 0, 4, 1};
    check(result, "cross_entropy_categorical",
          [&] { return nc::cross_entropy_logits(cat, classes); }, {{"z", cat}});
  }

  // Full model with both heads on a stitched 4-atom molecule: a PSD sample
  // exercises both segments, the virtual edge, the mask row, and the heads.
  {
    const auto& vocab = chem::FeatureVocab::standard();
    chem::MolGraph mol = chem::parse_smiles("CC(O)N");
    Rng sample_rng = rng.fork(97);
    auto [left, right] = ssl::decompose(mol, sample_rng, 0);
    ssl::SubgraphPair pair{std::move(left), std::move(right), 1};
    molgnet::BatchedGraph batch = ssl::stitch(pair, vocab);
    ssl::MaskResult mask = ssl::apply_attr_mask(batch, 0.25, sample_rng, vocab);

    Rng init_rng = rng.fork(98);
    molgnet::MolGNetParams params = molgnet::MolGNetParams::init(config, init_rng);
    ssl::PsdHead psd_head = ssl::PsdHead::init(config.hidden, init_rng);
    ssl::MaskHead mask_head =
        ssl::MaskHead::init(config.hidden, chem::kElementCount, init_rng);

    auto loss_fn = [&, batch, mask]() -> Tensor {
      molgnet::ForwardOut out = molgnet::forward(batch, params, config);
      Tensor collect = molgnet::collection_embedding(batch, out.node_states);
      ssl::PsdLossOut psd = ssl::psd_loss(collect, {1}, psd_head);
      ssl::MaskLossOut ml =
          ssl::mask_loss(out.node_states, mask.positions, mask.targets, mask_head);
      return nc::add(psd.loss, ml.loss);
    };
    std::vector<std::pair<std::string, Tensor>> named = params.named();
    for (auto& [n, t] : psd_head.named()) named.emplace_back(n, t);
    for (auto& [n, t] : mask_head.named()) named.emplace_back(n, t);

    nc::GradCheckOptions options;
    options.tol = tol;
    options.h = 1e-5;
    options.max_coords_per_param = model_coords_per_param;
    options.seed = seed ^ 0xabcd;
    result.checks.emplace_back("molgnet_full",
                               nc::finite_difference_check(loss_fn, named, options));
  }
  return result;
}

}  // namespace mpg::cli
