// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mpg/numcore/adam.hpp"
#include "mpg/numcore/gradcheck.hpp"
#include "mpg/numcore/ops.hpp"
#include "mpg/rng.hpp"

#include <cmath>

using namespace mpg;
using nc::Tensor;

namespace {

Tensor seeded(nc::Shape shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> data(n);
  for (auto& v : data) v = rng.uniform(-scale, scale);
  return Tensor::from(std::move(shape), std::move(data));
}

}  // namespace

TEST_CASE("matmul hand values") {
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from({2, 1}, {1, 1});
  Tensor c = nc::matmul(a, b);
  CHECK(c.at(0, 0) == doctest::Approx(3.0));
  CHECK(c.at(1, 0) == doctest::Approx(7.0));

  Tensor eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor x = seeded({3, 4}, 5);
  Tensor ix = nc::matmul(eye, x);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(ix.at(i) == x.at(i));

  CHECK_THROWS_AS(nc::matmul(seeded({2, 3}, 1), seeded({4, 5}, 2)), nc::ShapeError);
}

TEST_CASE("softmax rows") {
  Tensor uniform = nc::softmax_rows(Tensor::from({1, 3}, {0, 0, 0}));
  for (int j = 0; j < 3; ++j) CHECK(uniform.at(0, j) == doctest::Approx(1.0 / 3));

  Tensor stable = nc::softmax_rows(Tensor::from({1, 2}, {1000, 0}));
  CHECK(stable.at(0, 0) == doctest::Approx(1.0));
  CHECK(stable.at(0, 1) == doctest::Approx(0.0));
  CHECK(std::isfinite(stable.at(0, 0)));

  Tensor closed = nc::softmax_rows(Tensor::from({1, 2}, {std::log(2.0), 0.0}));
  CHECK(closed.at(0, 0) == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(closed.at(0, 1) == doctest::Approx(1.0 / 3).epsilon(1e-12));

  Tensor mask = Tensor::from({1, 3}, {1, 0, 1});
  Tensor masked = nc::softmax_rows(Tensor::from({1, 3}, {0, 100, 0}), &mask);
  CHECK(masked.at(0, 1) == 0.0);
  CHECK(masked.at(0, 0) == doctest::Approx(0.5));

  Tensor dead = Tensor::from({1, 2}, {0, 0});
  CHECK_THROWS_AS(nc::softmax_rows(dead, &dead), nc::MaskError);
}

TEST_CASE("softmax rows sum to one over unmasked entries") {
  Rng rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 1 + rng.below(5), cols = 2 + rng.below(6);
    Tensor x = seeded({rows, cols}, 100 + trial, 5.0);
    std::vector<double> mvals(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
      bool any = false;
      for (std::size_t c = 0; c < cols; ++c) {
        mvals[r * cols + c] = rng.uniform() < 0.7 ? 1.0 : 0.0;
        any = any || mvals[r * cols + c] != 0.0;
      }
      if (!any) mvals[r * cols] = 1.0;
    }
    Tensor mask = Tensor::from({rows, cols}, mvals);
    Tensor sm = nc::softmax_rows(x, &mask);
    for (std::size_t r = 0; r < rows; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        total += sm.at(r, c);
        if (mvals[r * cols + c] == 0.0) CHECK(sm.at(r, c) == 0.0);
        CHECK(sm.at(r, c) >= 0.0);
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("gelu values") {
  CHECK(nc::gelu(Tensor::scalar(0.0)).value() == 0.0);
  CHECK(nc::gelu(Tensor::scalar(10.0)).value() == doctest::Approx(10.0).epsilon(1e-6));
  CHECK(nc::gelu(Tensor::scalar(1.0)).value() == doctest::Approx(0.841192).epsilon(1e-6));
}

TEST_CASE("layer norm") {
  Tensor gamma = Tensor::from({4}, {1, 1, 1, 1});
  Tensor beta = Tensor::from({4}, {0, 0, 0, 0});
  Tensor constant = nc::layer_norm(Tensor::from({2, 4}, {3, 3, 3, 3, -1, -1, -1, -1}),
                                   gamma, beta);
  for (std::size_t i = 0; i < constant.size(); ++i)
    CHECK(constant.at(i) == doctest::Approx(0.0).epsilon(1e-9));

  Tensor g2 = Tensor::from({2}, {1, 1});
  Tensor b2 = Tensor::from({2}, {0, 0});
  Tensor pm = nc::layer_norm(Tensor::from({1, 2}, {1, -1}), g2, b2, 1e-12);
  CHECK(pm.at(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(pm.at(0, 1) == doctest::Approx(-1.0).epsilon(1e-6));

  Tensor zeros = Tensor::from({2}, {0, 0});
  Tensor cs = Tensor::from({2}, {2.5, 2.5});
  Tensor shifted = nc::layer_norm(Tensor::from({1, 2}, {7, -2}), zeros, cs);
  CHECK(shifted.at(0, 0) == doctest::Approx(2.5));
  CHECK(shifted.at(0, 1) == doctest::Approx(2.5));
}

TEST_CASE("elementwise and lookup basics") {
  CHECK(nc::sigmoid(Tensor::scalar(0.0)).value() == doctest::Approx(0.5));
  CHECK(nc::tanh(Tensor::scalar(0.0)).value() == 0.0);
  CHECK(nc::cross_entropy_logits(Tensor::from({1}, {0.0}), std::vector<double>{1.0}).value() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Tensor table = seeded({7, 3}, 17);
  Tensor rows = nc::embedding_lookup(table, {4, 1, 4});
  for (int j = 0; j < 3; ++j) {
    CHECK(rows.at(0, j) == table.at(4, j));
    CHECK(rows.at(1, j) == table.at(1, j));
    CHECK(rows.at(2, j) == table.at(4, j));
  }
  CHECK_THROWS_AS(nc::embedding_lookup(table, {7}), nc::IndexError);

  // 12-class uniform categorical loss
  Tensor logits = Tensor::zeros({3, 12});
  CHECK(nc::cross_entropy_logits(logits, std::vector<int>{0, 5, 11}).value() ==
        doctest::Approx(std::log(12.0)).epsilon(1e-12));

  // two rows with hand-computed negative log likelihoods
  Tensor hand = Tensor::from({2, 2}, {0.0, std::log(2.0), 0.0, std::log(2.0)});
  const double expected = 0.5 * (std::log(3.0) + (std::log(3.0) - std::log(2.0)));
  CHECK(nc::cross_entropy_logits(hand, std::vector<int>{0, 1}).value() ==
        doctest::Approx(expected).epsilon(1e-12));

  Tensor a = seeded({2, 3}, 3), b = seeded({2, 2}, 4);
  Tensor cat = nc::concat_last(a, b);
  CHECK(cat.shape() == nc::Shape{2, 5});
  CHECK(cat.at(0, 3) == b.at(0, 0));
  CHECK(cat.at(1, 2) == a.at(1, 2));
}

TEST_CASE("backward basics and accumulation") {
  Tensor x = seeded({2, 3}, 9);
  x.set_requires_grad(true);

  {
    nc::Tape tape;
    Tensor loss = nc::sum_all(x);
    tape.backward(loss);
  }
  for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));
  x.zero_grad();

  {
    nc::Tape tape;
    Tensor loss = nc::sum_all(nc::mul(x, x));
    tape.backward(loss);
  }
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(x.grad()[i] == doctest::Approx(2.0 * x.at(i)));

  // second backward doubles the leaf gradient exactly
  std::vector<double> once = x.grad();
  {
    nc::Tape tape;
    Tensor loss = nc::sum_all(nc::mul(x, x));
    tape.backward(loss);
    tape.backward(loss);
  }
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(x.grad()[i] == doctest::Approx(3.0 * once[i]));

  Tensor detached = nc::sum_all(x.detach());
  nc::Tape tape;
  CHECK_THROWS_AS(tape.backward(detached), nc::TapeError);
}

TEST_CASE("finite difference oracle on closed forms") {
  Tensor x = seeded({3, 4}, 23, 2.0);
  auto report = nc::finite_difference_check(
      [](const Tensor& t) { return nc::sum_all(nc::gelu(t)); }, x, 1e-5, 1e-5);
  CHECK(report.max_rel_err < 1e-5);

  // linear function differentiates exactly
  auto linear_report = nc::finite_difference_check(
      [](const Tensor& t) { return nc::sum_all(t); }, x, 1e-5, 1e-10);
  CHECK(linear_report.max_rel_err < 1e-9);
}

TEST_CASE("finite difference catches a corrupted backward") {
  // forward says 2x, backward claims 5; the oracle must flag it
  Tensor x = seeded({4}, 31);
  x.set_requires_grad(true);
  auto broken = [&]() {
    std::vector<double> data(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) data[i] = 2.0 * x.at(i);
    Tensor out = nc::make_tensor({4}, std::move(data));
    out.impl()->requires_grad = true;
    out.impl()->leaf = false;
    if (nc::Tape::active()) {
      out.impl()->on_tape = true;
      nc::Tape::active()->record(
          [xi = x.impl(), oi = out.impl()] {
            nc::detail::ensure_grad(*xi);
            for (std::size_t i = 0; i < xi->grad.size(); ++i)
              xi->grad[i] += 5.0 * oi->grad[i];
          },
          out);
    }
    return nc::sum_all(out);
  };
  auto report = nc::finite_difference_check(broken, {{"x", x}}, {});
  CHECK_FALSE(report.passed(1e-4));
  CHECK(report.max_rel_err > 0.5);  // claims 5 where the truth is 2
}

TEST_CASE("composite graph matches finite differences") {
  Rng rng(41);
  Tensor x = seeded({4, 6}, 43);
  Tensor w = seeded({6, 6}, 44);
  Tensor gamma = Tensor::from({6}, std::vector<double>(6, 1.0));
  Tensor beta = Tensor::zeros({6});
  for (auto* t : {&x, &w, &gamma, &beta}) t->set_requires_grad(true);
  auto f = [&] {
    Tensor h = nc::tanh(nc::matmul(x, w));
    Tensor n = nc::layer_norm(h, gamma, beta);
    Tensor s = nc::softmax_rows(n);
    return nc::sum_all(nc::mul(s, nc::sigmoid(nc::gelu(n))));
  };
  auto report = nc::finite_difference_check(
      f, {{"x", x}, {"w", w}, {"gamma", gamma}, {"beta", beta}}, {});
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("segmented ops") {
  Tensor x = Tensor::from({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  Tensor sums = nc::segment_sum(x, {1, 0, 1, 1}, 3);
  CHECK(sums.at(0, 0) == 3.0);
  CHECK(sums.at(1, 0) == doctest::Approx(13.0));
  CHECK(sums.at(2, 0) == 0.0);  // empty segment

  Tensor scores = Tensor::from({3, 1}, {0.0, 0.0, 5.0});
  Tensor sm = nc::segment_softmax(scores, {0, 0, 1}, 2);
  CHECK(sm.at(0, 0) == doctest::Approx(0.5));
  CHECK(sm.at(1, 0) == doctest::Approx(0.5));
  CHECK(sm.at(2, 0) == doctest::Approx(1.0));

  Tensor a = Tensor::from({1, 4}, {1, 2, 3, 4});
  Tensor b = Tensor::from({1, 4}, {10, 20, 30, 40});
  Tensor hd = nc::headwise_dot(a, b, 2);
  CHECK(hd.at(0, 0) == doctest::Approx(50.0));
  CHECK(hd.at(0, 1) == doctest::Approx(250.0));

  Tensor w = Tensor::from({1, 2}, {2.0, -1.0});
  Tensor scaled = nc::scale_heads(a, w, 2);
  CHECK(scaled.at(0, 0) == 2.0);
  CHECK(scaled.at(0, 3) == -4.0);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor p = seeded({3}, 51);
    p.set_requires_grad(true);
    const std::vector<double> before = p.vec();
    nc::Adam adam({p});
    adam.step();
    CHECK(p.vec() == before);
  }
  SUBCASE("first step moves by about -lr * sign(g)") {
    Tensor p = Tensor::from({2}, {1.0, -2.0});
    p.set_requires_grad(true);
    p.grad() = {0.3, -0.7};
    nc::AdamConfig config;
    config.lr = 1e-3;
    nc::Adam adam({p}, config);
    adam.step();
    CHECK(p.at(0) == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
    CHECK(p.at(1) == doctest::Approx(-2.0 + 1e-3).epsilon(1e-6));
  }
  SUBCASE("identical runs are bitwise identical") {
    auto run = [] {
      Tensor p = seeded({8}, 77);
      p.set_requires_grad(true);
      nc::Adam adam({p}, {1e-2, 0.9, 0.999, 1e-8});
      for (int i = 0; i < 20; ++i) {
        {
          nc::Tape tape;
          Tensor loss = nc::sum_all(nc::mul(p, p));
          tape.backward(loss);
        }
        adam.step();
        adam.zero_grad();
      }
      return p.vec();
    };
    CHECK(run() == run());
  }
  SUBCASE("shape mismatch raises") {
    Tensor p = seeded({3}, 52);
    p.set_requires_grad(true);
    nc::Adam adam({p});
    p.grad().resize(2);
    CHECK_THROWS_AS(adam.step(), nc::ShapeError);
  }
}

TEST_CASE("shape and index error paths") {
  Tensor x = seeded({4, 3}, 61);
  Tensor y = seeded({3, 3}, 62);
  CHECK_THROWS_AS(nc::add(x, y), nc::ShapeError);
  CHECK_THROWS_AS(nc::mul(x, y), nc::ShapeError);
  CHECK_THROWS_AS(nc::concat_last(x, Tensor::scalar(1.0)), nc::ShapeError);
  CHECK_THROWS_AS(nc::layer_norm(x, Tensor::zeros({2}), Tensor::zeros({3})),
                  nc::ShapeError);
  Tensor w = seeded({2, 5}, 63);
  CHECK_THROWS_AS(nc::linear(x, w), nc::ShapeError);
  Tensor w2 = seeded({2, 3}, 64);
  Tensor bad_bias = Tensor::zeros({3});
  CHECK_THROWS_AS(nc::linear(x, w2, &bad_bias), nc::ShapeError);
  CHECK_THROWS_AS(nc::segment_sum(x, {0, 1}, 2), nc::ShapeError);
  CHECK_THROWS_AS(nc::segment_sum(x, {0, 1, 2, 5}, 3), nc::IndexError);
  CHECK_THROWS_AS(nc::segment_softmax(x, {0, 1, 2, 3}, 3), nc::IndexError);
  CHECK_THROWS_AS(nc::headwise_dot(x, x, 2), nc::ShapeError);
  CHECK_THROWS_AS(nc::cross_entropy_logits(x, std::vector<int>{0, 1}), nc::ShapeError);
  CHECK_THROWS_AS(nc::cross_entropy_logits(Tensor::zeros({1, 3}), std::vector<int>{5}),
                  nc::IndexError);
  CHECK_THROWS_AS(
      nc::cross_entropy_logits_masked(Tensor::zeros({2}), {1, 0}, {0, 0}),
      nc::MaskError);
}

TEST_CASE("tapes nest and restore") {
  Tensor x = seeded({3}, 67);
  x.set_requires_grad(true);
  {
    nc::Tape outer;
    Tensor a = nc::scale(x, 2.0);
    {
      nc::Tape inner;
      Tensor loss = nc::sum_all(nc::mul(x, x));
      inner.backward(loss);
      CHECK(nc::Tape::active() == &inner);
    }
    CHECK(nc::Tape::active() == &outer);
    outer.backward(nc::sum_all(a));
  }
  CHECK(nc::Tape::active() == nullptr);
  // inner contributed 2x, outer contributed 2
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(x.grad()[i] == doctest::Approx(2.0 * x.at(i) + 2.0));
}

TEST_CASE("float32 mode quantizes") {
  nc::set_precision(nc::Precision::Float32);
  Tensor t = Tensor::from({2}, {0.1, 1.0 / 3.0});
  nc::set_precision(nc::Precision::Float64);
  CHECK(t.at(0) == static_cast<double>(0.1f));
  CHECK(t.at(0) != 0.1);
  CHECK(t.at(1) == static_cast<double>(static_cast<float>(1.0 / 3.0)));
}
