#include "tensor.hpp"

#include <cmath>
#include <functional>

#include "doctest.h"
#include "error.hpp"
#include "rng.hpp"

using namespace tunes;
using namespace tunes::nn;

namespace {

Tensor<double> randn(Shape shape, Rng& rng, bool grad = true) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = rng.normal();
  return Tensor<double>::from(std::move(shape), std::move(v), grad);
}

// Central differences on every input entry against backward().
void gradcheck(std::vector<Tensor<double>> inputs, const std::function<Tensor<double>()>& f) {
  for (auto& t : inputs) t.zero_grad();
  backward(f());
  for (auto& t : inputs) {
    REQUIRE(t.has_grad());
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double keep = data[i];
      const double h = 1e-6;
      double up, down;
      {
        NoGradGuard g;
        data[i] = keep + h;
        up = f().item();
        data[i] = keep - h;
        down = f().item();
      }
      data[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double err = std::abs(numeric - analytic[i]) / std::max(1e-6, std::abs(numeric) + std::abs(analytic[i]));
      CHECK(err < 1e-5);
    }
  }
}

// Weighted sum so every output entry gets a distinct upstream gradient.
Tensor<double> probe(const Tensor<double>& y) {
  std::vector<double> w(y.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(0.7 * static_cast<double>(i) + 0.3);
  return sum(mul(y, Tensor<double>::from(y.shape(), w)));
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("matmul values") {
  auto a = Tensor<float>::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto b = Tensor<float>::from({3, 2}, {7, 8, 9, 10, 11, 12});
  auto c = matmul(a, b);
  CHECK(c.shape() == Shape{2, 2});
  CHECK(std::vector<float>(c.data().begin(), c.data().end()) == std::vector<float>{58, 64, 139, 154});
  CHECK_THROWS_AS(matmul(a, a), Error);
}

TEST_CASE("op gradients match finite differences") {
  Rng rng(5);
  auto x = randn({3, 4}, rng);
  auto w = randn({4, 5}, rng);
  auto b = randn({5}, rng);
  SUBCASE("linear") { gradcheck({x, w, b}, [&] { return probe(linear(x, w, b)); }); }
  SUBCASE("add and scale") {
    auto y = randn({3, 4}, rng);
    gradcheck({x, y}, [&] { return probe(scale(add(x, y), 0.5)); });
  }
  SUBCASE("layer_norm") {
    auto g = randn({4}, rng);
    auto bb = randn({4}, rng);
    gradcheck({x, g, bb}, [&] { return probe(layer_norm(x, g, bb)); });
  }
  SUBCASE("gelu") { gradcheck({x}, [&] { return probe(gelu(x)); }); }
  SUBCASE("softmax") { gradcheck({x}, [&] { return probe(softmax_rows(x)); }); }
  SUBCASE("gather, concat, reshape") {
    const std::vector<int> idx{2, 0, 2};
    auto y = randn({2, 4}, rng);
    gradcheck({x, y}, [&] { return probe(reshape(concat_rows(gather_rows(x, idx), y), {4, 5})); });
  }
  SUBCASE("cross_entropy with ignored rows") {
    const std::vector<int> targets{1, -1, 3};
    gradcheck({x}, [&] { return cross_entropy(x, targets, -1); });
  }
  SUBCASE("causal attention over segments") {
    auto q = randn({5, 4}, rng);
    auto k = randn({5, 4}, rng);
    auto v = randn({5, 4}, rng);
    const std::vector<std::size_t> seg{3, 2};
    gradcheck({q, k, v}, [&] { return probe(causal_attention(q, k, v, 2, seg)); });
  }
}

TEST_CASE("cross_entropy value and empty target") {
  auto logits = Tensor<double>::from({2, 3}, {0, 0, 0, 1, 2, 3});
  const std::vector<int> t{0, 2};
  const double want = 0.5 * (std::log(3.0) + (std::log(std::exp(1) + std::exp(2) + std::exp(3)) - 3));
  CHECK(cross_entropy(logits, t, -1).item() == doctest::Approx(want).epsilon(1e-12));
  const std::vector<int> none{-1, -1};
  CHECK_THROWS_AS(cross_entropy(logits, none, -1), Error);
}

TEST_CASE("attention is causal and segments are independent") {
  Rng rng(9);
  auto q = randn({6, 4}, rng, false);
  auto k = randn({6, 4}, rng, false);
  auto v = randn({6, 4}, rng, false);
  const std::vector<std::size_t> seg{4, 2};
  std::uint64_t area = 0;
  const auto base = causal_attention(q, k, v, 2, seg, &area);
  CHECK(area == 16 + 4);
  // Perturbing row 2 changes nothing before it, nor the other segment.
  k.mutable_data()[2 * 4 + 1] += 1.0;
  v.mutable_data()[2 * 4 + 3] -= 2.0;
  const auto moved = causal_attention(q, k, v, 2, seg);
  for (std::size_t r : {0u, 1u, 4u, 5u}) {
    for (std::size_t c = 0; c < 4; ++c) CHECK(moved.at(r, c) == base.at(r, c));
  }
  bool changed = false;
  for (std::size_t c = 0; c < 4; ++c) changed |= moved.at(2, c) != base.at(2, c);
  CHECK(changed);
}

TEST_CASE("gradients accumulate and no-grad records nothing") {
  auto x = Tensor<double>::from({1}, {3.0}, true);
  backward(mul(x, x));
  backward(mul(x, x));
  CHECK(x.grad()[0] == doctest::Approx(12.0));
  {
    NoGradGuard g;
    CHECK_FALSE(grad_enabled());
    auto y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(grad_enabled());
}

}  // TEST_SUITE
