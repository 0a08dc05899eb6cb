#include <doctest.h>

#include <cmath>
#include <functional>

#include "ssvae/grad_check.hpp"
#include "ssvae/ops.hpp"
#include "support.hpp"

using namespace ssvae;
using ssvae::testing::random_parameter;
using ssvae::testing::random_tensor;

TEST_CASE("elementwise fixed points") {
  CHECK(elu(Tensor::scalar(0.0)).item() == 0.0);
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(std::abs(exp(log(Tensor::scalar(3.0))).item() - 3.0) < 1e-12);
}

TEST_CASE("broadcasting is trailing-aligned") {
  const Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor b = Tensor::from_data({3}, {10, 20, 30});
  const Tensor c = a + b;
  CHECK(c.shape() == Shape{2, 3});
  CHECK(c.at(4) == 25.0);
  CHECK(broadcast_shapes({4, 1, 3}, {2, 1}) == Shape{4, 2, 3});
  CHECK_THROWS_AS(add(a, Tensor::zeros({2})), ShapeError);
  CHECK_THROWS_AS(broadcast_shapes({2, 3}, {4, 3}), ShapeError);
}

TEST_CASE("reductions and linear algebra") {
  CHECK(std::abs(logsumexp(Tensor::zeros({2}), 0).item() - std::log(2.0)) < 1e-15);

  Rng rng(3);
  const Tensor x = random_tensor({2, 3, 5, 5}, rng);
  const Tensor id = Tensor::from_data({3, 3, 1, 1}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor y = conv2d(x, id, Tensor(), 1, 0);
  CHECK(ssvae::testing::max_abs_diff(y.data(), x.data()) == 0.0);

  const Tensor eye = Tensor::from_data({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor a = random_tensor({3, 4}, rng);
  CHECK(ssvae::testing::max_abs_diff(matmul(eye, a).data(), a.data()) == 0.0);

  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(concat({Tensor::zeros({1, 2, 2, 2}), Tensor::zeros({1, 2, 3, 2})}, 1), ShapeError);
}

TEST_CASE("logsumexp is shift invariant and stable") {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const Tensor x = random_tensor({7}, rng, -5.0, 5.0);
    const double c = 1000.0 * (rng.uniform() - 0.5);
    const double a = logsumexp(x, 0).item();
    const double b = logsumexp(x + c, 0).item() - c;
    CHECK(std::abs(a - b) < 1e-10);
  }
  const double big = logsumexp(Tensor::from_data({2}, {1000.0, 1000.0}), 0).item();
  CHECK(std::abs(big - (1000.0 + std::log(2.0))) < 1e-10);
}

TEST_CASE("conv2d_transpose is the adjoint of conv2d") {
  // <conv(x), y> == <x, conv^T(y)> for the same weights.
  Rng rng(11);
  const Tensor x = random_tensor({2, 3, 6, 6}, rng);
  const Tensor w = random_tensor({4, 3, 3, 3}, rng);
  // 5x5 input so the transposed output size (H-1)*2 - 2 + 3 matches it.
  const Tensor x5 = slice(slice(x, 2, 0, 5), 3, 0, 5);
  const Tensor cx5 = conv2d(x5, w, Tensor(), 2, 1);
  const Tensor y5 = random_tensor(cx5.shape(), rng);
  const Tensor ty5 = conv2d_transpose(y5, w, Tensor(), 2, 1);
  REQUIRE(ty5.shape() == x5.shape());
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < cx5.numel(); ++i) lhs += cx5.at(i) * y5.at(i);
  for (std::size_t i = 0; i < x5.numel(); ++i) rhs += x5.at(i) * ty5.at(i);
  CHECK(std::abs(lhs - rhs) < 1e-10 * (1.0 + std::abs(lhs)));
}

TEST_CASE("backward on simple graphs") {
  SUBCASE("sum") {
    Tensor x = Tensor::parameter({4}, {1, 2, 3, 4});
    Tape tape;
    Tensor loss;
    {
      TapeScope s(tape);
      loss = sum(x);
    }
    tape.backward(loss);
    for (double g : x.grad()) CHECK(g == 1.0);
  }
  SUBCASE("sum of squares") {
    Tensor x = Tensor::parameter({2}, {1, 2});
    Tape tape;
    Tensor loss;
    {
      TapeScope s(tape);
      loss = sum(x * x);
    }
    tape.backward(loss);
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 4.0);
  }
  SUBCASE("reuse sums contributions") {
    Tensor x = Tensor::parameter({1}, {3});
    Tape tape;
    Tensor loss;
    {
      TapeScope s(tape);
      loss = sum(x + x * 2.0 + x);
    }
    tape.backward(loss);
    CHECK(x.grad()[0] == 4.0);
  }
  SUBCASE("non-scalar loss is rejected") {
    Tensor x = Tensor::parameter({2}, {1, 2});
    Tape tape;
    Tensor y;
    {
      TapeScope s(tape);
      y = x * 2.0;
    }
    CHECK_THROWS_AS(tape.backward(y), ContractError);
  }
  SUBCASE("nothing is recorded without a tape or under NoGradScope") {
    Tensor x = Tensor::parameter({2}, {1, 2});
    Tape tape;
    {
      TapeScope s(tape);
      NoGradScope ng;
      (void)(x * 2.0);
    }
    CHECK(tape.size() == 0);
  }
}

TEST_CASE("grad_check examples") {
  Rng rng(7);
  Tensor x = random_parameter({6}, rng);
  CHECK(grad_check([&] { return sum(sigmoid(x)); }, {x}).max_relative_error < 1e-6);
  CHECK(grad_check([&] { return logsumexp(x, 0); }, {x}).max_relative_error < 1e-6);
  const auto constant = grad_check([&] { return sum(Tensor::full({2}, 3.0)) + sum(x) * 0.0; }, {x});
  CHECK(constant.max_relative_error == 0.0);
}

namespace {

using UnaryOp = std::function<Tensor(const Tensor&)>;
using BinaryOp = std::function<Tensor(const Tensor&, const Tensor&)>;

// Weighted sum so every output coordinate has a distinct adjoint.
Tensor project(const Tensor& y, const Tensor& weights) { return sum(mul(y, weights)); }

double unary_error(const UnaryOp& op, const Shape& shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Tensor x = random_parameter(shape, rng, lo, hi);
  const Tensor probe = op(x.detach());
  const Tensor w = random_tensor(probe.shape(), rng);
  return grad_check([&] { return project(op(x), w); }, {x}).max_relative_error;
}

double binary_error(const BinaryOp& op, const Shape& sa, const Shape& sb, Rng& rng,
                    double lo = -2.0, double hi = 2.0) {
  Tensor a = random_parameter(sa, rng, lo, hi);
  Tensor b = random_parameter(sb, rng, lo, hi);
  const Tensor probe = op(a.detach(), b.detach());
  const Tensor w = random_tensor(probe.shape(), rng);
  return grad_check([&] { return project(op(a, b), w); }, {a, b}).max_relative_error;
}

}  // namespace

TEST_CASE("every differentiable op passes grad_check on 100 random instances") {
  Rng rng(2024);
  const std::vector<std::pair<const char*, UnaryOp>> unary{
      {"neg", [](const Tensor& x) { return neg(x); }},
      {"exp", [](const Tensor& x) { return exp(x); }},
      {"sigmoid", [](const Tensor& x) { return sigmoid(x); }},
      {"tanh", [](const Tensor& x) { return tanh(x); }},
      {"softplus", [](const Tensor& x) { return softplus(x); }},
      {"elu", [](const Tensor& x) { return elu(x); }},
      {"clamp", [](const Tensor& x) { return clamp(x, -1.0, 1.0); }},
      {"square", [](const Tensor& x) { return square(x); }},
      {"scalar ops", [](const Tensor& x) { return x * 1.5 + 0.25; }},
      {"sum", [](const Tensor& x) { return sum(x); }},
      {"mean", [](const Tensor& x) { return mean(x); }},
      {"sum_per_sample", [](const Tensor& x) { return sum_per_sample(x); }},
      {"sum_axis", [](const Tensor& x) { return sum_axis(x, 1); }},
      {"logsumexp", [](const Tensor& x) { return logsumexp(x, 1); }},
      {"log_softmax", [](const Tensor& x) { return log_softmax(x, 2); }},
      {"slice", [](const Tensor& x) { return slice(x, 2, 1, 3); }},
      {"reshape", [](const Tensor& x) { return reshape(x, {3, 8}); }},
      {"permute", [](const Tensor& x) { return permute(x, {2, 0, 1}); }},
  };
  for (const auto& [name, op] : unary) {
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) worst = std::max(worst, unary_error(op, {2, 3, 4}, rng));
    INFO(name);
    CHECK(worst < 1e-4);
  }
  {
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      worst = std::max(worst, unary_error([](const Tensor& x) { return log(x); }, {2, 3}, rng, 0.2, 2.0));
      worst = std::max(worst, unary_error([](const Tensor& x) { return pow(x, 1.7); }, {2, 3}, rng, 0.2, 2.0));
    }
    CHECK(worst < 1e-4);
  }

  const std::vector<std::pair<const char*, BinaryOp>> binary{
      {"add", [](const Tensor& a, const Tensor& b) { return add(a, b); }},
      {"sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); }},
      {"mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); }},
      {"maximum", [](const Tensor& a, const Tensor& b) { return maximum(a, b); }},
  };
  for (const auto& [name, op] : binary) {
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      worst = std::max(worst, binary_error(op, {2, 3}, {2, 3}, rng));
      worst = std::max(worst, binary_error(op, {2, 3}, {3}, rng));
    }
    INFO(name);
    CHECK(worst < 1e-4);
  }
  {
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      worst = std::max(worst, binary_error([](const Tensor& a, const Tensor& b) { return div(a, b); },
                                           {2, 3}, {3}, rng, 0.3, 2.0));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("linear-algebra and spatial ops pass grad_check") {
  Rng rng(99);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    worst = std::max(worst, binary_error([](const Tensor& a, const Tensor& b) { return matmul(a, b); },
                                         {2, 3}, {3, 4}, rng));
  }
  CHECK(worst < 1e-4);

  for (int t = 0; t < 20; ++t) {
    Tensor x = random_parameter({2, 3}, rng);
    Tensor w = random_parameter({4, 3}, rng);
    Tensor b = random_parameter({4}, rng);
    const Tensor pw = random_tensor({2, 4}, rng);
    CHECK(grad_check([&] { return project(linear(x, w, b), pw); }, {x, w, b}).max_relative_error < 1e-4);
  }
  for (int t = 0; t < 20; ++t) {
    const std::size_t stride = 1 + t % 2, pad = t % 2;
    Tensor x = random_parameter({2, 2, 5, 5}, rng);
    Tensor w = random_parameter({3, 2, 3, 3}, rng);
    Tensor b = random_parameter({3}, rng);
    const Tensor pw = random_tensor(conv2d(x.detach(), w.detach(), b.detach(), stride, pad).shape(), rng);
    CHECK(grad_check([&] { return project(conv2d(x, w, b, stride, pad), pw); }, {x, w, b}).max_relative_error < 1e-4);
  }
  for (int t = 0; t < 20; ++t) {
    Tensor x = random_parameter({2, 2, 3, 3}, rng);
    Tensor w = random_parameter({2, 3, 4, 4}, rng);
    Tensor b = random_parameter({3}, rng);
    const Tensor pw = random_tensor(conv2d_transpose(x.detach(), w.detach(), b.detach(), 2, 1).shape(), rng);
    CHECK(grad_check([&] { return project(conv2d_transpose(x, w, b, 2, 1), pw); }, {x, w, b}).max_relative_error < 1e-4);
  }
  for (int t = 0; t < 20; ++t) {
    Tensor x = random_parameter({2, 3, 4, 4}, rng);
    const Tensor p1 = random_tensor({2, 3, 1, 1}, rng);
    const Tensor p2 = random_tensor({2, 3, 2, 2}, rng);
    const Tensor p3 = random_tensor({2, 3, 8, 8}, rng);
    CHECK(grad_check([&] { return project(global_average_pool(x), p1); }, {x}).max_relative_error < 1e-4);
    CHECK(grad_check([&] { return project(avg_pool2d(x, 2), p2); }, {x}).max_relative_error < 1e-4);
    CHECK(grad_check([&] { return project(upsample_nearest(x, 2), p3); }, {x}).max_relative_error < 1e-4);
  }
  for (int t = 0; t < 20; ++t) {
    Tensor a = random_parameter({2, 1, 3}, rng);
    Tensor b = random_parameter({2, 2, 3}, rng);
    const Tensor pw = random_tensor({2, 3, 3}, rng);
    CHECK(grad_check([&] { return project(concat({a, b}, 1), pw); }, {a, b}).max_relative_error < 1e-4);
  }
  for (int t = 0; t < 20; ++t) {
    Tensor v = random_parameter({3, 2, 3, 3}, rng);
    Tensor g = random_parameter({3}, rng, 0.5, 2.0);
    const Tensor pw = random_tensor({3, 2, 3, 3}, rng);
    CHECK(grad_check([&] { return project(weight_norm(v, g, 0), pw); }, {v, g}).max_relative_error < 1e-4);
  }
}

TEST_CASE("weight_norm gives unit-direction rows scaled by g") {
  Rng rng(1);
  const Tensor v = random_tensor({2, 3}, rng);
  const Tensor g = Tensor::from_data({2}, {2.0, 0.5});
  const Tensor w = weight_norm(v, g, 0);
  for (std::size_t r = 0; r < 2; ++r) {
    double n = 0.0;
    for (std::size_t c = 0; c < 3; ++c) n += w.at(r * 3 + c) * w.at(r * 3 + c);
    CHECK(std::abs(std::sqrt(n) - g.at(r)) < 1e-12);
  }
}

TEST_CASE("composite graph matches finite differences") {
  Rng rng(4);
  Tensor a = random_parameter({3, 4}, rng);
  Tensor b = random_parameter({4}, rng);
  auto f = [&] {
    const Tensor h = elu(a * b + 0.1);
    const Tensor s = softplus(h) * tanh(a);
    return logsumexp(reshape(s, {12}), 0) + mean(square(h));
  };
  CHECK(grad_check(f, {a, b}).max_relative_error < 1e-4);
}
