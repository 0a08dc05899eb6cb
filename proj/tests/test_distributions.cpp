#include <doctest.h>

#include <cmath>

#include "ssvae/distributions.hpp"
#include "ssvae/grad_check.hpp"
#include "ssvae/ops.hpp"
#include "stats.hpp"
#include "support.hpp"

using namespace ssvae;
using namespace ssvae::testing;

namespace {

double logistic_cdf(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Direct per-bin probability of pixel k under one logistic on [-1, 1].
double bin_probability(int k, double mu, double s) {
  const double c = k / 127.5 - 1.0;
  const double hi = k == 255 ? 1.0 : logistic_cdf((c + 1.0 / 255.0 - mu) / s);
  const double lo = k == 0 ? 0.0 : logistic_cdf((c - 1.0 / 255.0 - mu) / s);
  return hi - lo;
}

MixtureLogisticParams single_pixel_mixture(const std::vector<double>& logits, const std::vector<double>& mu,
                                           const std::vector<double>& log_s) {
  const std::size_t k = logits.size();
  return {Tensor::from_data({1, k}, logits), Tensor::from_data({1, k}, mu), Tensor::from_data({1, k}, log_s)};
}

}  // namespace

TEST_CASE("gaussian_log_prob values") {
  const DiagGaussianParams std1{Tensor::zeros({1, 1}), Tensor::zeros({1, 1})};
  CHECK(std::abs(gaussian_log_prob(std1, Tensor::zeros({1, 1})).item() + 0.9189385332) < 1e-9);

  Rng rng(1);
  const Tensor mu = random_tensor({1, 7}, rng);
  const DiagGaussianParams p{mu, Tensor::zeros({1, 7})};
  CHECK(std::abs(gaussian_log_prob(p, mu).item() + 7 * kHalfLog2Pi) < 1e-12);
  CHECK_THROWS_AS(gaussian_log_prob(p, Tensor::zeros({1, 6})), ShapeError);
}

TEST_CASE("gaussian density integrates to one (trapezoid oracle)") {
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    const double m = 4.0 * rng.uniform() - 2.0, ls = rng.uniform() - 0.5;
    const double sigma = std::exp(ls);
    const std::size_t n = 4001;
    std::vector<double> grid(n);
    const double lo = m - 12 * sigma, hi = m + 12 * sigma, h = (hi - lo) / (n - 1);
    for (std::size_t i = 0; i < n; ++i) grid[i] = lo + h * i;
    const DiagGaussianParams p{Tensor::full({n, 1}, m), Tensor::full({n, 1}, ls)};
    const Tensor lp = gaussian_log_prob(p, Tensor::from_data({n, 1}, grid));
    double integral = 0.0;
    for (std::size_t i = 0; i < n; ++i) integral += (i == 0 || i + 1 == n ? 0.5 : 1.0) * std::exp(lp.at(i));
    CHECK(std::abs(integral * h - 1.0) < 1e-6);
  }
}

TEST_CASE("reparameterize") {
  Rng rng(3);
  const Tensor mu = random_tensor({2, 3}, rng), ls = random_tensor({2, 3}, rng);
  const Tensor z0 = reparameterize({mu, ls}, Tensor::zeros({2, 3}));
  CHECK(max_abs_diff(z0.data(), mu.data()) == 0.0);
  const Tensor e = random_tensor({2, 3}, rng);
  const Tensor z1 = reparameterize({mu, Tensor::zeros({2, 3})}, e);
  for (std::size_t i = 0; i < 6; ++i) CHECK(z1.at(i) == mu.at(i) + e.at(i));

  Tensor pmu = random_parameter({2, 3}, rng), pls = random_parameter({2, 3}, rng, -1, 1);
  const Tensor eps = random_tensor({2, 3}, rng);
  CHECK(grad_check([&] { return mean(square(reparameterize({pmu, pls}, eps))); }, {pmu, pls})
            .max_relative_error < 1e-4);
}

TEST_CASE("gaussian_kl") {
  Rng rng(4);
  const DiagGaussianParams q{random_tensor({3, 4}, rng), random_tensor({3, 4}, rng, -1, 1)};
  const Tensor kl_self = gaussian_kl(q, q);
  for (double v : kl_self.data()) CHECK(std::abs(v) < 1e-15);

  const DiagGaussianParams q1{Tensor::full({1, 1}, 1.0), Tensor::zeros({1, 1})};
  const DiagGaussianParams p0{Tensor::zeros({1, 1}), Tensor::zeros({1, 1})};
  CHECK(std::abs(gaussian_kl(q1, p0).item() - 0.5) < 1e-15);

  // Monte-Carlo oracle: mean of log q(z) - log p(z) over z ~ q.
  for (int t = 0; t < 5; ++t) {
    const double mq = 2 * rng.uniform() - 1, lq = rng.uniform() - 0.5;
    const double mp = 2 * rng.uniform() - 1, lp = rng.uniform() - 0.5;
    const std::size_t n = 100000;
    const DiagGaussianParams qq{Tensor::full({n, 1}, mq), Tensor::full({n, 1}, lq)};
    const DiagGaussianParams pp{Tensor::full({n, 1}, mp), Tensor::full({n, 1}, lp)};
    const Tensor z = reparameterize(qq, rng.normal_tensor({n, 1}));
    const Tensor diff = gaussian_log_prob(qq, z) - gaussian_log_prob(pp, z);
    const MeanSe ms = mean_se({diff.data().begin(), diff.data().end()});
    const double exact = gaussian_kl({Tensor::full({1, 1}, mq), Tensor::full({1, 1}, lq)},
                                     {Tensor::full({1, 1}, mp), Tensor::full({1, 1}, lp)})
                             .item();
    CHECK(exact >= 0.0);
    CHECK(std::abs(ms.mean - exact) < 3 * ms.se + 1e-12);
  }
}

TEST_CASE("discretized logistic mixture sums to one over 256 bins") {
  Rng rng(5);
  const std::size_t draws = 1000, comps = 4;
  std::vector<double> lp(draws * comps), mu(draws * comps), ls(draws * comps);
  for (std::size_t i = 0; i < lp.size(); ++i) {
    lp[i] = 4 * rng.uniform() - 2;
    mu[i] = 2.4 * rng.uniform() - 1.2;
    ls[i] = -7 + 7.5 * rng.uniform();
  }
  std::vector<double> total(draws, 0.0);
  for (int v = 0; v < 256; ++v) {
    MixtureLogisticParams p{Tensor::from_data({draws, comps}, lp), Tensor::from_data({draws, comps}, mu),
                            Tensor::from_data({draws, comps}, ls)};
    const Tensor values = dlogistic_log_prob_values(p, Tensor::full({draws}, v));
    for (std::size_t i = 0; i < draws; ++i) total[i] += std::exp(values.at(i));
  }
  double worst = 0.0;
  for (double t : total) worst = std::max(worst, std::abs(t - 1.0));
  CHECK(worst < 1e-6);
}

TEST_CASE("discretized logistic matches the per-bin CDF oracle") {
  const std::vector<double> logits{0.3, -0.5, 1.1}, mu{-0.4, 0.2, 0.9}, ls{-2.5, -3.0, -1.7};
  double zsum = 0;
  for (double l : logits) zsum += std::exp(l);
  const auto p = single_pixel_mixture(logits, mu, ls);
  for (int v : {0, 1, 37, 128, 200, 254, 255}) {
    double oracle = 0.0;
    for (std::size_t c = 0; c < 3; ++c) oracle += std::exp(logits[c]) / zsum * bin_probability(v, mu[c], std::exp(ls[c]));
    const double got = dlogistic_log_prob(p, Tensor::full({1}, v)).item();
    CHECK(std::abs(got - std::log(oracle)) < 1e-9);
  }
  CHECK_THROWS_AS(dlogistic_log_prob(p, Tensor::full({1}, 256)), DomainError);
  CHECK_THROWS_AS(dlogistic_log_prob(p, Tensor::full({1}, 3.5)), DomainError);
}

TEST_CASE("discretized logistic mode location") {
  const auto p = single_pixel_mixture({0.0}, {-1.0}, {-6.0});
  int best = -1;
  double best_lp = -1e300;
  for (int v = 0; v < 256; ++v) {
    const double lp = dlogistic_log_prob(p, Tensor::full({1}, v)).item();
    if (lp > best_lp) best_lp = lp, best = v;
  }
  CHECK(best == 0);
  CHECK(dlogistic_mode(p).item() == 0.0);
}

TEST_CASE("discretized logistic gradients") {
  Rng rng(6);
  Tensor lp = random_parameter({2, 3, 2}, rng), mu = random_parameter({2, 3, 2}, rng, -1, 1),
         ls = random_parameter({2, 3, 2}, rng, -3, 0);
  const Tensor x = Tensor::from_data({2, 3}, {0, 17, 128, 200, 255, 90});
  // Some gradients are ~1e-7, so a small step drowns them in roundoff.
  CHECK(grad_check([&] { return sum(dlogistic_log_prob({lp, mu, ls}, x)); }, {lp, mu, ls}, 1e-4)
            .max_relative_error < 2e-4);
}

TEST_CASE("discretized logistic sampling") {
  SUBCASE("degenerate scale") {
    const double mu = pixel_to_unit(100);
    const auto p = single_pixel_mixture({0.0}, {mu}, {-50.0});
    Rng rng(7);
    int exact = 0;
    for (int t = 0; t < 2000; ++t) {
      const double v = dlogistic_sample(p, rng).item();
      CHECK(std::abs(v - 100.0) <= 1.0);
      exact += v == 100.0;
    }
    // log-scale is clamped at kMinLogScale, so a thin tail still spills into neighbours.
    CHECK(exact > 1900);
  }
  SUBCASE("histogram matches bin probabilities") {
    const double m = 0.1, s = 0.05;
    const std::size_t n = 100000;
    MixtureLogisticParams batch{Tensor::zeros({n, 1}), Tensor::full({n, 1}, m), Tensor::full({n, 1}, std::log(s))};
    Rng rng(8);
    const Tensor draws = dlogistic_sample(batch, rng);
    std::vector<double> observed(256, 0.0), expected(256);
    for (double v : draws.data()) {
      REQUIRE(v == std::round(v));
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 255.0);
      observed[static_cast<std::size_t>(v)] += 1.0;
    }
    for (int v = 0; v < 256; ++v) expected[v] = n * bin_probability(v, m, s);
    const auto [stat, df] = chi2_statistic(observed, expected);
    CHECK(stat < chi2_critical_99(df));
  }
  SUBCASE("seeded") {
    Rng r1(9), r2(9);
    Rng pr(10);
    MixtureLogisticParams p{random_tensor({4, 3}, pr), random_tensor({4, 3}, pr, -1, 1), random_tensor({4, 3}, pr, -4, -1)};
    const Tensor a = dlogistic_sample(p, r1), b = dlogistic_sample(p, r2);
    CHECK(max_abs_diff(a.data(), b.data()) == 0.0);
  }
}

TEST_CASE("mixture-of-Gaussians log-density") {
  Rng rng(11);
  const Tensor z = random_tensor({5, 2, 1, 2}, rng);
  SUBCASE("one component is a Gaussian") {
    const Tensor mean = random_tensor({1, 4}, rng), ls = random_tensor({1, 4}, rng, -1, 1);
    const Tensor got = mog_log_prob({mean, ls, Tensor::zeros({1})}, z);
    const Tensor flat = reshape(z, {5, 4});
    const Tensor want = gaussian_log_prob({Tensor::from_data({5, 4}, [&] {
                                             std::vector<double> v;
                                             for (int i = 0; i < 5; ++i) v.insert(v.end(), mean.data().begin(), mean.data().end());
                                             return v;
                                           }()),
                                           Tensor::from_data({5, 4}, [&] {
                                             std::vector<double> v;
                                             for (int i = 0; i < 5; ++i) v.insert(v.end(), ls.data().begin(), ls.data().end());
                                             return v;
                                           }())},
                                          flat);
    CHECK(max_abs_diff(got.data(), want.data()) < 1e-12);
  }
  SUBCASE("identical components") {
    const Tensor mean = random_tensor({1, 4}, rng), ls = random_tensor({1, 4}, rng, -1, 1);
    const Tensor one = mog_log_prob({mean, ls, Tensor::zeros({1})}, z);
    const Tensor three = mog_log_prob({concat({mean, mean, mean}, 0), concat({ls, ls, ls}, 0), Tensor::zeros({3})}, z);
    CHECK(max_abs_diff(one.data(), three.data()) < 1e-12);
  }
  SUBCASE("logsumexp bounds") {
    const std::size_t k = 4;
    const Tensor means = random_tensor({k, 4}, rng), ls = random_tensor({k, 4}, rng, -1, 1);
    const Tensor w = random_tensor({k}, rng);
    const Tensor got = mog_log_prob({means, ls, w}, z);
    double wz = 0;
    for (double v : w.data()) wz += std::exp(v);
    for (std::size_t n = 0; n < 5; ++n) {
      double best = -1e300;
      for (std::size_t c = 0; c < k; ++c) {
        double comp = std::log(std::exp(w.at(c)) / wz);
        for (std::size_t d = 0; d < 4; ++d) {
          const double s = std::exp(ls.at(c * 4 + d));
          const double e = (z.at(n * 4 + d) - means.at(c * 4 + d)) / s;
          comp += -kHalfLog2Pi - std::log(s) - 0.5 * e * e;
        }
        best = std::max(best, comp);
      }
      CHECK(got.at(n) >= best - 1e-12);
      CHECK(got.at(n) <= best + std::log(double(k)) + 1e-12);
    }
  }
  CHECK_THROWS_AS(mog_log_prob({Tensor::zeros({2, 3}), Tensor::zeros({2, 3}), Tensor::zeros({2})}, z), ShapeError);
}
