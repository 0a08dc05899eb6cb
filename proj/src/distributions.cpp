#include "ssvae/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ssvae/ops.hpp"

namespace ssvae {

namespace {

void require_same(const Shape& a, const Shape& b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": " + shape_str(a) + " vs " + shape_str(b));
}

inline double softplus(double v) {
  return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

inline double sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// log(1 - exp(-d)) for d > 0.
inline double log1mexp(double d) {
  return d < 0.6931471805599453 ? std::log(-std::expm1(-d)) : std::log1p(-std::exp(-d));
}

constexpr double kHalfBin = 1.0 / 255.0;

// Log mass of one logistic component on the bin of pixel `pixel`, with
// partial derivatives w.r.t. the component mean and (unclamped) log-scale.
struct BinMass {
  double log_p;
  double d_mu;
  double d_log_s;
};

BinMass bin_log_mass(int pixel, double mu, double log_s) {
  const bool clamped = log_s < kMinLogScale;
  const double inv_s = std::exp(-(clamped ? kMinLogScale : log_s));
  const double centre = pixel_to_unit(pixel);
  const double plus = inv_s * (centre - mu + kHalfBin);
  const double minus = inv_s * (centre - mu - kHalfBin);
  BinMass r{};
  double d_plus = 0.0, d_minus = 0.0, d_width = 0.0;
  if (pixel == 0) {
    // log sigmoid(plus)
    r.log_p = -softplus(-plus);
    d_plus = sigmoid(-plus);
  } else if (pixel == 255) {
    // log (1 - sigmoid(minus))
    r.log_p = -softplus(minus);
    d_minus = -sigmoid(minus);
  } else {
    // log(sigmoid(a) - sigmoid(b)) = -softplus(-a) - softplus(b) + log(1 - exp(-(a - b)))
    const double width = plus - minus;
    r.log_p = -softplus(-plus) - softplus(minus) + log1mexp(width);
    d_plus = sigmoid(-plus);
    d_minus = -sigmoid(minus);
    d_width = 1.0 / std::expm1(width);
  }
  // plus, minus and width all scale with inv_s; d(.)/d(log_s) = -(.).
  r.d_mu = -inv_s * (d_plus + d_minus);
  r.d_log_s = clamped ? 0.0 : -(d_plus * plus + d_minus * minus + d_width * (plus - minus));
  return r;
}

int checked_pixel(double v) {
  if (!(v >= 0.0 && v <= 255.0) || v != std::floor(v)) {
    throw DomainError("pixel value " + std::to_string(v) + " is not an integer in [0, 255]");
  }
  return static_cast<int>(v);
}

}  // namespace

double unit_to_pixel(double u) {
  const double p = std::floor((u + 1.0) * 127.5 + 0.5);
  return std::clamp(p, 0.0, 255.0);
}

Tensor gaussian_log_prob(const DiagGaussianParams& params, const Tensor& x) {
  require_same(params.mu.shape(), params.log_sigma.shape(), "gaussian params");
  require_same(params.mu.shape(), x.shape(), "gaussian_log_prob");
  const Tensor scaled = (x - params.mu) * exp(-params.log_sigma);
  const Tensor per_dim = -(params.log_sigma + square(scaled) * 0.5) - kHalfLog2Pi;
  return sum_per_sample(per_dim);
}

Tensor standard_normal_log_prob(const Tensor& x) {
  return sum_per_sample(square(x) * -0.5 - kHalfLog2Pi);
}

Tensor reparameterize(const DiagGaussianParams& params, const Tensor& eps) {
  require_same(params.mu.shape(), eps.shape(), "reparameterize");
  return params.mu + exp(params.log_sigma) * eps;
}

Tensor gaussian_kl(const DiagGaussianParams& q, const DiagGaussianParams& p) {
  require_same(q.mu.shape(), p.mu.shape(), "gaussian_kl");
  require_same(q.log_sigma.shape(), p.log_sigma.shape(), "gaussian_kl");
  // log(sp/sq) + (sq^2 + (mq - mp)^2) / (2 sp^2) - 1/2
  const Tensor inv_var_p = exp(p.log_sigma * -2.0);
  const Tensor ratio = exp((q.log_sigma - p.log_sigma) * 2.0);
  const Tensor per_dim =
      (p.log_sigma - q.log_sigma) + (ratio + square(q.mu - p.mu) * inv_var_p) * 0.5 - 0.5;
  return sum_per_sample(per_dim);
}

Tensor dlogistic_log_prob_values(const MixtureLogisticParams& params, const Tensor& x) {
  require_same(params.logit_pi.shape(), params.mu.shape(), "dlogistic params");
  require_same(params.logit_pi.shape(), params.log_s.shape(), "dlogistic params");
  Shape lead = params.mu.shape();
  if (lead.size() < 2) throw ShapeError("dlogistic params need a component axis");
  const std::size_t comps = lead.back();
  lead.pop_back();
  require_same(lead, x.shape(), "dlogistic_log_prob");

  const std::size_t n = x.numel();
  auto pixels = std::make_shared<std::vector<int>>(n);
  for (std::size_t i = 0; i < n; ++i) (*pixels)[i] = checked_pixel(x.at(i));

  const auto lp = params.logit_pi.data();
  const auto mu = params.mu.data();
  const auto ls = params.log_s.data();
  std::vector<double> out(n);
  // Cached per-component terms for the backward pass.
  auto resp = std::make_shared<std::vector<double>>(n * comps);
  auto pi = std::make_shared<std::vector<double>>(n * comps);
  auto dmu = std::make_shared<std::vector<double>>(n * comps);
  auto dls = std::make_shared<std::vector<double>>(n * comps);
  std::vector<double> log_pi(comps), joint(comps);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t base = i * comps;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < comps; ++c) m = std::max(m, lp[base + c]);
    double z = 0.0;
    for (std::size_t c = 0; c < comps; ++c) z += std::exp(lp[base + c] - m);
    const double log_z = m + std::log(z);
    double jm = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < comps; ++c) {
      log_pi[c] = lp[base + c] - log_z;
      const BinMass bm = bin_log_mass((*pixels)[i], mu[base + c], ls[base + c]);
      joint[c] = log_pi[c] + bm.log_p;
      (*dmu)[base + c] = bm.d_mu;
      (*dls)[base + c] = bm.d_log_s;
      jm = std::max(jm, joint[c]);
    }
    double acc = 0.0;
    for (std::size_t c = 0; c < comps; ++c) acc += std::exp(joint[c] - jm);
    const double total = jm + std::log(acc);
    out[i] = total;
    for (std::size_t c = 0; c < comps; ++c) {
      (*resp)[base + c] = std::exp(joint[c] - total);
      (*pi)[base + c] = std::exp(log_pi[c]);
    }
  }
  return detail::make_result(
      x.shape(), std::move(out), {params.logit_pi, params.mu, params.log_s},
      [comps, resp, pi, dmu, dls](detail::Node& self) {
        auto grad_of = [&self](std::size_t k) -> std::vector<double>* {
          auto& p = *self.parents[k];
          return p.requires_grad ? &p.grad_buffer() : nullptr;
        };
        auto* g_logit = grad_of(0);
        auto* g_mu = grad_of(1);
        auto* g_ls = grad_of(2);
        for (std::size_t i = 0; i < self.value.size(); ++i) {
          const double g = self.grad[i];
          for (std::size_t c = 0; c < comps; ++c) {
            const std::size_t k = i * comps + c;
            const double r = (*resp)[k];
            if (g_logit) (*g_logit)[k] += g * (r - (*pi)[k]);
            if (g_mu) (*g_mu)[k] += g * r * (*dmu)[k];
            if (g_ls) (*g_ls)[k] += g * r * (*dls)[k];
          }
        }
      });
}

Tensor dlogistic_log_prob(const MixtureLogisticParams& params, const Tensor& x) {
  return sum_per_sample(dlogistic_log_prob_values(params, x));
}

Tensor dlogistic_sample(const MixtureLogisticParams& params, Rng& rng) {
  const std::size_t comps = params.num_components();
  Shape lead = params.mu.shape();
  lead.pop_back();
  const std::size_t n = shape_numel(lead);
  const auto lp = params.logit_pi.data();
  const auto mu = params.mu.data();
  const auto ls = params.log_s.data();
  std::vector<double> out(n);
  std::vector<double> w(comps);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t base = i * comps;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < comps; ++c) m = std::max(m, lp[base + c]);
    double z = 0.0;
    for (std::size_t c = 0; c < comps; ++c) z += (w[c] = std::exp(lp[base + c] - m));
    double u = rng.uniform() * z;
    std::size_t pick = comps - 1;
    for (std::size_t c = 0; c < comps; ++c) {
      if (u < w[c]) {
        pick = c;
        break;
      }
      u -= w[c];
    }
    const double s = std::exp(std::max(ls[base + pick], kMinLogScale));
    double v = rng.uniform();
    v = std::clamp(v, 1e-12, 1.0 - 1e-12);
    const double sample = mu[base + pick] + s * (std::log(v) - std::log1p(-v));
    out[i] = unit_to_pixel(sample);
  }
  return Tensor::from_data(lead, std::move(out));
}

Tensor dlogistic_mode(const MixtureLogisticParams& params) {
  const std::size_t comps = params.num_components();
  Shape lead = params.mu.shape();
  lead.pop_back();
  const std::size_t n = shape_numel(lead);
  const auto lp = params.logit_pi.data();
  const auto mu = params.mu.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t base = i * comps;
    std::size_t best = 0;
    for (std::size_t c = 1; c < comps; ++c) {
      if (lp[base + c] > lp[base + best]) best = c;
    }
    out[i] = unit_to_pixel(mu[base + best]);
  }
  return Tensor::from_data(lead, std::move(out));
}

Tensor mog_log_prob(const MoGPriorParams& params, const Tensor& z) {
  if (params.means.rank() != 2) throw ShapeError("mog means must be [K, D]");
  require_same(params.means.shape(), params.log_sigmas.shape(), "mog params");
  const std::size_t k = params.means.dim(0), d = params.means.dim(1);
  if (params.logit_weights.numel() != k) throw ShapeError("mog weights must have K entries");
  const std::size_t batch = z.dim(0);
  if (z.numel() != batch * d) {
    throw ShapeError("mog_log_prob: latent of size " + std::to_string(z.numel() / batch) +
                     " vs prior dimension " + std::to_string(d));
  }
  const Tensor flat = reshape(z, {batch, 1, d});
  const Tensor scaled = (flat - params.means) * exp(-params.log_sigmas);  // [N, K, D]
  const Tensor per_dim = -(params.log_sigmas + square(scaled) * 0.5) - kHalfLog2Pi;
  const Tensor comp = sum_axis(per_dim, 2);                               // [N, K]
  const Tensor log_w = log_softmax(reshape(params.logit_weights, {k}), 0);
  return logsumexp(comp + log_w, 1);
}

}  // namespace ssvae
