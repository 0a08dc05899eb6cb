#include "ssvae/priors.hpp"

#include <cmath>

namespace ssvae {

std::string to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::Fixed: return "fixed";
    case PriorKind::MixtureOfGaussians: return "mog";
    case PriorKind::RealNVP: return "realnvp";
  }
  return "?";
}

PriorKind parse_prior_kind(const std::string& text) {
  if (text == "fixed") return PriorKind::Fixed;
  if (text == "mog") return PriorKind::MixtureOfGaussians;
  if (text == "realnvp") return PriorKind::RealNVP;
  throw DomainError("unknown prior kind '" + text + "' (expected fixed, mog or realnvp)");
}

Tensor StandardNormalPrior::log_prob(const Tensor& z) const { return standard_normal_log_prob(z); }

Tensor StandardNormalPrior::sample(std::size_t n, Rng& rng) const {
  Shape s{n};
  s.insert(s.end(), latent_shape_.begin(), latent_shape_.end());
  return rng.normal_tensor(s);
}

MixturePrior::MixturePrior(Shape latent_shape, std::size_t components, Rng& rng)
    : latent_shape_(std::move(latent_shape)) {
  const std::size_t d = shape_numel(latent_shape_);
  std::vector<double> means(components * d);
  for (auto& m : means) m = 0.5 * rng.normal();
  params_.means = Tensor::parameter({components, d}, std::move(means));
  params_.log_sigmas = Tensor::parameter({components, d}, std::vector<double>(components * d, 0.0));
  params_.logit_weights = Tensor::parameter({components}, std::vector<double>(components, 0.0));
}

Tensor MixturePrior::log_prob(const Tensor& z) const { return mog_log_prob(params_, z); }

Tensor MixturePrior::sample(std::size_t n, Rng& rng) const {
  const std::size_t k = params_.means.dim(0), d = params_.means.dim(1);
  const auto logits = params_.logit_weights.data();
  double m = logits[0];
  for (auto l : logits) m = std::max(m, l);
  std::vector<double> w(k);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) total += (w[i] = std::exp(logits[i] - m));
  const auto mu = params_.means.data();
  const auto ls = params_.log_sigmas.data();
  std::vector<double> out(n * d);
  for (std::size_t s = 0; s < n; ++s) {
    double u = rng.uniform() * total;
    std::size_t pick = k - 1;
    for (std::size_t i = 0; i < k; ++i) {
      if (u < w[i]) {
        pick = i;
        break;
      }
      u -= w[i];
    }
    for (std::size_t j = 0; j < d; ++j) {
      out[s * d + j] = mu[pick * d + j] + std::exp(ls[pick * d + j]) * rng.normal();
    }
  }
  Shape shape{n};
  shape.insert(shape.end(), latent_shape_.begin(), latent_shape_.end());
  return Tensor::from_data(shape, std::move(out));
}

void MixturePrior::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".means", params_.means});
  out.push_back({prefix + ".log_sigmas", params_.log_sigmas});
  out.push_back({prefix + ".logit_weights", params_.logit_weights});
}

FlowPrior::FlowPrior(Shape latent_shape, const FlowConfig& config, Rng& rng)
    : flow_(std::move(latent_shape), config, rng, /*identity_init=*/true) {}

std::unique_ptr<Prior> make_prior(PriorKind kind, const Shape& latent_shape,
                                  const FlowConfig& flow, std::size_t mog_components, Rng& rng) {
  switch (kind) {
    case PriorKind::Fixed: return std::make_unique<StandardNormalPrior>(latent_shape);
    case PriorKind::MixtureOfGaussians:
      return std::make_unique<MixturePrior>(latent_shape, mog_components, rng);
    case PriorKind::RealNVP: return std::make_unique<FlowPrior>(latent_shape, flow, rng);
  }
  throw DomainError("unknown prior kind");
}

}  // namespace ssvae
