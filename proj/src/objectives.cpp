#include "ssvae/objectives.hpp"

#include "ssvae/ops.hpp"

namespace ssvae {

namespace {

double batch_mean(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  return s / static_cast<double>(t.numel());
}

Shape batch_latent_shape(std::size_t n, const Shape& latent) {
  Shape s{n};
  s.insert(s.end(), latent.begin(), latent.end());
  return s;
}

Tensor combine(const ElboTerms& t) {
  Tensor total = t.re_x;
  for (const auto& r : t.re_y) total = total + r;
  for (const auto& k : t.kl_z) total = total - k;
  return total - t.kl_u;
}

Tensor latent_kl(const DiagGaussianParams& q, const DiagGaussianParams& p, const Tensor& z,
                 KlMode mode) {
  if (mode == KlMode::Analytic) return gaussian_kl(q, p);
  return gaussian_log_prob(q, z) - gaussian_log_prob(p, z);
}

void require_levels(const LatentHierarchy& model, std::size_t k, const char* who) {
  if (model.levels() != k) {
    throw ContractError(std::string(who) + " needs a model with K = " + std::to_string(k) +
                        ", got K = " + std::to_string(model.levels()));
  }
}

}  // namespace

TermSummary summarize(const ElboTerms& terms) {
  TermSummary s;
  s.re_x = batch_mean(terms.re_x);
  for (const auto& r : terms.re_y) s.re_y += batch_mean(r);
  for (const auto& k : terms.kl_z) s.kl_z += batch_mean(k);
  s.kl_u = batch_mean(terms.kl_u);
  s.elbo = batch_mean(terms.total);
  return s;
}

ElboTerms vae_elbo(const Tensor& x, Encoder& encoder, Decoder& decoder, const Prior& prior,
                   Rng& rng) {
  const std::size_t n = x.dim(0);
  const DiagGaussianParams q = encoder.forward(x);
  const Tensor z = reparameterize(q, rng.normal_tensor(batch_latent_shape(n, encoder.latent_shape())));
  const DecoderOutput out = decoder.forward(z);
  if (!out.mixture) throw ContractError("vae_elbo needs a pixel decoder");

  ElboTerms t;
  t.re_x = dlogistic_log_prob(*out.mixture, x);
  t.kl_z.push_back(gaussian_log_prob(q, z) - prior.log_prob(z));
  t.kl_u = Tensor::zeros({n});
  t.total = combine(t);
  return t;
}

ElboTerms vae_elbo(LatentHierarchy& model, const Tensor& x, Rng& rng) {
  require_levels(model, 0, "vae_elbo");
  model.observed(x);  // shape check
  return vae_elbo(x, model.posterior_u(), model.likelihood_y1(), model.prior(), rng);
}

ElboTerms selfvae_elbo(LatentHierarchy& model, const Tensor& x, Rng& rng, KlMode mode) {
  require_levels(model, 1, "selfvae_elbo");
  const auto ys = model.observed(x);
  const Tensor& y = ys[0];
  const std::size_t n = x.dim(0);
  const Shape eps_shape = batch_latent_shape(n, model.latent_shape());

  const DiagGaussianParams q_u = model.posterior_u().forward(y);
  const Tensor u = reparameterize(q_u, rng.normal_tensor(eps_shape));
  const DiagGaussianParams q_z = model.posterior_z(1).forward(x);
  const Tensor z = reparameterize(q_z, rng.normal_tensor(eps_shape));

  const DiagGaussianParams p_z = *model.prior_z(1).forward(u, &y).gaussian;
  const MixtureLogisticParams p_x = *model.likelihood(1).forward(z, &y).mixture;
  const MixtureLogisticParams p_y = *model.likelihood_y1().forward(u).mixture;

  ElboTerms t;
  t.re_x = dlogistic_log_prob(p_x, x);
  t.re_y.push_back(dlogistic_log_prob(p_y, y));
  t.kl_z.push_back(latent_kl(q_z, p_z, z, mode));
  t.kl_u = gaussian_log_prob(q_u, u) - model.prior().log_prob(u);
  t.total = combine(t);
  return t;
}

ElboTerms hierarchical_elbo(LatentHierarchy& model, const Tensor& x, Rng& rng, KlMode mode) {
  const std::size_t k_levels = model.levels();
  // K = 0: the only latent KL is against the prior, always a sampled estimate.
  if (k_levels == 0) return vae_elbo(model, x, rng);
  const auto ys = model.observed(x);  // ys[k-1] = y_k, ys[K] = x
  const std::size_t n = x.dim(0);
  const Shape eps_shape = batch_latent_shape(n, model.latent_shape());

  const DiagGaussianParams q_u = model.posterior_u().forward(ys[0]);
  const Tensor u = reparameterize(q_u, rng.normal_tensor(eps_shape));

  ElboTerms t;
  t.re_y.push_back(dlogistic_log_prob(*model.likelihood_y1().forward(u).mixture, ys[0]));
  Tensor previous = u;
  for (std::size_t k = 1; k <= k_levels; ++k) {
    const Tensor& y_k = ys[k - 1];
    const Tensor& target = ys[k];
    const DiagGaussianParams q_z = model.posterior_z(k).forward(target);
    const Tensor z = reparameterize(q_z, rng.normal_tensor(eps_shape));
    const DiagGaussianParams p_z = *model.prior_z(k).forward(previous, &y_k).gaussian;
    t.kl_z.push_back(latent_kl(q_z, p_z, z, mode));
    const Tensor ll = dlogistic_log_prob(*model.likelihood(k).forward(z, &y_k).mixture, target);
    if (k == k_levels) {
      t.re_x = ll;
    } else {
      t.re_y.push_back(ll);
    }
    previous = z;
  }
  t.kl_u = gaussian_log_prob(q_u, u) - model.prior().log_prob(u);
  t.total = combine(t);
  return t;
}

ElboTerms model_elbo(LatentHierarchy& model, const Tensor& x, Rng& rng, KlMode mode) {
  switch (model.levels()) {
    case 0: return vae_elbo(model, x, rng);
    case 1: return selfvae_elbo(model, x, rng, mode);
    default: return hierarchical_elbo(model, x, rng, mode);
  }
}

Tensor loss_for_optimizer(const ElboTerms& terms) { return -mean(terms.total); }

void data_init(LatentHierarchy& model, const Tensor& x, Rng& rng) {
  weightnorm_init([&] { model_elbo(model, x, rng); });
}

}  // namespace ssvae
