#pragma once

#include <vector>

#include "ssvae/model.hpp"

namespace ssvae {

/// Lower-bound decomposition. Every member is a per-sample tensor [N] in nats.
/// total = re_x + sum(re_y) - sum(kl_z) - kl_u.
struct ElboTerms {
  Tensor re_x;
  std::vector<Tensor> re_y;  // re_y[0] = log p(y_1|u), re_y[k] = log p(y_{k+1}|y_k, z_k)
  std::vector<Tensor> kl_z;
  Tensor kl_u;
  Tensor total;
};

/// Batch means of the terms, for logging.
struct TermSummary {
  double re_x = 0.0;
  double re_y = 0.0;  // summed over levels
  double kl_z = 0.0;  // summed over levels
  double kl_u = 0.0;
  double elbo = 0.0;
};
TermSummary summarize(const ElboTerms& terms);

/// How the conditional latent KL terms are estimated. Analytic is the
/// training default; Sampled uses log q(z) - log p(z) on the drawn z, which
/// makes the bound a plain log-weight (needed for importance sampling).
enum class KlMode { Analytic, Sampled };

/// Single-sample VAE bound with a learned prior: re_x = log p(x|z),
/// kl_z = {log q(z|x) - log p(z)}, re_y empty, kl_u = 0.
ElboTerms vae_elbo(const Tensor& x, Encoder& encoder, Decoder& decoder, const Prior& prior,
                   Rng& rng);
/// Same, on a K = 0 model.
ElboTerms vae_elbo(LatentHierarchy& model, const Tensor& x, Rng& rng);

/// Two-level bound. Draws eps for u first, then for z.
ElboTerms selfvae_elbo(LatentHierarchy& model, const Tensor& x, Rng& rng,
                       KlMode mode = KlMode::Analytic);

/// K-level bound, including the k = 1 latent KL against p(z_1|y_1, u).
/// Draws eps for u, then z_1..z_K. For K = 0 it defers to vae_elbo.
ElboTerms hierarchical_elbo(LatentHierarchy& model, const Tensor& x, Rng& rng,
                            KlMode mode = KlMode::Analytic);

/// Dispatches on the model depth.
ElboTerms model_elbo(LatentHierarchy& model, const Tensor& x, Rng& rng,
                     KlMode mode = KlMode::Analytic);

/// -mean(total), the minimization target.
Tensor loss_for_optimizer(const ElboTerms& terms);

/// Data-dependent weight-norm initialization from one batch.
void data_init(LatentHierarchy& model, const Tensor& x, Rng& rng);

/// nats per sample -> bits per dimension.
inline double nats_to_bpd(double nats, std::size_t dims) {
  return nats / (static_cast<double>(dims) * 0.69314718055994530942);
}

}  // namespace ssvae
