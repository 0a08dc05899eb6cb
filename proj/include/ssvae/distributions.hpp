#pragma once

#include <cstddef>

#include "ssvae/rng.hpp"
#include "ssvae/tensor.hpp"

namespace ssvae {

/// Diagonal Gaussian; sigma = exp(log_sigma).
struct DiagGaussianParams {
  Tensor mu;
  Tensor log_sigma;
};

/// Mixture of discretized logistics over 8-bit values. Every tensor has the
/// data shape with the component axis appended: [..., I].
struct MixtureLogisticParams {
  Tensor logit_pi;
  Tensor mu;
  Tensor log_s;

  std::size_t num_components() const { return logit_pi.shape().back(); }
  static constexpr int num_levels = 256;
};

/// Learnable mixture-of-Gaussians prior over flat latents of size D.
struct MoGPriorParams {
  Tensor means;         // [K, D]
  Tensor log_sigmas;    // [K, D]
  Tensor logit_weights; // [K]
};

/// Lower clamp on logistic log-scales.
inline constexpr double kMinLogScale = -7.0;
inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

// Log-densities below return one value per sample: input [N, ...] -> [N].

Tensor gaussian_log_prob(const DiagGaussianParams& params, const Tensor& x);
Tensor standard_normal_log_prob(const Tensor& x);
/// z = mu + exp(log_sigma) * eps.
Tensor reparameterize(const DiagGaussianParams& params, const Tensor& eps);
/// Closed-form KL(q || p), summed over non-batch axes.
Tensor gaussian_kl(const DiagGaussianParams& q, const DiagGaussianParams& p);

/// Per-value log-probability of integer pixels x in {0..255}; output has x's shape.
Tensor dlogistic_log_prob_values(const MixtureLogisticParams& params, const Tensor& x);
/// Per-sample sum of dlogistic_log_prob_values.
Tensor dlogistic_log_prob(const MixtureLogisticParams& params, const Tensor& x);
/// Component by pi, logistic by inverse CDF, then rounded onto the pixel grid.
Tensor dlogistic_sample(const MixtureLogisticParams& params, Rng& rng);
/// Deterministic decode: centre of the most probable component.
Tensor dlogistic_mode(const MixtureLogisticParams& params);

/// z [N, ...] flattened to [N, D]; log sum_k w_k N(z | mean_k, sigma_k).
Tensor mog_log_prob(const MoGPriorParams& params, const Tensor& z);

/// Pixel value to the logistic support [-1, 1].
inline double pixel_to_unit(double v) { return v / 127.5 - 1.0; }
/// Nearest pixel value for a point of [-1, 1], clamped to {0..255}.
double unit_to_pixel(double u);

}  // namespace ssvae
