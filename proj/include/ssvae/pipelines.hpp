#pragma once

#include <string>
#include <vector>

#include "ssvae/image.hpp"
#include "ssvae/objectives.hpp"

namespace ssvae {

enum class ReconMode {
  Generation,
  ConditionalGeneration,
  ConditionalReconstruction,
  Reconstruction1,
  Reconstruction2
};

std::string to_string(ReconMode mode);
/// gen, cond-gen, cond-recon, recon1, recon2
ReconMode parse_recon_mode(const std::string& text);

struct PipelineOptions {
  /// Use Gaussian means instead of sampling (eps = 0 everywhere).
  bool mean_latents = false;
  /// Decode pixels with the mixture mode instead of sampling.
  bool mode_pixels = false;
};

/// Which variables a mode infers (and must therefore transmit).
struct SentVariables {
  bool y = false;         // ground-truth y_K
  bool u = false;
  bool z_top = false;     // z_{K-1} (u when K = 1) inferred from y_K
  bool z_last = false;    // z_K inferred from x
};
SentVariables sent_variables(ReconMode mode, std::size_t levels);
/// y as 8-bit pixels, latents as 32-bit values; per image.
std::size_t sent_bytes(const LatentHierarchy& model, ReconMode mode);

struct ReconResult {
  std::vector<ImageU8> images;
  std::size_t sent_bytes = 0;  // per image
};

/// Ancestral sampling u -> y_1 -> z_1 -> y_2 -> ... -> x.
std::vector<ImageU8> generate(LatentHierarchy& model, Rng& rng, std::size_t n,
                              const PipelineOptions& options = {});

/// Ground-truth y_K = d(x*), z_K ~ q(z_K|x*), x ~ p(x|y_K, z_K).
std::vector<ImageU8> conditional_generation(LatentHierarchy& model,
                                            const std::vector<ImageU8>& x_star, Rng& rng,
                                            const PipelineOptions& options = {});

ReconResult reconstruct(LatentHierarchy& model, const std::vector<ImageU8>& x_star,
                        ReconMode mode, Rng& rng, const PipelineOptions& options = {});

struct Interpolation {
  std::vector<ImageU8> frames;
  std::vector<Tensor> base_points;  // v_t, each [1, latent...]
};

/// Linear path between the base-space codes of q(u|y_1) for two images.
/// Each frame is decoded from a fresh Rng(seed), so the endpoints equal a
/// Reconstruction1 of the single image under Rng(seed).
Interpolation interpolate_u(LatentHierarchy& model, const ImageU8& x_a, const ImageU8& x_b,
                            std::size_t steps, std::uint64_t seed,
                            const PipelineOptions& options = {});

/// u inferred once; every z level resampled n times from its conditional prior.
std::vector<ImageU8> resample_z_keep_u(LatentHierarchy& model, const ImageU8& x_star,
                                       std::size_t n, Rng& rng,
                                       const PipelineOptions& options = {});

struct IwaeResult {
  double nll = 0.0;  // nats per image, batch mean
  double bpd = 0.0;
  std::vector<double> log_likelihood;  // per image
};

/// Importance-weighted estimate with S samples per image.
IwaeResult iwae_nll(LatentHierarchy& model, const Tensor& x, std::size_t num_samples, Rng& rng);

/// iwae_nll over a dataset in batches; bpd averaged per image.
IwaeResult iwae_dataset(LatentHierarchy& model, const std::vector<ImageU8>& images,
                        std::size_t num_samples, std::size_t batch_size, std::uint64_t seed);

}  // namespace ssvae
