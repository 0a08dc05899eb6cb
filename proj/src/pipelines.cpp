#include "ssvae/pipelines.hpp"

#include <cmath>

#include "ssvae/ops.hpp"

namespace ssvae {

std::string to_string(ReconMode mode) {
  switch (mode) {
    case ReconMode::Generation: return "gen";
    case ReconMode::ConditionalGeneration: return "cond-gen";
    case ReconMode::ConditionalReconstruction: return "cond-recon";
    case ReconMode::Reconstruction1: return "recon1";
    case ReconMode::Reconstruction2: return "recon2";
  }
  return "?";
}

ReconMode parse_recon_mode(const std::string& text) {
  if (text == "gen") return ReconMode::Generation;
  if (text == "cond-gen") return ReconMode::ConditionalGeneration;
  if (text == "cond-recon") return ReconMode::ConditionalReconstruction;
  if (text == "recon1") return ReconMode::Reconstruction1;
  if (text == "recon2") return ReconMode::Reconstruction2;
  throw DomainError("unknown reconstruction mode '" + text +
                    "' (expected gen, cond-gen, cond-recon, recon1 or recon2)");
}

SentVariables sent_variables(ReconMode mode, std::size_t levels) {
  SentVariables s;
  switch (mode) {
    case ReconMode::Generation: break;
    case ReconMode::ConditionalGeneration: s.y = s.z_last = true; break;
    case ReconMode::ConditionalReconstruction:
      s.y = true;
      (levels == 1 ? s.u : s.z_top) = true;
      break;
    case ReconMode::Reconstruction1: s.u = true; break;
    case ReconMode::Reconstruction2: s.u = s.z_last = true; break;
  }
  return s;
}

namespace {

void require_selfsupervised(const LatentHierarchy& model, ReconMode mode) {
  if (model.levels() == 0) {
    throw ContractError("mode " + to_string(mode) + " needs a model with at least one level");
  }
}

}  // namespace

std::size_t sent_bytes(const LatentHierarchy& model, ReconMode mode) {
  const std::size_t k = model.levels();
  if (mode == ReconMode::ConditionalGeneration || mode == ReconMode::ConditionalReconstruction ||
      mode == ReconMode::Reconstruction2) {
    require_selfsupervised(model, mode);
  }
  const SentVariables s = sent_variables(mode, k);
  const std::size_t latent = shape_numel(model.latent_shape()) * sizeof(float);
  std::size_t bytes = 0;
  if (s.y) {
    const auto& g = model.geometry(k);
    bytes += g.channels * g.height * g.width;
  }
  bytes += latent * (static_cast<std::size_t>(s.u) + s.z_top + s.z_last);
  return bytes;
}

namespace {

Tensor draw(const DiagGaussianParams& p, Rng& rng, const PipelineOptions& o) {
  if (o.mean_latents) return p.mu;
  return reparameterize(p, rng.normal_tensor(p.mu.shape()));
}

Tensor pixels(const DecoderOutput& out, Rng& rng, const PipelineOptions& o) {
  return o.mode_pixels ? dlogistic_mode(*out.mixture) : dlogistic_sample(*out.mixture, rng);
}

/// y_1 ~ p(y_1|u), then z_k / y_{k+1} for k < stop; returns {y_stop, z_{stop-1}}.
std::pair<Tensor, Tensor> descend(LatentHierarchy& model, const Tensor& u, std::size_t stop,
                                  Rng& rng, const PipelineOptions& o) {
  Tensor y = pixels(model.likelihood_y1().forward(u), rng, o);
  Tensor prev = u;
  for (std::size_t k = 1; k < stop; ++k) {
    const Tensor z = draw(*model.prior_z(k).forward(prev, &y).gaussian, rng, o);
    y = pixels(model.likelihood(k).forward(z, &y), rng, o);
    prev = z;
  }
  return {y, prev};
}

Tensor decode_below_u(LatentHierarchy& model, const Tensor& u, Rng& rng, const PipelineOptions& o) {
  return descend(model, u, model.levels() + 1, rng, o).first;
}

Tensor tile(const Tensor& x, std::size_t times) {
  if (times == 1) return x;
  return concat(std::vector<Tensor>(times, x), 0);
}

}  // namespace

std::vector<ImageU8> generate(LatentHierarchy& model, Rng& rng, std::size_t n,
                              const PipelineOptions& options) {
  NoGradScope no_grad;
  Shape shape{n};
  shape.insert(shape.end(), model.latent_shape().begin(), model.latent_shape().end());
  const Tensor u = options.mean_latents ? Tensor::zeros(shape) : model.prior().sample(n, rng);
  return tensor_to_images(decode_below_u(model, u, rng, options));
}

std::vector<ImageU8> conditional_generation(LatentHierarchy& model,
                                            const std::vector<ImageU8>& x_star, Rng& rng,
                                            const PipelineOptions& options) {
  return reconstruct(model, x_star, ReconMode::ConditionalGeneration, rng, options).images;
}

ReconResult reconstruct(LatentHierarchy& model, const std::vector<ImageU8>& x_star,
                        ReconMode mode, Rng& rng, const PipelineOptions& options) {
  NoGradScope no_grad;
  ReconResult result;
  result.sent_bytes = sent_bytes(model, mode);
  if (mode == ReconMode::Generation) {
    result.images = generate(model, rng, x_star.size(), options);
    return result;
  }
  if (x_star.empty()) return result;
  const Tensor x = images_to_tensor(x_star);
  const auto ys = model.observed(x);
  const std::size_t k = model.levels();
  Tensor out;
  switch (mode) {
    case ReconMode::ConditionalGeneration: {
      require_selfsupervised(model, mode);
      const Tensor& y = ys[k - 1];
      const Tensor z = draw(model.posterior_z(k).forward(x), rng, options);
      out = pixels(model.likelihood(k).forward(z, &y), rng, options);
      break;
    }
    case ReconMode::ConditionalReconstruction: {
      require_selfsupervised(model, mode);
      const Tensor& y = ys[k - 1];
      const Tensor above = k == 1 ? draw(model.posterior_u().forward(y), rng, options)
                                  : draw(model.posterior_z(k - 1).forward(y), rng, options);
      const Tensor z = draw(*model.prior_z(k).forward(above, &y).gaussian, rng, options);
      out = pixels(model.likelihood(k).forward(z, &y), rng, options);
      break;
    }
    case ReconMode::Reconstruction1: {
      const Tensor u = draw(model.posterior_u().forward(ys[0]), rng, options);
      out = decode_below_u(model, u, rng, options);
      break;
    }
    case ReconMode::Reconstruction2: {
      require_selfsupervised(model, mode);
      const Tensor u = draw(model.posterior_u().forward(ys[0]), rng, options);
      const Tensor y = descend(model, u, k, rng, options).first;
      const Tensor z = draw(model.posterior_z(k).forward(x), rng, options);
      out = pixels(model.likelihood(k).forward(z, &y), rng, options);
      break;
    }
    case ReconMode::Generation: break;
  }
  result.images = tensor_to_images(out);
  return result;
}

namespace {

const FlowStack* prior_flow(const LatentHierarchy& model) {
  const auto* fp = dynamic_cast<const FlowPrior*>(&model.prior());
  return fp ? &fp->flow() : nullptr;
}

Tensor infer_u(LatentHierarchy& model, const ImageU8& image, std::uint64_t seed,
               const PipelineOptions& o) {
  Rng rng(seed);
  const Tensor x = images_to_tensor(std::span<const ImageU8>(&image, 1));
  return draw(model.posterior_u().forward(model.observed(x)[0]), rng, o);
}

}  // namespace

Interpolation interpolate_u(LatentHierarchy& model, const ImageU8& x_a, const ImageU8& x_b,
                            std::size_t steps, std::uint64_t seed, const PipelineOptions& options) {
  if (steps < 2) throw DomainError("interpolation needs at least 2 steps");
  NoGradScope no_grad;
  const Tensor u_a = infer_u(model, x_a, seed, options);
  const Tensor u_b = infer_u(model, x_b, seed, options);
  const FlowStack* flow = prior_flow(model);
  const Tensor v_a = flow ? flow->inverse(u_a).value : u_a;
  const Tensor v_b = flow ? flow->inverse(u_b).value : u_b;

  Interpolation result;
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    const Tensor v = v_a * (1.0 - t) + v_b * t;
    Tensor u;
    if (i == 0) {
      u = u_a;
    } else if (i + 1 == steps) {
      u = u_b;
    } else {
      u = flow ? flow->forward(v).value : v;
    }
    Rng rng(seed);
    if (!options.mean_latents) rng.normal_tensor(u.shape());  // the draw that inferred u
    const auto frame = tensor_to_images(decode_below_u(model, u, rng, options));
    result.frames.push_back(frame.front());
    result.base_points.push_back(v);
  }
  return result;
}

std::vector<ImageU8> resample_z_keep_u(LatentHierarchy& model, const ImageU8& x_star,
                                       std::size_t n, Rng& rng, const PipelineOptions& options) {
  NoGradScope no_grad;
  const Tensor x = images_to_tensor(std::span<const ImageU8>(&x_star, 1));
  const Tensor u = draw(model.posterior_u().forward(model.observed(x)[0]), rng, options);
  return tensor_to_images(decode_below_u(model, tile(u, n), rng, options));
}

IwaeResult iwae_nll(LatentHierarchy& model, const Tensor& x, std::size_t num_samples, Rng& rng) {
  if (num_samples == 0) throw DomainError("iwae_nll needs at least one sample");
  NoGradScope no_grad;
  const std::size_t n = x.dim(0);
  constexpr std::size_t kMaxRows = 128;
  const std::size_t chunk = std::max<std::size_t>(1, kMaxRows / std::max<std::size_t>(n, 1));

  std::vector<Tensor> rows;  // each [s, N]
  for (std::size_t done = 0; done < num_samples;) {
    const std::size_t s = std::min(chunk, num_samples - done);
    const ElboTerms t = model_elbo(model, tile(x, s), rng, KlMode::Sampled);
    rows.push_back(reshape(t.total, {s, n}));
    done += s;
  }
  const Tensor weights = rows.size() == 1 ? rows.front() : concat(rows, 0);
  const Tensor ll = logsumexp(weights, 0) - std::log(static_cast<double>(num_samples));

  IwaeResult r;
  r.log_likelihood.assign(ll.data().begin(), ll.data().end());
  double sum = 0.0;
  for (double v : r.log_likelihood) sum += v;
  r.nll = -sum / static_cast<double>(n);
  r.bpd = nats_to_bpd(r.nll, data_dimension(model));
  return r;
}

IwaeResult iwae_dataset(LatentHierarchy& model, const std::vector<ImageU8>& images,
                        std::size_t num_samples, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw DomainError("batch size must be positive");
  Rng master(seed);
  IwaeResult r;
  for (std::size_t b = 0; b < images.size(); b += batch_size) {
    const std::size_t e = std::min(images.size(), b + batch_size);
    Rng rng = master.split();
    const Tensor x = images_to_tensor(std::span<const ImageU8>(images.data() + b, e - b));
    const IwaeResult part = iwae_nll(model, x, num_samples, rng);
    r.log_likelihood.insert(r.log_likelihood.end(), part.log_likelihood.begin(),
                            part.log_likelihood.end());
  }
  double sum = 0.0;
  for (double v : r.log_likelihood) sum += v;
  r.nll = r.log_likelihood.empty() ? 0.0 : -sum / static_cast<double>(r.log_likelihood.size());
  r.bpd = nats_to_bpd(r.nll, data_dimension(model));
  return r;
}

}  // namespace ssvae
