#include "ssvae/model.hpp"

namespace ssvae {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Vae: return "vae";
    case ModelKind::SelfVae: return "selfvae";
    case ModelKind::SelfVae3Level: return "selfvae-3lvl";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "vae") return ModelKind::Vae;
  if (text == "selfvae") return ModelKind::SelfVae;
  if (text == "selfvae-3lvl") return ModelKind::SelfVae3Level;
  throw DomainError("unknown model kind '" + text + "' (expected vae, selfvae or selfvae-3lvl)");
}

std::size_t levels_of(ModelKind kind) {
  switch (kind) {
    case ModelKind::Vae: return 0;
    case ModelKind::SelfVae: return 1;
    case ModelKind::SelfVae3Level: return 2;
  }
  return 0;
}

LatentHierarchy::LatentHierarchy(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  const std::size_t k_levels = levels_of(config_.kind);
  if (config_.transforms.size() != k_levels) {
    throw ContractError(to_string(config_.kind) + " needs " + std::to_string(k_levels) +
                        " transforms, got " + std::to_string(config_.transforms.size()));
  }
  const Shape& latent = config_.net.latent_shape;
  if (latent.size() != 3) throw ShapeError("latent shape must be [C, H, W]");
  if (config_.image.height != latent[1] << config_.net.stages ||
      config_.image.width != latent[2] << config_.net.stages) {
    throw ContractError("image " + std::to_string(config_.image.height) + "x" +
                        std::to_string(config_.image.width) + " is not the latent grid scaled by 2^" +
                        std::to_string(config_.net.stages));
  }

  // geometries_[k-1] = y_k; transforms run from x towards y_1.
  std::vector<ImageGeometry> chain{config_.image};
  for (const auto& t : config_.transforms) chain.push_back(transformed_geometry(chain.back(), t));
  geometries_.assign(chain.rbegin(), chain.rend());

  Rng rng(seed);
  q_u_ = std::make_unique<Encoder>(geometry(1), latent, config_.net, rng);
  p_y1_ = std::make_unique<Decoder>(latent, std::nullopt, geometry(1), OutputKind::Mixture,
                                    config_.net, rng);
  const ImageGeometry latent_geom{latent[0], latent[1], latent[2]};
  for (std::size_t k = 1; k <= k_levels; ++k) {
    q_z_.push_back(std::make_unique<Encoder>(geometry(k + 1), latent, config_.net, rng));
    p_z_.push_back(std::make_unique<Decoder>(latent, geometry(k), latent_geom, OutputKind::Gaussian,
                                             config_.net, rng));
    p_y_.push_back(std::make_unique<Decoder>(latent, geometry(k), geometry(k + 1),
                                             OutputKind::Mixture, config_.net, rng));
  }
  prior_ = make_prior(config_.prior, latent, config_.flow, config_.mog_components, rng);
}

std::vector<Tensor> LatentHierarchy::observed(const Tensor& x) const {
  const auto& g = config_.image;
  if (x.rank() != 4 || x.dim(1) != g.channels || x.dim(2) != g.height || x.dim(3) != g.width) {
    throw ShapeError("model input " + shape_str(x.shape()) + " does not match the image geometry");
  }
  std::vector<Tensor> chain{x};
  for (const auto& t : config_.transforms) chain.push_back(apply_transform(chain.back(), t));
  return {chain.rbegin(), chain.rend()};
}

ParameterList LatentHierarchy::parameters() const {
  ParameterList out;
  q_u_->collect(out, "q_u");
  p_y1_->collect(out, "p_y1");
  for (std::size_t k = 0; k < q_z_.size(); ++k) {
    const std::string level = std::to_string(k + 1);
    q_z_[k]->collect(out, "q_z" + level);
    p_z_[k]->collect(out, "p_z" + level);
    p_y_[k]->collect(out, "p_y" + std::to_string(k + 2));
  }
  prior_->collect(out, "prior");
  return out;
}

std::size_t LatentHierarchy::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

}  // namespace ssvae
