#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ssvae/networks.hpp"
#include "ssvae/priors.hpp"
#include "ssvae/transforms.hpp"

namespace ssvae {

enum class ModelKind { Vae, SelfVae, SelfVae3Level };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);
/// Number of self-supervised levels K for a model kind (0, 1, 2).
std::size_t levels_of(ModelKind kind);

struct ModelConfig {
  ModelKind kind = ModelKind::SelfVae;
  ImageGeometry image{3, 16, 16};
  /// d_1, d_2, ... in application order (each consumes the previous output).
  /// Must hold exactly levels_of(kind) entries.
  std::vector<TransformSpec> transforms{TransformSpec::downscale(2)};
  NetConfig net;
  PriorKind prior = PriorKind::RealNVP;
  FlowConfig flow;
  std::size_t mog_components = 10;
};

/// K-level model over observed variables y_1 (coarsest) ... y_K, y_{K+1} = x,
/// with top latent u (z_0) and one latent z_k per level:
///   q(u | y_1), q(z_k | y_{k+1}), p(u), p(y_1 | u),
///   p(z_k | y_k, z_{k-1}), p(y_{k+1} | y_k, z_k).
/// K = 0 is a plain VAE whose only latent is u and whose only data is x.
class LatentHierarchy {
 public:
  LatentHierarchy(const ModelConfig& config, std::uint64_t seed);

  std::size_t levels() const { return config_.transforms.size(); }
  const ModelConfig& config() const { return config_; }
  const Shape& latent_shape() const { return config_.net.latent_shape; }

  /// Geometry of y_k for k in 1..K+1 (k = K+1 is x).
  const ImageGeometry& geometry(std::size_t k) const { return geometries_.at(k - 1); }
  /// [y_1, ..., y_K, x] computed from x with the deterministic transforms.
  std::vector<Tensor> observed(const Tensor& x) const;

  Encoder& posterior_u() { return *q_u_; }
  Decoder& likelihood_y1() { return *p_y1_; }
  Encoder& posterior_z(std::size_t k) { return *q_z_.at(k - 1); }
  Decoder& prior_z(std::size_t k) { return *p_z_.at(k - 1); }
  Decoder& likelihood(std::size_t k) { return *p_y_.at(k - 1); }
  const Prior& prior() const { return *prior_; }

  ParameterList parameters() const;
  std::size_t parameter_count() const;

 private:
  ModelConfig config_;
  std::vector<ImageGeometry> geometries_;
  std::unique_ptr<Encoder> q_u_;
  std::unique_ptr<Decoder> p_y1_;
  std::vector<std::unique_ptr<Encoder>> q_z_;
  std::vector<std::unique_ptr<Decoder>> p_z_;
  std::vector<std::unique_ptr<Decoder>> p_y_;
  std::unique_ptr<Prior> prior_;
};

/// Pixel count D of x.
inline std::size_t data_dimension(const LatentHierarchy& model) {
  const auto& g = model.config().image;
  return g.channels * g.height * g.width;
}

}  // namespace ssvae
