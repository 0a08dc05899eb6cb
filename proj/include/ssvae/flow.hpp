#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "ssvae/parameters.hpp"
#include "ssvae/rng.hpp"
#include "ssvae/tensor.hpp"

namespace ssvae {

struct FlowConfig {
  std::size_t num_layers = 6;
  std::size_t hidden = 256;
};

/// Output of a flow pass: the mapped point and log|det J| per sample.
struct FlowResult {
  Tensor value;
  Tensor log_det;
};

/// Fully connected net with two ELU hidden layers.
class CouplingNet {
 public:
  CouplingNet(std::size_t dim, std::size_t hidden, Rng& rng, bool zero_output);
  Tensor forward(const Tensor& x) const;
  void collect(ParameterList& out, const std::string& prefix) const;

 private:
  Tensor w1_, b1_, w2_, b2_, w3_, b3_;
};

/// Affine coupling: the unmasked coordinates are scaled and shifted by
/// functions of the masked ones. The log-scale is bound * tanh(raw).
class CouplingLayer {
 public:
  /// `latent_shape` is [C, H, W]; the mask is a checkerboard over (H, W)
  /// with the given parity (alternating over channels when H*W == 1).
  CouplingLayer(const Shape& latent_shape, int parity, std::size_t hidden, Rng& rng,
                bool identity_init);

  FlowResult forward(const Tensor& v) const;  // v: [N, D]
  FlowResult inverse(const Tensor& z) const;  // z: [N, D]
  std::span<const double> mask() const { return mask_.data(); }
  void collect(ParameterList& out, const std::string& prefix) const;

 private:
  std::pair<Tensor, Tensor> scale_shift(const Tensor& masked) const;

  Tensor mask_;
  Tensor complement_;
  CouplingNet scale_net_;
  CouplingNet translate_net_;
  Tensor scale_bound_;
};

/// Composition f = f_L o ... o f_1 pushing a standard normal base onto the
/// latent space: the learnable prior p(z).
class FlowStack {
 public:
  FlowStack(Shape latent_shape, const FlowConfig& config, Rng& rng, bool identity_init = true);

  /// v -> z = f(v) with sum of forward log-dets.
  FlowResult forward(const Tensor& v) const;
  /// z -> v = f^{-1}(z) with sum of inverse log-dets.
  FlowResult inverse(const Tensor& z) const;
  /// log p(z) = log N(f^{-1}(z)) + log|det d f^{-1}/dz|, per sample.
  Tensor log_prob(const Tensor& z) const;
  Tensor sample(std::size_t n, Rng& rng) const;

  const Shape& latent_shape() const { return latent_shape_; }
  std::size_t latent_dim() const { return latent_dim_; }
  std::size_t num_layers() const { return layers_.size(); }
  const CouplingLayer& layer(std::size_t i) const { return layers_.at(i); }
  void collect(ParameterList& out, const std::string& prefix) const;

 private:
  Tensor flatten(const Tensor& x) const;
  Tensor unflatten(const Tensor& x) const;

  Shape latent_shape_;
  std::size_t latent_dim_;
  std::vector<CouplingLayer> layers_;
};

}  // namespace ssvae
