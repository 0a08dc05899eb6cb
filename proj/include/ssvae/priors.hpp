#pragma once

#include <memory>
#include <string>

#include "ssvae/distributions.hpp"
#include "ssvae/flow.hpp"
#include "ssvae/parameters.hpp"

namespace ssvae {

enum class PriorKind { Fixed, MixtureOfGaussians, RealNVP };

std::string to_string(PriorKind kind);
PriorKind parse_prior_kind(const std::string& text);

/// Marginal prior over the top latent.
class Prior {
 public:
  virtual ~Prior() = default;
  /// Per-sample log-density of z [N, C, H, W].
  virtual Tensor log_prob(const Tensor& z) const = 0;
  virtual Tensor sample(std::size_t n, Rng& rng) const = 0;
  virtual void collect(ParameterList& out, const std::string& prefix) const = 0;
  virtual PriorKind kind() const = 0;
};

class StandardNormalPrior final : public Prior {
 public:
  explicit StandardNormalPrior(Shape latent_shape) : latent_shape_(std::move(latent_shape)) {}
  Tensor log_prob(const Tensor& z) const override;
  Tensor sample(std::size_t n, Rng& rng) const override;
  void collect(ParameterList&, const std::string&) const override {}
  PriorKind kind() const override { return PriorKind::Fixed; }

 private:
  Shape latent_shape_;
};

class MixturePrior final : public Prior {
 public:
  MixturePrior(Shape latent_shape, std::size_t components, Rng& rng);
  Tensor log_prob(const Tensor& z) const override;
  Tensor sample(std::size_t n, Rng& rng) const override;
  void collect(ParameterList& out, const std::string& prefix) const override;
  PriorKind kind() const override { return PriorKind::MixtureOfGaussians; }
  const MoGPriorParams& params() const { return params_; }

 private:
  Shape latent_shape_;
  MoGPriorParams params_;
};

class FlowPrior final : public Prior {
 public:
  FlowPrior(Shape latent_shape, const FlowConfig& config, Rng& rng);
  Tensor log_prob(const Tensor& z) const override { return flow_.log_prob(z); }
  Tensor sample(std::size_t n, Rng& rng) const override { return flow_.sample(n, rng); }
  void collect(ParameterList& out, const std::string& prefix) const override {
    flow_.collect(out, prefix);
  }
  PriorKind kind() const override { return PriorKind::RealNVP; }
  const FlowStack& flow() const { return flow_; }

 private:
  FlowStack flow_;
};

std::unique_ptr<Prior> make_prior(PriorKind kind, const Shape& latent_shape,
                                  const FlowConfig& flow, std::size_t mog_components, Rng& rng);

}  // namespace ssvae
