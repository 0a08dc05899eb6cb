#include "ssvae/networks.hpp"

#include "ssvae/ops.hpp"

namespace ssvae {

std::size_t scale_steps(std::size_t from, std::size_t to) {
  if (to == 0 || from < to || from % to != 0) {
    throw ShapeError("grid " + std::to_string(from) + " cannot be reduced to " + std::to_string(to));
  }
  std::size_t ratio = from / to, steps = 0;
  while (ratio > 1) {
    if (ratio % 2 != 0) {
      throw ShapeError("grid ratio " + std::to_string(from / to) + " is not a power of two");
    }
    ratio /= 2;
    ++steps;
  }
  return steps;
}

Tensor scale_pixels(const Tensor& pixels) { return pixels * (1.0 / 127.5) - 1.0; }

MixtureLogisticParams split_mixture_head(const Tensor& head, std::size_t channels,
                                         std::size_t components) {
  const std::size_t n = head.dim(0), h = head.dim(2), w = head.dim(3);
  const std::size_t block = channels * components;
  if (head.dim(1) != 3 * block) throw ShapeError("mixture head has the wrong channel count");
  auto part = [&](std::size_t k) {
    const Tensor s = reshape(slice(head, 1, k * block, (k + 1) * block), {n, channels, components, h, w});
    return permute(s, {0, 1, 3, 4, 2});
  };
  return {part(0), part(1), part(2)};
}

Stage::Stage(std::size_t in_channels, const NetConfig& cfg, Rng& rng) {
  blocks_.reserve(cfg.blocks_per_stage);
  std::size_t ch = in_channels;
  for (std::size_t b = 0; b < cfg.blocks_per_stage; ++b) {
    DenseBlock dense(ch, cfg.dense_layers, cfg.growth_rate, rng);
    const std::size_t out = dense.out_channels();
    ChannelAttention attention(out, cfg.attention_reduction, rng);
    WNConv2d transition(out, cfg.width, 1, 1, 0, rng);
    blocks_.push_back({std::move(dense), std::move(attention), std::move(transition)});
    ch = cfg.width;
  }
}

Tensor Stage::forward(const Tensor& x) {
  Tensor h = x;
  for (auto& b : blocks_) {
    h = elu(b.transition.forward(b.attention.forward(b.dense.forward(h))));
  }
  return h;
}

void Stage::collect(ParameterList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string p = prefix + ".block" + std::to_string(i);
    blocks_[i].dense.collect(out, p + ".dense");
    blocks_[i].attention.collect(out, p + ".ca");
    blocks_[i].transition.collect(out, p + ".transition");
  }
}

namespace {

constexpr double kHeadInitScale = 0.1;

NetConfig require_blocks(NetConfig cfg) {
  // The head always reads `width` channels, so every stage keeps >= 1 block.
  if (cfg.blocks_per_stage == 0) cfg.blocks_per_stage = 1;
  if (cfg.width == 0) throw ShapeError("network width must be positive");
  return cfg;
}

}  // namespace

Encoder::Encoder(const ImageGeometry& input, const Shape& latent_shape, const NetConfig& config,
                 Rng& rng)
    : input_(input),
      latent_shape_(latent_shape),
      stem_(input.channels, require_blocks(config).width, 3, 1, 1, rng),
      final_stage_(require_blocks(config).width, require_blocks(config), rng),
      head_(require_blocks(config).width, 2 * latent_shape.at(0), 3, 1, 1, rng, kHeadInitScale) {
  const NetConfig cfg = require_blocks(config);
  if (latent_shape.size() != 3) throw ShapeError("latent shape must be [C, H, W]");
  const std::size_t steps = scale_steps(input.height, latent_shape[1]);
  if (scale_steps(input.width, latent_shape[2]) != steps) {
    throw ShapeError("encoder: non-uniform downscaling between image and latent grid");
  }
  for (std::size_t s = 0; s < steps; ++s) {
    stages_.emplace_back(cfg.width, cfg, rng);
    downsamples_.emplace_back(cfg.width, cfg.width, 3, 2, 1, rng);
  }
}

DiagGaussianParams Encoder::forward(const Tensor& pixels) {
  if (pixels.rank() != 4 || pixels.dim(1) != input_.channels || pixels.dim(2) != input_.height ||
      pixels.dim(3) != input_.width) {
    throw ShapeError("encoder input " + shape_str(pixels.shape()) + " does not match its geometry");
  }
  Tensor h = elu(stem_.forward(scale_pixels(pixels)));
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    h = elu(downsamples_[s].forward(stages_[s].forward(h)));
  }
  h = head_.forward(final_stage_.forward(h));
  const std::size_t c = latent_shape_[0];
  return {slice(h, 1, 0, c), slice(h, 1, c, 2 * c)};
}

void Encoder::collect(ParameterList& out, const std::string& prefix) const {
  stem_.collect(out, prefix + ".stem");
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    stages_[s].collect(out, prefix + ".stage" + std::to_string(s));
    downsamples_[s].collect(out, prefix + ".down" + std::to_string(s));
  }
  final_stage_.collect(out, prefix + ".final");
  head_.collect(out, prefix + ".head");
}

namespace {

std::size_t head_channels(const ImageGeometry& target, OutputKind kind, std::size_t components) {
  return kind == OutputKind::Gaussian ? 2 * target.channels : 3 * target.channels * components;
}

}  // namespace

Decoder::Decoder(const Shape& latent_in, std::optional<ImageGeometry> condition,
                 const ImageGeometry& target, OutputKind kind, const NetConfig& config, Rng& rng)
    : latent_in_(latent_in),
      condition_(condition),
      target_(target),
      kind_(kind),
      components_(config.mixture_components),
      stem_(latent_in.at(0), require_blocks(config).width, 3, 1, 1, rng),
      final_stage_((condition ? 2 : 1) * require_blocks(config).width, require_blocks(config), rng),
      head_(require_blocks(config).width, head_channels(target, kind, config.mixture_components), 1,
            1, 0, rng, kHeadInitScale) {
  const NetConfig cfg = require_blocks(config);
  if (latent_in.size() != 3) throw ShapeError("latent shape must be [C, H, W]");
  if (kind == OutputKind::Mixture && components_ == 0) {
    throw ShapeError("mixture decoder needs at least one component");
  }
  const std::size_t steps = scale_steps(target.height, latent_in[1]);
  if (scale_steps(target.width, latent_in[2]) != steps) {
    throw ShapeError("decoder: non-uniform upscaling between latent and target grid");
  }
  for (std::size_t s = 0; s < steps; ++s) {
    stages_.emplace_back(cfg.width, cfg, rng);
    upsamples_.emplace_back(cfg.width, cfg.width, 4, 2, 1, rng);
  }
  if (condition) {
    // Validates that the conditioning grid is an integer rescale of the target.
    if (condition->height >= target.height) {
      scale_steps(condition->height, target.height);
    } else {
      scale_steps(target.height, condition->height);
    }
    condition_embed_.emplace(condition->channels, cfg.width, 3, 1, 1, rng);
  }
}

DecoderOutput Decoder::forward(const Tensor& latent, const Tensor* condition_pixels) {
  if (latent.rank() != 4 || latent.dim(1) != latent_in_[0] || latent.dim(2) != latent_in_[1] ||
      latent.dim(3) != latent_in_[2]) {
    throw ShapeError("decoder latent " + shape_str(latent.shape()) + " does not match " +
                     shape_str(latent_in_));
  }
  if (static_cast<bool>(condition_) != (condition_pixels != nullptr)) {
    throw ContractError("decoder conditioning input presence does not match its configuration");
  }
  Tensor h = elu(stem_.forward(latent));
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    h = elu(upsamples_[s].forward(stages_[s].forward(h)));
  }
  if (condition_) {
    const Tensor& c = *condition_pixels;
    if (c.rank() != 4 || c.dim(1) != condition_->channels || c.dim(2) != condition_->height ||
        c.dim(3) != condition_->width) {
      throw ShapeError("decoder condition " + shape_str(c.shape()) + " does not match its geometry");
    }
    Tensor scaled = scale_pixels(c);
    if (condition_->height > target_.height) {
      scaled = avg_pool2d(scaled, condition_->height / target_.height);
    } else if (condition_->height < target_.height) {
      scaled = upsample_nearest(scaled, target_.height / condition_->height);
    }
    h = concat({h, elu(condition_embed_->forward(scaled))}, 1);
  }
  const Tensor out = head_.forward(final_stage_.forward(h));
  DecoderOutput result;
  if (kind_ == OutputKind::Gaussian) {
    const std::size_t c = target_.channels;
    result.gaussian = DiagGaussianParams{slice(out, 1, 0, c), slice(out, 1, c, 2 * c)};
  } else {
    result.mixture = split_mixture_head(out, target_.channels, components_);
  }
  return result;
}

void Decoder::collect(ParameterList& out, const std::string& prefix) const {
  stem_.collect(out, prefix + ".stem");
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    stages_[s].collect(out, prefix + ".stage" + std::to_string(s));
    upsamples_[s].collect(out, prefix + ".up" + std::to_string(s));
  }
  if (condition_embed_) condition_embed_->collect(out, prefix + ".cond");
  final_stage_.collect(out, prefix + ".final");
  head_.collect(out, prefix + ".head");
}

}  // namespace ssvae
