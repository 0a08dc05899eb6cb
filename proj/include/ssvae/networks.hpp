#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "ssvae/distributions.hpp"
#include "ssvae/layers.hpp"
#include "ssvae/transforms.hpp"

namespace ssvae {

struct NetConfig {
  std::size_t growth_rate = 8;
  std::size_t dense_layers = 2;      // convs inside one dense block
  std::size_t blocks_per_stage = 2;
  std::size_t stages = 2;            // stride-2 steps between the data and the latent grid
  std::size_t width = 16;            // channels between blocks
  std::size_t attention_reduction = 4;
  Shape latent_shape{8, 4, 4};       // [C, H, W]
  std::size_t mixture_components = 10;
};

/// One resolution level: dense blocks (each followed by channel attention)
/// with 1x1 ELU transitions back to `width` channels.
class Stage {
 public:
  Stage(std::size_t in_channels, const NetConfig& cfg, Rng& rng);
  Tensor forward(const Tensor& x);
  void collect(ParameterList& out, const std::string& prefix) const;

 private:
  struct Block {
    DenseBlock dense;
    ChannelAttention attention;
    WNConv2d transition;
  };
  std::vector<Block> blocks_;
};

/// q(latent | image): pixels [N, C, H, W] in 0..255 to a diagonal Gaussian
/// over [N, latent C, latent H, latent W]. Downsamples by strided convs.
class Encoder {
 public:
  Encoder(const ImageGeometry& input, const Shape& latent_shape, const NetConfig& cfg, Rng& rng);
  DiagGaussianParams forward(const Tensor& pixels);
  void collect(ParameterList& out, const std::string& prefix) const;
  const Shape& latent_shape() const { return latent_shape_; }

 private:
  ImageGeometry input_;
  Shape latent_shape_;
  WNConv2d stem_;
  std::vector<Stage> stages_;
  std::vector<WNConv2d> downsamples_;
  Stage final_stage_;
  WNConv2d head_;
};

enum class OutputKind { Gaussian, Mixture };

/// Parameters emitted by a decoder; exactly one member is set.
struct DecoderOutput {
  std::optional<DiagGaussianParams> gaussian;
  std::optional<MixtureLogisticParams> mixture;
};

/// p(target | latent [, conditioning image]). The latent is upsampled by
/// transposed convs to the target grid; the conditioning image is resized to
/// that grid, embedded, and joined by channel concatenation.
class Decoder {
 public:
  /// `target` is the image geometry (Mixture) or the latent shape as C,H,W (Gaussian).
  Decoder(const Shape& latent_in, std::optional<ImageGeometry> condition,
          const ImageGeometry& target, OutputKind kind, const NetConfig& cfg, Rng& rng);

  DecoderOutput forward(const Tensor& latent, const Tensor* condition_pixels = nullptr);
  void collect(ParameterList& out, const std::string& prefix) const;
  OutputKind kind() const { return kind_; }

 private:
  Shape latent_in_;
  std::optional<ImageGeometry> condition_;
  ImageGeometry target_;
  OutputKind kind_;
  std::size_t components_;
  WNConv2d stem_;
  std::vector<Stage> stages_;
  std::vector<WNConvTranspose2d> upsamples_;
  std::optional<WNConv2d> condition_embed_;
  Stage final_stage_;
  WNConv2d head_;
};

/// Number of stride-2 steps between two square grids; throws when the ratio
/// is not a power of two.
std::size_t scale_steps(std::size_t from, std::size_t to);

/// Maps pixels 0..255 to [-1, 1].
Tensor scale_pixels(const Tensor& pixels);

/// Splits a mixture head [N, C*3*I, H, W] into [N, C, H, W, I] parameter tensors.
MixtureLogisticParams split_mixture_head(const Tensor& head, std::size_t channels,
                                         std::size_t components);

/// Runs `forward` once with data-dependent initialization enabled.
template <class Forward>
void weightnorm_init(Forward&& forward) {
  NoGradScope no_grad;
  DataInitScope init;
  forward();
}

}  // namespace ssvae
