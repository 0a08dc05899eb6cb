#pragma once

#include <cmath>
#include <vector>

#include "ssvae/image.hpp"
#include "ssvae/model.hpp"
#include "ssvae/rng.hpp"

namespace ssvae::testing {

// 4x4 RGB model with growth rate 2 and a 1x1 latent grid.
inline ModelConfig tiny_config(ModelKind kind, PriorKind prior = PriorKind::RealNVP) {
  ModelConfig c;
  c.kind = kind;
  c.image = {3, 4, 4};
  c.transforms.assign(levels_of(kind), TransformSpec::downscale(2));
  c.net.growth_rate = 2;
  c.net.dense_layers = 1;
  c.net.blocks_per_stage = 1;
  c.net.stages = 2;
  c.net.width = 4;
  c.net.attention_reduction = 2;
  c.net.latent_shape = {2, 1, 1};
  c.net.mixture_components = 2;
  c.prior = prior;
  c.flow = {2, 8};
  c.mog_components = 3;
  return c;
}

// Gradient-check geometry: 4x4 images over a 2x2 latent grid, so no 3x3
// convolution runs on a 1x1 map (there only the centre taps act, and weight
// normalization over the dead taps makes the loss needlessly sharp).
inline ModelConfig gradcheck_config(ModelKind kind) {
  ModelConfig c = tiny_config(kind);
  c.net.stages = 1;
  c.net.latent_shape = {2, 2, 2};
  if (kind == ModelKind::SelfVae3Level) c.transforms = {TransformSpec::downscale(2), TransformSpec::grayscale()};
  return c;
}

inline std::vector<ImageU8> random_images(std::size_t n, std::size_t h, std::size_t w,
                                          std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ImageU8> out;
  for (std::size_t i = 0; i < n; ++i) {
    ImageU8 img(h, w, c);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.index(256));
    out.push_back(std::move(img));
  }
  return out;
}

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return Tensor::from_data(shape, std::move(v));
}

inline Tensor random_parameter(const Shape& shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return Tensor::parameter(shape, std::move(v));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace ssvae::testing
