#include "ssvae/flow.hpp"

#include <cmath>

#include "ssvae/distributions.hpp"
#include "ssvae/ops.hpp"

namespace ssvae {

namespace {

Tensor glorot(std::size_t out, std::size_t in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<double> w(out * in);
  for (auto& v : w) v = (2.0 * rng.uniform() - 1.0) * limit;
  return Tensor::parameter({out, in}, std::move(w));
}

}  // namespace

CouplingNet::CouplingNet(std::size_t dim, std::size_t hidden, Rng& rng, bool zero_output)
    : w1_(glorot(hidden, dim, rng)),
      b1_(Tensor::parameter({hidden}, std::vector<double>(hidden, 0.0))),
      w2_(glorot(hidden, hidden, rng)),
      b2_(Tensor::parameter({hidden}, std::vector<double>(hidden, 0.0))),
      w3_(zero_output ? Tensor::parameter({dim, hidden}, std::vector<double>(dim * hidden, 0.0))
                      : glorot(dim, hidden, rng)),
      b3_(Tensor::parameter({dim}, std::vector<double>(dim, 0.0))) {
  if (!zero_output) {
    auto b = b3_.mutable_data();
    for (auto& v : b) v = 0.1 * rng.normal();
  }
}

Tensor CouplingNet::forward(const Tensor& x) const {
  const Tensor h1 = elu(linear(x, w1_, b1_));
  const Tensor h2 = elu(linear(h1, w2_, b2_));
  return linear(h2, w3_, b3_);
}

void CouplingNet::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".w1", w1_});
  out.push_back({prefix + ".b1", b1_});
  out.push_back({prefix + ".w2", w2_});
  out.push_back({prefix + ".b2", b2_});
  out.push_back({prefix + ".w3", w3_});
  out.push_back({prefix + ".b3", b3_});
}

namespace {

std::vector<double> checkerboard(const Shape& latent_shape, int parity) {
  if (latent_shape.size() != 3) throw ShapeError("flow latent shape must be [C, H, W]");
  const std::size_t c = latent_shape[0], h = latent_shape[1], w = latent_shape[2];
  const bool channel_pattern = h * w == 1;
  std::vector<double> mask(c * h * w);
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t key = (channel_pattern ? ci : 0) + y + x + static_cast<std::size_t>(parity);
        mask[(ci * h + y) * w + x] = (key % 2 == 0) ? 1.0 : 0.0;
      }
  return mask;
}

}  // namespace

CouplingLayer::CouplingLayer(const Shape& latent_shape, int parity, std::size_t hidden, Rng& rng,
                             bool identity_init)
    : mask_(Tensor::from_data({shape_numel(latent_shape)}, checkerboard(latent_shape, parity))),
      complement_(add(mul(mask_, -1.0), 1.0)),
      scale_net_(shape_numel(latent_shape), hidden, rng, identity_init),
      translate_net_(shape_numel(latent_shape), hidden, rng, identity_init),
      scale_bound_(Tensor::parameter({shape_numel(latent_shape)},
                                     std::vector<double>(shape_numel(latent_shape), 1.0))) {}

std::pair<Tensor, Tensor> CouplingLayer::scale_shift(const Tensor& masked) const {
  const Tensor s = scale_bound_ * tanh(scale_net_.forward(masked)) * complement_;
  const Tensor t = translate_net_.forward(masked) * complement_;
  return {s, t};
}

FlowResult CouplingLayer::forward(const Tensor& v) const {
  const Tensor kept = v * mask_;
  auto [s, t] = scale_shift(kept);
  const Tensor z = kept + complement_ * (v * exp(s) + t);
  return {z, sum_per_sample(s)};
}

FlowResult CouplingLayer::inverse(const Tensor& z) const {
  const Tensor kept = z * mask_;
  auto [s, t] = scale_shift(kept);
  const Tensor v = kept + complement_ * ((z - t) * exp(-s));
  return {v, -sum_per_sample(s)};
}

void CouplingLayer::collect(ParameterList& out, const std::string& prefix) const {
  scale_net_.collect(out, prefix + ".scale");
  translate_net_.collect(out, prefix + ".shift");
  out.push_back({prefix + ".scale_bound", scale_bound_});
}

FlowStack::FlowStack(Shape latent_shape, const FlowConfig& config, Rng& rng, bool identity_init)
    : latent_shape_(std::move(latent_shape)), latent_dim_(shape_numel(latent_shape_)) {
  if (latent_dim_ < 2) throw ShapeError("flow prior needs at least two latent dimensions");
  layers_.reserve(config.num_layers);
  for (std::size_t i = 0; i < config.num_layers; ++i) {
    layers_.emplace_back(latent_shape_, static_cast<int>(i % 2), config.hidden, rng,
                         identity_init);
  }
}

Tensor FlowStack::flatten(const Tensor& x) const {
  if (x.rank() < 2 || x.numel() != x.dim(0) * latent_dim_) {
    throw ShapeError("flow input " + shape_str(x.shape()) + " does not match latent shape " +
                     shape_str(latent_shape_));
  }
  return x.rank() == 2 ? x : reshape(x, {x.dim(0), latent_dim_});
}

Tensor FlowStack::unflatten(const Tensor& x) const {
  Shape s{x.dim(0)};
  s.insert(s.end(), latent_shape_.begin(), latent_shape_.end());
  return reshape(x, s);
}

FlowResult FlowStack::forward(const Tensor& v) const {
  Tensor cur = flatten(v);
  Tensor log_det = Tensor::zeros({v.dim(0)});
  for (const auto& layer : layers_) {
    FlowResult r = layer.forward(cur);
    cur = r.value;
    log_det = log_det + r.log_det;
  }
  return {v.rank() == 2 ? cur : unflatten(cur), log_det};
}

FlowResult FlowStack::inverse(const Tensor& z) const {
  Tensor cur = flatten(z);
  Tensor log_det = Tensor::zeros({z.dim(0)});
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    FlowResult r = it->inverse(cur);
    cur = r.value;
    log_det = log_det + r.log_det;
  }
  return {z.rank() == 2 ? cur : unflatten(cur), log_det};
}

Tensor FlowStack::log_prob(const Tensor& z) const {
  const FlowResult r = inverse(z);
  return standard_normal_log_prob(r.value) + r.log_det;
}

Tensor FlowStack::sample(std::size_t n, Rng& rng) const {
  Shape s{n};
  s.insert(s.end(), latent_shape_.begin(), latent_shape_.end());
  return forward(rng.normal_tensor(s)).value;
}

void FlowStack::collect(ParameterList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(out, prefix + ".layer" + std::to_string(i));
  }
}

}  // namespace ssvae
