#include <doctest.h>

#include <cmath>

#include "ssvae/layers.hpp"
#include "ssvae/networks.hpp"
#include "ssvae/ops.hpp"
#include "support.hpp"

using namespace ssvae;
using namespace ssvae::testing;

TEST_CASE("dense block channel bookkeeping") {
  Rng rng(1);
  const Tensor x = random_tensor({2, 3, 5, 5}, rng);
  DenseBlock none(3, 4, 0, rng);
  CHECK(none.out_channels() == 3);
  CHECK(none.forward(x).dim(1) == 3);
  DenseBlock one(3, 1, 2, rng);
  CHECK(one.out_channels() == 5);
  const Tensor y = one.forward(x);
  CHECK(y.shape() == Shape{2, 5, 5, 5});
  // The block input is passed through unchanged as the first channels.
  CHECK(max_abs_diff(slice(y, 1, 0, 3).data(), x.data()) == 0.0);
  DenseBlock three(3, 3, 4, rng);
  CHECK(three.out_channels() == 15);
  CHECK_THROWS_AS(three.forward(random_tensor({2, 4, 5, 5}, rng)), ShapeError);
}

TEST_CASE("gradient reaches the input of a deep dense block") {
  Rng rng(2);
  DenseBlock block(2, 6, 3, rng);
  Tensor x = random_parameter({1, 2, 4, 4}, rng);
  Tape tape;
  Tensor loss;
  {
    TapeScope s(tape);
    loss = sum(square(block.forward(x)));
  }
  tape.backward(loss);
  double norm = 0.0;
  for (double g : x.grad()) norm += g * g;
  CHECK(norm > 0.0);
  CHECK(std::isfinite(norm));
}

TEST_CASE("channel attention") {
  Rng rng(3);
  ChannelAttention ca(8, 4, rng);
  const Tensor x = random_tensor({2, 8, 3, 3}, rng);
  const Tensor y = ca.forward(x);
  CHECK(y.shape() == x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(std::abs(y.at(i)) <= std::abs(x.at(i)));
  // One gate per (sample, channel): the ratio is constant over positions.
  for (std::size_t nc = 0; nc < 16; ++nc) {
    const double r0 = y.at(nc * 9) / x.at(nc * 9);
    for (std::size_t p = 1; p < 9; ++p) CHECK(std::abs(y.at(nc * 9 + p) / x.at(nc * 9 + p) - r0) < 1e-12);
  }
  for (auto& b : ca.excite().bias().mutable_data()) b = 20.0;
  CHECK(max_abs_diff(ca.forward(x).data(), x.data()) < 1e-6);
}

TEST_CASE("data-dependent weight-norm initialization") {
  Rng rng(4);
  WNConv2d conv(3, 6, 3, 1, 1, rng);
  const Tensor x = random_tensor({16, 3, 8, 8}, rng, -3, 5);
  {
    DataInitScope init;
    NoGradScope ng;
    const ChannelStats st = channel_stats(conv.forward(x));
    for (std::size_t c = 0; c < 6; ++c) {
      CHECK(std::abs(st.mean[c]) < 0.1);
      CHECK(std::abs(st.stddev[c] - 1.0) < 0.1);
    }
  }
  const std::vector<double> g1(conv.gain().data().begin(), conv.gain().data().end());
  {
    DataInitScope init;
    NoGradScope ng;
    conv.forward(x);
  }
  for (std::size_t c = 0; c < 6; ++c) CHECK(std::abs(conv.gain().at(c) / g1[c] - 1.0) < 0.01);

  // Outside a scope the parameters are left alone.
  const std::vector<double> before(conv.gain().data().begin(), conv.gain().data().end());
  conv.forward(random_tensor({2, 3, 8, 8}, rng));
  CHECK(std::vector<double>(conv.gain().data().begin(), conv.gain().data().end()) == before);

  WNConv2d flat(2, 3, 1, 1, 0, rng);
  {
    DataInitScope init;
    NoGradScope ng;
    const Tensor y = flat.forward(Tensor::full({4, 2, 3, 3}, 1.7));
    for (double v : y.data()) CHECK(std::isfinite(v));
  }
  for (double g : flat.gain().data()) CHECK(g == 1.0);

  WNConv2d head(3, 4, 3, 1, 1, rng, 0.1);
  {
    DataInitScope init;
    NoGradScope ng;
    const ChannelStats st = channel_stats(head.forward(x));
    for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(st.stddev[c] - 0.1) < 0.01);
  }
}

TEST_CASE("encoder and decoder shapes") {
  Rng rng(5);
  NetConfig cfg;
  cfg.latent_shape = {16, 8, 8};
  cfg.stages = 2;
  Encoder enc({3, 32, 32}, cfg.latent_shape, cfg, rng);
  const Tensor x = images_to_tensor(random_images(2, 32, 32, 3, 6));
  const DiagGaussianParams q = enc.forward(x);
  CHECK(q.mu.shape() == Shape{2, 16, 8, 8});
  CHECK(q.log_sigma.shape() == Shape{2, 16, 8, 8});

  Decoder dec(cfg.latent_shape, ImageGeometry{3, 16, 16}, {3, 32, 32}, OutputKind::Mixture, cfg, rng);
  const Tensor y = images_to_tensor(random_images(2, 16, 16, 3, 7));
  const DecoderOutput out = dec.forward(q.mu, &y);
  REQUIRE(out.mixture);
  CHECK_FALSE(out.gaussian);
  CHECK(out.mixture->mu.shape() == Shape{2, 3, 32, 32, cfg.mixture_components});
  CHECK(out.mixture->logit_pi.shape() == out.mixture->mu.shape());
  CHECK(out.mixture->log_s.shape() == out.mixture->mu.shape());

  Decoder prior_z(cfg.latent_shape, ImageGeometry{3, 16, 16}, {16, 8, 8}, OutputKind::Gaussian, cfg, rng);
  const DecoderOutput pz = prior_z.forward(q.mu, &y);
  REQUIRE(pz.gaussian);
  CHECK(pz.gaussian->mu.shape() == Shape{2, 16, 8, 8});

  CHECK_THROWS_AS(enc.forward(y), ShapeError);
  CHECK_THROWS_AS(Encoder({3, 24, 24}, cfg.latent_shape, cfg, rng), ShapeError);
}

TEST_CASE("mixture head split") {
  // Channel-major blocks: logits, means, log-scales, each [C, I].
  const std::size_t c = 2, comps = 3;
  std::vector<double> v(3 * c * comps);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  const MixtureLogisticParams p = split_mixture_head(Tensor::from_data({1, 3 * c * comps, 1, 1}, v), c, comps);
  CHECK(p.logit_pi.shape() == Shape{1, c, 1, 1, comps});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < comps; ++i) {
      const std::size_t at = ch * comps + i;
      CHECK(p.logit_pi.at(at) == static_cast<double>(at));
      CHECK(p.mu.at(at) == static_cast<double>(c * comps + at));
      CHECK(p.log_s.at(at) == static_cast<double>(2 * c * comps + at));
    }
}

TEST_CASE("scale steps") {
  CHECK(scale_steps(32, 8) == 2);
  CHECK(scale_steps(4, 4) == 0);
  CHECK_THROWS_AS(scale_steps(12, 8), ShapeError);
  CHECK_THROWS_AS(scale_steps(24, 8), ShapeError);
}
