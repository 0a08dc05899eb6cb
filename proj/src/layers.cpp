#include "ssvae/layers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "ssvae/ops.hpp"

namespace ssvae {

namespace {

thread_local std::uint64_t g_init_scope = 0;
std::atomic<std::uint64_t> g_next_scope{1};

Tensor random_direction(Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = 0.05 * rng.normal();
  return Tensor::parameter(std::move(shape), std::move(v));
}

Tensor ones_param(std::size_t n) { return Tensor::parameter({n}, std::vector<double>(n, 1.0)); }
Tensor zeros_param(std::size_t n) { return Tensor::parameter({n}, std::vector<double>(n, 0.0)); }

// Sets g, b so that g * t + b has zero mean and standard deviation `scale`
// per channel, where t is the pre-activation with unit-norm directions and no bias.
void standardize(const Tensor& unit_output, Tensor& g, Tensor& b, double scale = 1.0) {
  const ChannelStats st = channel_stats(unit_output);
  auto gv = g.mutable_data();
  auto bv = b.mutable_data();
  for (std::size_t c = 0; c < gv.size(); ++c) {
    if (st.stddev[c] < 1e-8) {
      gv[c] = 1.0;
      bv[c] = -st.mean[c];
    } else {
      gv[c] = scale / st.stddev[c];
      bv[c] = -st.mean[c] * scale / st.stddev[c];
    }
  }
}

bool needs_init(std::uint64_t& init_id) {
  const std::uint64_t active = DataInitScope::active_id();
  if (active == 0 || init_id == active) return false;
  init_id = active;
  return true;
}

}  // namespace

DataInitScope::DataInitScope() : previous_(g_init_scope) { g_init_scope = g_next_scope++; }
DataInitScope::~DataInitScope() { g_init_scope = previous_; }
std::uint64_t DataInitScope::active_id() { return g_init_scope; }

ChannelStats channel_stats(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("channel_stats expects NCHW");
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  const auto v = x.data();
  ChannelStats st{std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
  const double count = static_cast<double>(n * plane);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < plane; ++p) s += v[(i * c + ch) * plane + p];
    const double m = s / count;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < plane; ++p) {
        const double d = v[(i * c + ch) * plane + p] - m;
        ss += d * d;
      }
    st.mean[ch] = m;
    st.stddev[ch] = std::sqrt(ss / count);
  }
  return st;
}

WNConv2d::WNConv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                   std::size_t stride, std::size_t pad, Rng& rng, double init_scale)
    : v_(random_direction({out_channels, in_channels, kernel, kernel}, rng)),
      g_(ones_param(out_channels)),
      b_(zeros_param(out_channels)),
      stride_(stride),
      pad_(pad),
      init_scale_(init_scale) {}

Tensor WNConv2d::effective_weight() const { return weight_norm(v_, g_, 0); }

Tensor WNConv2d::forward(const Tensor& x) {
  if (needs_init(init_id_)) {
    NoGradScope no_grad;
    const Tensor unit = conv2d(x, weight_norm(v_, Tensor::full({g_.numel()}, 1.0), 0), Tensor(),
                               stride_, pad_);
    standardize(unit, g_, b_, init_scale_);
  }
  return conv2d(x, effective_weight(), b_, stride_, pad_);
}

void WNConv2d::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".v", v_});
  out.push_back({prefix + ".g", g_});
  out.push_back({prefix + ".b", b_});
}

WNConvTranspose2d::WNConvTranspose2d(std::size_t in_channels, std::size_t out_channels,
                                     std::size_t kernel, std::size_t stride, std::size_t pad,
                                     Rng& rng)
    : v_(random_direction({in_channels, out_channels, kernel, kernel}, rng)),
      g_(ones_param(out_channels)),
      b_(zeros_param(out_channels)),
      stride_(stride),
      pad_(pad) {}

Tensor WNConvTranspose2d::effective_weight() const { return weight_norm(v_, g_, 1); }

Tensor WNConvTranspose2d::forward(const Tensor& x) {
  if (needs_init(init_id_)) {
    NoGradScope no_grad;
    const Tensor unit = conv2d_transpose(
        x, weight_norm(v_, Tensor::full({g_.numel()}, 1.0), 1), Tensor(), stride_, pad_);
    standardize(unit, g_, b_);
  }
  return conv2d_transpose(x, effective_weight(), b_, stride_, pad_);
}

void WNConvTranspose2d::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".v", v_});
  out.push_back({prefix + ".g", g_});
  out.push_back({prefix + ".b", b_});
}

ChannelAttention::ChannelAttention(std::size_t channels, std::size_t reduction, Rng& rng)
    : squeeze_(channels, std::max<std::size_t>(1, channels / std::max<std::size_t>(1, reduction)),
               1, 1, 0, rng),
      excite_(std::max<std::size_t>(1, channels / std::max<std::size_t>(1, reduction)), channels,
              1, 1, 0, rng) {}

Tensor ChannelAttention::gate(const Tensor& x) {
  return sigmoid(excite_.forward(elu(squeeze_.forward(global_average_pool(x)))));
}

Tensor ChannelAttention::forward(const Tensor& x) { return x * gate(x); }

void ChannelAttention::collect(ParameterList& out, const std::string& prefix) const {
  squeeze_.collect(out, prefix + ".squeeze");
  excite_.collect(out, prefix + ".excite");
}

DenseBlock::DenseBlock(std::size_t in_channels, std::size_t layers, std::size_t growth_rate,
                       Rng& rng)
    : out_channels_(in_channels) {
  if (growth_rate == 0) return;
  convs_.reserve(layers);
  for (std::size_t i = 0; i < layers; ++i) {
    convs_.emplace_back(out_channels_, growth_rate, 3, 1, 1, rng);
    out_channels_ += growth_rate;
  }
}

Tensor DenseBlock::forward(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("dense block expects NCHW input");
  std::vector<Tensor> features{x};
  for (auto& conv : convs_) {
    features.push_back(elu(conv.forward(concat(features, 1))));
  }
  return concat(features, 1);
}

void DenseBlock::collect(ParameterList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    convs_[i].collect(out, prefix + ".conv" + std::to_string(i));
  }
}

}  // namespace ssvae
