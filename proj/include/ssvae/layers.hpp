#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ssvae/parameters.hpp"
#include "ssvae/rng.hpp"
#include "ssvae/tensor.hpp"

namespace ssvae {

/// While alive, every weight-normalized layer executed on this thread
/// re-derives its gain and bias from the statistics of its current input,
/// so that its pre-activation has zero mean and unit variance per channel.
/// Layers run in forward order, so each one sees already-initialized inputs.
class DataInitScope {
 public:
  DataInitScope();
  ~DataInitScope();
  DataInitScope(const DataInitScope&) = delete;
  DataInitScope& operator=(const DataInitScope&) = delete;

  /// Nonzero id of the innermost active scope, 0 when none.
  static std::uint64_t active_id();

 private:
  std::uint64_t previous_;
};

/// Convolution with weight w = g * v / ||v|| (norm per output channel).
/// Data-dependent init targets a per-channel spread of `init_scale`; output
/// heads use a small one so the initial distributions stay broad and centred.
class WNConv2d {
 public:
  WNConv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
           std::size_t stride, std::size_t pad, Rng& rng, double init_scale = 1.0);

  Tensor forward(const Tensor& x);
  Tensor effective_weight() const;
  std::size_t out_channels() const { return g_.numel(); }

  Tensor& direction() { return v_; }
  Tensor& gain() { return g_; }
  Tensor& bias() { return b_; }
  void collect(ParameterList& out, const std::string& prefix) const;

 private:
  Tensor v_, g_, b_;
  std::size_t stride_, pad_;
  double init_scale_;
  std::uint64_t init_id_ = 0;
};

/// Transposed convolution, weights [in, out, k, k], norm per output channel.
class WNConvTranspose2d {
 public:
  WNConvTranspose2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                    std::size_t stride, std::size_t pad, Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor effective_weight() const;

  Tensor& gain() { return g_; }
  void collect(ParameterList& out, const std::string& prefix) const;

 private:
  Tensor v_, g_, b_;
  std::size_t stride_, pad_;
  std::uint64_t init_id_ = 0;
};

/// Per-channel gate from globally pooled statistics: x * sigmoid(W2 elu(W1 gap(x))).
class ChannelAttention {
 public:
  ChannelAttention(std::size_t channels, std::size_t reduction, Rng& rng);
  Tensor forward(const Tensor& x);
  Tensor gate(const Tensor& x);

  WNConv2d& squeeze() { return squeeze_; }
  WNConv2d& excite() { return excite_; }
  void collect(ParameterList& out, const std::string& prefix) const;

 private:
  WNConv2d squeeze_;
  WNConv2d excite_;
};

/// Densely connected block: each 3x3 conv sees the concatenation of the block
/// input and all earlier outputs. Output channels = in + layers * growth.
class DenseBlock {
 public:
  DenseBlock(std::size_t in_channels, std::size_t layers, std::size_t growth_rate, Rng& rng);
  Tensor forward(const Tensor& x);
  std::size_t out_channels() const { return out_channels_; }
  void collect(ParameterList& out, const std::string& prefix) const;

 private:
  std::vector<WNConv2d> convs_;
  std::size_t out_channels_;
};

/// Measures per-channel mean and standard deviation of an NCHW tensor.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};
ChannelStats channel_stats(const Tensor& x);

}  // namespace ssvae
