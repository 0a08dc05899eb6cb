#pragma once

#include <cstddef>
#include <vector>

#include "ssvae/tensor.hpp"

namespace ssvae {

/// Trailing-aligned broadcast of two shapes; throws ShapeError when incompatible.
Shape broadcast_shapes(const Shape& a, const Shape& b);

// Elementwise, broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, double b);
Tensor mul(const Tensor& a, double b);

Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor softplus(const Tensor& x);
/// ELU with alpha = 1.
Tensor elu(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor pow(const Tensor& x, double exponent);
Tensor square(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, double b) { return add(a, -b); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, b); }
inline Tensor operator*(double a, const Tensor& b) { return mul(b, a); }

// Reductions.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Sums every axis except the leading (batch) axis: [N, ...] -> [N].
Tensor sum_per_sample(const Tensor& x);
/// Removes `axis` by summation.
Tensor sum_axis(const Tensor& x, std::size_t axis);
/// Max-shifted log-sum-exp over `axis`, which is removed.
Tensor logsumexp(const Tensor& x, std::size_t axis);
/// log-softmax over `axis` (shape preserved).
Tensor log_softmax(const Tensor& x, std::size_t axis);

// Linear algebra and convolution (NCHW).
Tensor matmul(const Tensor& a, const Tensor& b);
/// x [N, in] * w[out, in]^T + b[out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
/// Zero-padded convolution; w is [out, in, kh, kw], bias may be undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride,
              std::size_t pad);
/// Adjoint of conv2d; w is [in, out, kh, kw]. Output size (H-1)*stride - 2*pad + k.
Tensor conv2d_transpose(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride,
                        std::size_t pad);
/// [N, C, H, W] -> [N, C, 1, 1].
Tensor global_average_pool(const Tensor& x);
Tensor avg_pool2d(const Tensor& x, std::size_t factor);
Tensor upsample_nearest(const Tensor& x, std::size_t factor);

// Shape manipulation.
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& order);

/// w = g * v / ||v||, the norm taken per slice along `axis` of v (g has v.dim(axis) entries).
Tensor weight_norm(const Tensor& v, const Tensor& g, std::size_t axis);

}  // namespace ssvae
