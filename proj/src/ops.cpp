#include "ssvae/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "ssvae/kernels.hpp"

namespace ssvae {

using detail::make_result;
using detail::Node;

namespace {

// Gradient buffer of a parent, or nullptr when it does not need one.
std::vector<double>* grad_of(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.grad_buffer() : nullptr;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

// Views x as [outer, dim(axis), inner].
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  require(axis < s.size(), "axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  AxisSplit out;
  for (std::size_t i = 0; i < axis; ++i) out.outer *= s[i];
  out.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) out.inner *= s[i];
  return out;
}

// Flat source index for every output element under broadcasting.
std::vector<std::size_t> broadcast_index(const Shape& src, const Shape& out) {
  const std::size_t rank = out.size();
  std::vector<std::size_t> stride(rank, 0);
  std::size_t acc = 1;
  for (std::size_t k = 0; k < src.size(); ++k) {
    const std::size_t si = src.size() - 1 - k;
    const std::size_t oi = rank - 1 - k;
    stride[oi] = (src[si] == 1) ? 0 : acc;
    acc *= src[si];
  }
  const std::size_t n = shape_numel(out);
  std::vector<std::size_t> index(n);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < n; ++i) {
    index[i] = offset;
    for (std::size_t d = rank; d-- > 0;) {
      ++counter[d];
      offset += stride[d];
      if (counter[d] < out[d]) break;
      offset -= stride[d] * counter[d];
      counter[d] = 0;
    }
  }
  return index;
}

template <class F, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, F f, DA da, DB db) {
  const Shape out_shape = broadcast_shapes(a.shape(), b.shape());
  const std::size_t n = shape_numel(out_shape);
  const bool a_full = a.shape() == out_shape;
  const bool b_full = b.shape() == out_shape;
  auto ia = std::make_shared<const std::vector<std::size_t>>(
      a_full ? std::vector<std::size_t>{} : broadcast_index(a.shape(), out_shape));
  auto ib = std::make_shared<const std::vector<std::size_t>>(
      b_full ? std::vector<std::size_t>{} : broadcast_index(b.shape(), out_shape));
  std::vector<double> out(n);
  const double* av = a.data().data();
  const double* bv = b.data().data();
  if (a_full && b_full) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i], bv[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = f(av[a_full ? i : (*ia)[i]], bv[b_full ? i : (*ib)[i]]);
    }
  }
  return make_result(out_shape, std::move(out), {a, b},
                     [ia, ib, a_full, b_full, da, db](Node& self) {
                       const auto& x = self.parents[0]->value;
                       const auto& y = self.parents[1]->value;
                       auto* gx = grad_of(self, 0);
                       auto* gy = grad_of(self, 1);
                       const std::size_t n = self.value.size();
                       for (std::size_t i = 0; i < n; ++i) {
                         const std::size_t xi = a_full ? i : (*ia)[i];
                         const std::size_t yi = b_full ? i : (*ib)[i];
                         const double g = self.grad[i];
                         if (gx) (*gx)[xi] += g * da(x[xi], y[yi], self.value[i]);
                         if (gy) (*gy)[yi] += g * db(x[xi], y[yi], self.value[i]);
                       }
                     });
}

template <class F, class D>
Tensor unary(const Tensor& x, F f, D d) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [d](Node& self) {
    auto* gx = grad_of(self, 0);
    if (!gx) return;
    const auto& xv = self.parents[0]->value;
    for (std::size_t i = 0; i < xv.size(); ++i) (*gx)[i] += self.grad[i] * d(xv[i], self.value[i]);
  });
}

inline double stable_softplus(double v) {
  return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

inline double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t k = 0; k < rank; ++k) {
    const std::size_t da = k < a.size() ? a[a.size() - 1 - k] : 1;
    const std::size_t db = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    out[rank - 1 - k] = std::max(da, db);
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double o) { return -o / y; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, [](double x, double y) { return x >= y ? x : y; },
      [](double x, double y, double) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x >= y ? 0.0 : 1.0; });
}

Tensor add(const Tensor& a, double b) {
  return unary(
      a, [b](double x) { return x + b; }, [](double, double) { return 1.0; });
}

Tensor mul(const Tensor& a, double b) {
  return unary(
      a, [b](double x) { return x * b; }, [b](double, double) { return b; });
}

Tensor neg(const Tensor& x) { return mul(x, -1.0); }

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor softplus(const Tensor& x) {
  return unary(x, stable_softplus, [](double v, double) { return stable_sigmoid(v); });
}

Tensor elu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0 ? v : std::expm1(v); },
      [](double v, double y) { return v > 0 ? 1.0 : y + 1.0; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v < lo || v > hi) ? 0.0 : 1.0; });
}

Tensor pow(const Tensor& x, double exponent) {
  return unary(
      x, [exponent](double v) { return std::pow(v, exponent); },
      [exponent](double v, double) { return exponent * std::pow(v, exponent - 1.0); });
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sum(const Tensor& x) {
  const auto v = x.data();
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  return make_result({1}, {total}, {x}, [](Node& self) {
    auto* gx = grad_of(self, 0);
    if (!gx) return;
    for (auto& g : *gx) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return mul(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum_per_sample(const Tensor& x) {
  require(x.rank() >= 1, "sum_per_sample needs a batch axis");
  const std::size_t batch = x.dim(0);
  if (x.rank() == 1) return reshape(x, {batch});
  return sum_axis(reshape(x, {batch, x.numel() / batch}), 1);
}

Tensor sum_axis(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<long>(axis));
  if (out_shape.empty()) out_shape = {1};
  const auto v = x.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < s.extent; ++e)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[o * s.inner + i] += v[(o * s.extent + e) * s.inner + i];
  return make_result(out_shape, std::move(out), {x}, [s](Node& self) {
    auto* gx = grad_of(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t e = 0; e < s.extent; ++e)
        for (std::size_t i = 0; i < s.inner; ++i)
          (*gx)[(o * s.extent + e) * s.inner + i] += self.grad[o * s.inner + i];
  });
}

Tensor logsumexp(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<long>(axis));
  if (out_shape.empty()) out_shape = {1};
  const auto v = x.data();
  std::vector<double> out(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < s.extent; ++e) m = std::max(m, v[(o * s.extent + e) * s.inner + i]);
      if (!std::isfinite(m)) {
        out[o * s.inner + i] = m;
        continue;
      }
      double acc = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) acc += std::exp(v[(o * s.extent + e) * s.inner + i] - m);
      out[o * s.inner + i] = m + std::log(acc);
    }
  }
  return make_result(out_shape, std::move(out), {x}, [s](Node& self) {
    auto* gx = grad_of(self, 0);
    if (!gx) return;
    const auto& xv = self.parents[0]->value;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const double lse = self.value[o * s.inner + i];
        const double g = self.grad[o * s.inner + i];
        for (std::size_t e = 0; e < s.extent; ++e) {
          const std::size_t k = (o * s.extent + e) * s.inner + i;
          (*gx)[k] += g * std::exp(xv[k] - lse);
        }
      }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_at(x.shape(), axis);
  const auto v = x.data();
  std::vector<double> out(v.size());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < s.extent; ++e) m = std::max(m, v[(o * s.extent + e) * s.inner + i]);
      double acc = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) acc += std::exp(v[(o * s.extent + e) * s.inner + i] - m);
      const double lse = m + std::log(acc);
      for (std::size_t e = 0; e < s.extent; ++e) {
        const std::size_t k = (o * s.extent + e) * s.inner + i;
        out[k] = v[k] - lse;
      }
    }
  return make_result(x.shape(), std::move(out), {x}, [s](Node& self) {
    auto* gx = grad_of(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        double gsum = 0.0;
        for (std::size_t e = 0; e < s.extent; ++e) gsum += self.grad[(o * s.extent + e) * s.inner + i];
        for (std::size_t e = 0; e < s.extent; ++e) {
          const std::size_t k = (o * s.extent + e) * s.inner + i;
          (*gx)[k] += self.grad[k] - std::exp(self.value[k]) * gsum;
        }
      }
  });
}

namespace {

std::vector<double> transpose2d(std::span<const double> m, std::size_t rows, std::size_t cols) {
  std::vector<double> t(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = m[r * cols + c];
  return t;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
          "matmul: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  kernels::gemm(m, n, k, a.data(), b.data(), out);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (auto* ga = grad_of(self, 0)) {
      const auto bt = transpose2d(bv, k, n);
      kernels::gemm(m, k, n, self.grad, bt, *ga);
    }
    if (auto* gb = grad_of(self, 1)) {
      const auto at = transpose2d(av, m, k);
      kernels::gemm(k, n, m, at, self.grad, *gb);
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.rank() == 2 && w.rank() == 2 && x.dim(1) == w.dim(1),
          "linear: incompatible shapes " + shape_str(x.shape()) + " and " + shape_str(w.shape()));
  require(b.numel() == w.dim(0), "linear: bias size mismatch");
  const std::size_t batch = x.dim(0), in = x.dim(1), out_dim = w.dim(0);
  std::vector<double> out(batch * out_dim);
  for (std::size_t r = 0; r < batch; ++r)
    std::copy(b.data().begin(), b.data().end(), out.begin() + static_cast<long>(r * out_dim));
  const auto wt = transpose2d(w.data(), out_dim, in);
  kernels::gemm(batch, out_dim, in, x.data(), wt, out);
  return make_result({batch, out_dim}, std::move(out), {x, w, b}, [batch, in, out_dim](Node& self) {
    const auto& xv = self.parents[0]->value;
    const auto& wv = self.parents[1]->value;
    if (auto* gx = grad_of(self, 0)) kernels::gemm(batch, in, out_dim, self.grad, wv, *gx);
    if (auto* gw = grad_of(self, 1)) {
      const auto gt = transpose2d(self.grad, batch, out_dim);
      kernels::gemm(out_dim, in, batch, gt, xv, *gw);
    }
    if (auto* gb = grad_of(self, 2)) {
      for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t c = 0; c < out_dim; ++c) (*gb)[c] += self.grad[r * out_dim + c];
    }
  });
}

namespace {

void add_bias(std::vector<double>& y, std::span<const double> bias, std::size_t batch,
              std::size_t channels, std::size_t plane) {
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < channels; ++c) {
      double* p = y.data() + (n * channels + c) * plane;
      const double bv = bias[c];
      for (std::size_t i = 0; i < plane; ++i) p[i] += bv;
    }
}

void bias_grad(std::vector<double>& gb, const std::vector<double>& gy, std::size_t batch,
               std::size_t channels, std::size_t plane) {
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < channels; ++c) {
      const double* p = gy.data() + (n * channels + c) * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      gb[c] += acc;
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  require(x.rank() == 4 && w.rank() == 4, "conv2d expects NCHW input and 4-d weights");
  require(x.dim(1) == w.dim(1), "conv2d: input has " + std::to_string(x.dim(1)) +
                                    " channels, weights expect " + std::to_string(w.dim(1)));
  require(stride >= 1, "conv2d: stride must be >= 1");
  kernels::ConvGeometry g;
  g.batch = x.dim(0);
  g.in_channels = x.dim(1);
  g.in_h = x.dim(2);
  g.in_w = x.dim(3);
  g.out_channels = w.dim(0);
  g.kernel_h = w.dim(2);
  g.kernel_w = w.dim(3);
  g.stride = stride;
  g.pad = pad;
  require(g.in_h + 2 * pad >= g.kernel_h && g.in_w + 2 * pad >= g.kernel_w,
          "conv2d: kernel larger than padded input");
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.numel() == g.out_channels, "conv2d: bias size mismatch");
  std::vector<double> out(g.output_size());
  kernels::conv2d_forward(g, x.data(), w.data(), out);
  const std::size_t plane = g.out_h() * g.out_w();
  if (has_bias) add_bias(out, bias.data(), g.batch, g.out_channels, plane);
  std::vector<Tensor> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return make_result({g.batch, g.out_channels, g.out_h(), g.out_w()}, std::move(out), inputs,
                     [g, has_bias, plane](Node& self) {
                       if (auto* gx = grad_of(self, 0))
                         kernels::conv2d_backward_input(g, self.grad, self.parents[1]->value, *gx);
                       if (auto* gw = grad_of(self, 1))
                         kernels::conv2d_backward_weight(g, self.parents[0]->value, self.grad, *gw);
                       if (has_bias) {
                         if (auto* gb = grad_of(self, 2))
                           bias_grad(*gb, self.grad, g.batch, g.out_channels, plane);
                       }
                     });
}

Tensor conv2d_transpose(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride,
                        std::size_t pad) {
  require(x.rank() == 4 && w.rank() == 4, "conv2d_transpose expects NCHW input and 4-d weights");
  require(x.dim(1) == w.dim(0), "conv2d_transpose: channel mismatch");
  require(stride >= 1, "conv2d_transpose: stride must be >= 1");
  const std::size_t k_h = w.dim(2), k_w = w.dim(3);
  const std::size_t full_h = (x.dim(2) - 1) * stride + k_h;
  const std::size_t full_w = (x.dim(3) - 1) * stride + k_w;
  require(full_h > 2 * pad && full_w > 2 * pad, "conv2d_transpose: padding too large");
  // The equivalent forward convolution maps the output back onto x.
  kernels::ConvGeometry g;
  g.batch = x.dim(0);
  g.in_channels = w.dim(1);
  g.in_h = full_h - 2 * pad;
  g.in_w = full_w - 2 * pad;
  g.out_channels = x.dim(1);
  g.kernel_h = k_h;
  g.kernel_w = k_w;
  g.stride = stride;
  g.pad = pad;
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.numel() == g.in_channels, "conv2d_transpose: bias size mismatch");
  std::vector<double> out(g.input_size(), 0.0);
  kernels::conv2d_backward_input(g, x.data(), w.data(), out);
  const std::size_t plane = g.in_h * g.in_w;
  if (has_bias) add_bias(out, bias.data(), g.batch, g.in_channels, plane);
  std::vector<Tensor> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return make_result({g.batch, g.in_channels, g.in_h, g.in_w}, std::move(out), inputs,
                     [g, has_bias, plane](Node& self) {
                       if (auto* gx = grad_of(self, 0)) {
                         std::vector<double> tmp(g.output_size());
                         kernels::conv2d_forward(g, self.grad, self.parents[1]->value, tmp);
                         for (std::size_t i = 0; i < tmp.size(); ++i) (*gx)[i] += tmp[i];
                       }
                       if (auto* gw = grad_of(self, 1))
                         kernels::conv2d_backward_weight(g, self.grad, self.parents[0]->value, *gw);
                       if (has_bias) {
                         if (auto* gb = grad_of(self, 2))
                           bias_grad(*gb, self.grad, g.batch, g.in_channels, plane);
                       }
                     });
}

Tensor global_average_pool(const Tensor& x) {
  require(x.rank() == 4, "global_average_pool expects NCHW");
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  const auto v = x.data();
  std::vector<double> out(n * c);
  for (std::size_t i = 0; i < n * c; ++i) {
    double acc = 0.0;
    for (std::size_t p = 0; p < plane; ++p) acc += v[i * plane + p];
    out[i] = acc / static_cast<double>(plane);
  }
  return make_result({n, c, 1, 1}, std::move(out), {x}, [plane](Node& self) {
    auto* gx = grad_of(self, 0);
    if (!gx) return;
    const double inv = 1.0 / static_cast<double>(plane);
    for (std::size_t i = 0; i < self.value.size(); ++i)
      for (std::size_t p = 0; p < plane; ++p) (*gx)[i * plane + p] += self.grad[i] * inv;
  });
}

Tensor avg_pool2d(const Tensor& x, std::size_t factor) {
  require(x.rank() == 4, "avg_pool2d expects NCHW");
  require(factor >= 1 && x.dim(2) % factor == 0 && x.dim(3) % factor == 0,
          "avg_pool2d: spatial size not divisible by factor");
  if (factor == 1) return x;
  const std::size_t nc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = h / factor, ow = w / factor;
  const double inv = 1.0 / static_cast<double>(factor * factor);
  const auto v = x.data();
  std::vector<double> out(nc * oh * ow, 0.0);
  for (std::size_t i = 0; i < nc; ++i)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx)
        out[(i * oh + y / factor) * ow + xx / factor] += v[(i * h + y) * w + xx] * inv;
  return make_result({x.dim(0), x.dim(1), oh, ow}, std::move(out), {x},
                     [nc, h, w, oh, ow, factor, inv](Node& self) {
                       auto* gx = grad_of(self, 0);
                       if (!gx) return;
                       for (std::size_t i = 0; i < nc; ++i)
                         for (std::size_t y = 0; y < h; ++y)
                           for (std::size_t xx = 0; xx < w; ++xx)
                             (*gx)[(i * h + y) * w + xx] +=
                                 self.grad[(i * oh + y / factor) * ow + xx / factor] * inv;
                     });
}

Tensor upsample_nearest(const Tensor& x, std::size_t factor) {
  require(x.rank() == 4 && factor >= 1, "upsample_nearest expects NCHW and factor >= 1");
  if (factor == 1) return x;
  const std::size_t nc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = h * factor, ow = w * factor;
  const auto v = x.data();
  std::vector<double> out(nc * oh * ow);
  for (std::size_t i = 0; i < nc; ++i)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx)
        out[(i * oh + y) * ow + xx] = v[(i * h + y / factor) * w + xx / factor];
  return make_result({x.dim(0), x.dim(1), oh, ow}, std::move(out), {x},
                     [nc, h, w, oh, ow, factor](Node& self) {
                       auto* gx = grad_of(self, 0);
                       if (!gx) return;
                       for (std::size_t i = 0; i < nc; ++i)
                         for (std::size_t y = 0; y < oh; ++y)
                           for (std::size_t xx = 0; xx < ow; ++xx)
                             (*gx)[(i * h + y / factor) * w + xx / factor] +=
                                 self.grad[(i * oh + y) * ow + xx];
                     });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  require(!parts.empty(), "concat of zero tensors");
  if (parts.size() == 1) return parts.front();
  const Shape& first = parts.front().shape();
  Shape out_shape = first;
  out_shape.at(axis) = 0;
  std::vector<std::size_t> extents;
  for (const auto& p : parts) {
    require(p.rank() == first.size(), "concat: rank mismatch");
    for (std::size_t d = 0; d < first.size(); ++d) {
      if (d != axis) {
        require(p.dim(d) == first[d], "concat: " + shape_str(p.shape()) + " vs " + shape_str(first) +
                                          " differ off the concat axis");
      }
    }
    extents.push_back(p.dim(axis));
    out_shape[axis] += p.dim(axis);
  }
  const AxisSplit s = split_at(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto v = parts[k].data();
    const std::size_t chunk = extents[k] * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(v.begin() + static_cast<long>(o * chunk), chunk,
                  out.begin() + static_cast<long>(o * s.extent * s.inner + offset * s.inner));
    }
    offset += extents[k];
  }
  return make_result(out_shape, std::move(out), parts, [s, extents](Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < extents.size(); ++k) {
      const std::size_t chunk = extents[k] * s.inner;
      if (auto* gp = grad_of(self, k)) {
        for (std::size_t o = 0; o < s.outer; ++o) {
          const double* src = self.grad.data() + o * s.extent * s.inner + offset * s.inner;
          double* dst = gp->data() + o * chunk;
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
      }
      offset += extents[k];
    }
  });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const AxisSplit s = split_at(x.shape(), axis);
  require(begin < end && end <= s.extent, "slice: range out of bounds");
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t chunk = (end - begin) * s.inner;
  const auto v = x.data();
  std::vector<double> out(s.outer * chunk);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(v.begin() + static_cast<long>((o * s.extent + begin) * s.inner), chunk,
                out.begin() + static_cast<long>(o * chunk));
  }
  return make_result(out_shape, std::move(out), {x}, [s, begin, chunk](Node& self) {
    auto* gx = grad_of(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      double* dst = gx->data() + (o * s.extent + begin) * s.inner;
      const double* src = self.grad.data() + o * chunk;
      for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(shape_numel(shape) == x.numel(),
          "reshape: " + shape_str(x.shape()) + " cannot become " + shape_str(shape));
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    auto* gx = grad_of(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i];
  });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
  const std::size_t rank = x.rank();
  require(order.size() == rank, "permute: order length must equal rank");
  std::vector<bool> seen(rank, false);
  for (auto o : order) {
    require(o < rank && !seen[o], "permute: order is not a permutation");
    seen[o] = true;
  }
  Shape out_shape(rank);
  for (std::size_t d = 0; d < rank; ++d) out_shape[d] = x.dim(order[d]);
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t d = rank - 1; d-- > 0;) in_stride[d] = in_stride[d + 1] * x.dim(d + 1);
  // Source index for every destination element.
  const std::size_t n = x.numel();
  auto src = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < n; ++i) {
    (*src)[i] = offset;
    for (std::size_t d = rank; d-- > 0;) {
      ++counter[d];
      offset += in_stride[order[d]];
      if (counter[d] < out_shape[d]) break;
      offset -= in_stride[order[d]] * counter[d];
      counter[d] = 0;
    }
  }
  const auto v = x.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = v[(*src)[i]];
  return make_result(out_shape, std::move(out), {x}, [src](Node& self) {
    auto* gx = grad_of(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[(*src)[i]] += self.grad[i];
  });
}

Tensor weight_norm(const Tensor& v, const Tensor& g, std::size_t axis) {
  const AxisSplit s = split_at(v.shape(), axis);
  require(g.numel() == s.extent, "weight_norm: gain count must match axis extent");
  const auto vv = v.data();
  const auto gv = g.data();
  auto norms = std::make_shared<std::vector<double>>(s.extent, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < s.extent; ++e)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const double val = vv[(o * s.extent + e) * s.inner + i];
        (*norms)[e] += val * val;
      }
  for (auto& nrm : *norms) nrm = std::sqrt(nrm);
  std::vector<double> out(vv.size());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < s.extent; ++e)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t k = (o * s.extent + e) * s.inner + i;
        out[k] = gv[e] * vv[k] / (*norms)[e];
      }
  return make_result(v.shape(), std::move(out), {v, g}, [s, norms](Node& self) {
    const auto& vv = self.parents[0]->value;
    const auto& gv = self.parents[1]->value;
    std::vector<double> dot(s.extent, 0.0);
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t e = 0; e < s.extent; ++e)
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t k = (o * s.extent + e) * s.inner + i;
          dot[e] += self.grad[k] * vv[k];
        }
    if (auto* gg = grad_of(self, 1)) {
      for (std::size_t e = 0; e < s.extent; ++e) (*gg)[e] += dot[e] / (*norms)[e];
    }
    if (auto* gvv = grad_of(self, 0)) {
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t e = 0; e < s.extent; ++e) {
          const double n = (*norms)[e];
          const double scale = gv[e] / n;
          const double proj = dot[e] / (n * n);
          for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t k = (o * s.extent + e) * s.inner + i;
            (*gvv)[k] += scale * (self.grad[k] - vv[k] * proj);
          }
        }
    }
  });
}

}  // namespace ssvae
