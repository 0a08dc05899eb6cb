#include "ssvae/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

namespace ssvae::kernels {

namespace {

constexpr std::size_t kMr = 4;
constexpr std::size_t kNr = 8;

typedef double Vec4 __attribute__((vector_size(32)));

inline Vec4 load4(const double* p) {
  Vec4 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store4(double* p, Vec4 v) { std::memcpy(p, &v, sizeof v); }

// C[i0:i0+kMr, j0:j0+kNr] += A*B with the tile held in registers.
inline void gemm_tile(std::size_t i0, std::size_t j0, std::size_t n, std::size_t k,
                      const double* a, const double* b, double* c) {
  Vec4 acc[kMr][2];
  for (std::size_t r = 0; r < kMr; ++r) {
    acc[r][0] = load4(c + (i0 + r) * n + j0);
    acc[r][1] = load4(c + (i0 + r) * n + j0 + 4);
  }
  const double* a0 = a + i0 * k;
  for (std::size_t p = 0; p < k; ++p) {
    const Vec4 b0 = load4(b + p * n + j0);
    const Vec4 b1 = load4(b + p * n + j0 + 4);
    for (std::size_t r = 0; r < kMr; ++r) {
      const double av = a0[r * k + p];
      acc[r][0] += av * b0;
      acc[r][1] += av * b1;
    }
  }
  for (std::size_t r = 0; r < kMr; ++r) {
    store4(c + (i0 + r) * n + j0, acc[r][0]);
    store4(c + (i0 + r) * n + j0 + 4, acc[r][1]);
  }
}

// Columns [j_begin, n) of rows [row_begin, row_end), one row at a time.
inline void gemm_strip(std::size_t row_begin, std::size_t row_end, std::size_t j_begin,
                       std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = row_begin; i < row_end; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = j_begin; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// Rows [row_begin, row_end) of C += A*B. Every element accumulates its
// products in increasing p, so the result does not depend on the tiling.
inline void gemm_rows(std::size_t row_begin, std::size_t row_end, std::size_t n, std::size_t k,
                      const double* a, const double* b, double* c) {
  const std::size_t n_full = n - n % kNr;
  std::size_t i = row_begin;
  for (; i + kMr <= row_end; i += kMr) {
    for (std::size_t j = 0; j < n_full; j += kNr) gemm_tile(i, j, n, k, a, b, c);
    if (n_full < n) gemm_strip(i, i + kMr, n_full, n, k, a, b, c);
  }
  if (i < row_end) gemm_strip(i, row_end, 0, n, k, a, b, c);
}

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel_h == 1 && g.kernel_w == 1 && g.stride == 1 && g.pad == 0;
}

// Output columns [lo, hi) read inside the input row for kernel offset kx.
inline void valid_range(const ConvGeometry& g, std::size_t kx, std::size_t ow, std::size_t& lo,
                        std::size_t& hi) {
  const long pad = static_cast<long>(g.pad), s = static_cast<long>(g.stride);
  const long k = static_cast<long>(kx), w = static_cast<long>(g.in_w);
  // ox*s + k - pad in [0, w)
  long first = pad - k > 0 ? (pad - k + s - 1) / s : 0;
  long last = (w - 1 + pad - k) >= 0 ? (w - 1 + pad - k) / s + 1 : 0;
  first = std::min<long>(first, static_cast<long>(ow));
  last = std::clamp<long>(last, first, static_cast<long>(ow));
  lo = static_cast<std::size_t>(first);
  hi = static_cast<std::size_t>(last);
}

// col[(ci*kh + ky)*kw + kx][oy*ow + ox] = x[ci][oy*s + ky - pad][ox*s + kx - pad]
void im2col(const ConvGeometry& g, const double* x, double* col) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const long pad = static_cast<long>(g.pad);
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    const double* xc = x + ci * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        double* row = col + ((ci * g.kernel_h + ky) * g.kernel_w + kx) * oh * ow;
        std::size_t lo, hi;
        valid_range(g, kx, ow, lo, hi);
        const long shift = static_cast<long>(kx) - pad;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - pad;
          double* out = row + oy * ow;
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) {
            std::fill(out, out + ow, 0.0);
            continue;
          }
          const double* xrow = xc + iy * g.in_w;
          std::fill(out, out + lo, 0.0);
          if (g.stride == 1) {
            std::copy(xrow + (static_cast<long>(lo) + shift), xrow + (static_cast<long>(hi) + shift), out + lo);
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) out[ox] = xrow[static_cast<long>(ox * g.stride) + shift];
          }
          std::fill(out + hi, out + ow, 0.0);
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* col, double* x) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const long pad = static_cast<long>(g.pad);
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    double* xc = x + ci * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        const double* row = col + ((ci * g.kernel_h + ky) * g.kernel_w + kx) * oh * ow;
        std::size_t lo, hi;
        valid_range(g, kx, ow, lo, hi);
        const long shift = static_cast<long>(kx) - pad;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - pad;
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
          double* xrow = xc + iy * g.in_w;
          const double* in = row + oy * ow;
          for (std::size_t ox = lo; ox < hi; ++ox) xrow[static_cast<long>(ox * g.stride) + shift] += in[ox];
        }
      }
    }
  }
}

}  // namespace

void gemm(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
          std::span<const double> b, std::span<double> c) {
  const long blocks = static_cast<long>((m + kMr - 1) / kMr);
#pragma omp parallel for schedule(static) if (m * n * k > 32768)
  for (long blk = 0; blk < blocks; ++blk) {
    const std::size_t i = static_cast<std::size_t>(blk) * kMr;
    gemm_rows(i, std::min(m, i + kMr), n, k, a.data(), b.data(), c.data());
  }
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<double> y) {
  const std::size_t plane = g.out_h() * g.out_w();
  const std::size_t kdim = g.in_channels * g.kernel_h * g.kernel_w;
  const std::size_t in_stride = g.in_channels * g.in_h * g.in_w;
  const std::size_t out_stride = g.out_channels * plane;
  const bool pointwise = is_pointwise(g);
  const long batch = static_cast<long>(g.batch);
#pragma omp parallel
  {
    std::vector<double> col(pointwise ? 0 : kdim * plane);
#pragma omp for schedule(static)
    for (long n = 0; n < batch; ++n) {
      const double* xn = x.data() + n * in_stride;
      double* yn = y.data() + n * out_stride;
      std::fill(yn, yn + out_stride, 0.0);
      const double* src = xn;
      if (!pointwise) {
        im2col(g, xn, col.data());
        src = col.data();
      }
      gemm_rows(0, g.out_channels, plane, kdim, w.data(), src, yn);
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> dy,
                           std::span<const double> w, std::span<double> dx) {
  const std::size_t plane = g.out_h() * g.out_w();
  const std::size_t kdim = g.in_channels * g.kernel_h * g.kernel_w;
  const std::size_t in_stride = g.in_channels * g.in_h * g.in_w;
  const std::size_t out_stride = g.out_channels * plane;
  const bool pointwise = is_pointwise(g);
  const long batch = static_cast<long>(g.batch);
  // wt[kk, co] = w[co, kk]
  std::vector<double> wt(kdim * g.out_channels);
  for (std::size_t co = 0; co < g.out_channels; ++co)
    for (std::size_t kk = 0; kk < kdim; ++kk) wt[kk * g.out_channels + co] = w[co * kdim + kk];
#pragma omp parallel
  {
    std::vector<double> col(pointwise ? 0 : kdim * plane);
#pragma omp for schedule(static)
    for (long n = 0; n < batch; ++n) {
      const double* dyn = dy.data() + n * out_stride;
      double* dxn = dx.data() + n * in_stride;
      // dcol[kk, :] = sum_co w[co, kk] * dy[co, :]
      double* dcol = pointwise ? dxn : col.data();
      if (!pointwise) std::fill(col.begin(), col.end(), 0.0);
      gemm_rows(0, kdim, plane, g.out_channels, wt.data(), dyn, dcol);
      if (!pointwise) col2im_add(g, col.data(), dxn);
    }
  }
}

void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dw) {
  const std::size_t plane = g.out_h() * g.out_w();
  const std::size_t kdim = g.in_channels * g.kernel_h * g.kernel_w;
  const std::size_t in_stride = g.in_channels * g.in_h * g.in_w;
  const std::size_t out_stride = g.out_channels * plane;
  const bool pointwise = is_pointwise(g);
  std::vector<double> col(pointwise ? 0 : kdim * plane);
  std::vector<double> colt(plane * kdim);
  std::vector<double> partial(g.out_channels * kdim);
  const long blocks = static_cast<long>((g.out_channels + kMr - 1) / kMr);
  for (std::size_t n = 0; n < g.batch; ++n) {
    const double* xn = x.data() + n * in_stride;
    const double* dyn = dy.data() + n * out_stride;
    const double* src = xn;
    if (!pointwise) {
      im2col(g, xn, col.data());
      src = col.data();
    }
    for (std::size_t kk = 0; kk < kdim; ++kk)
      for (std::size_t p = 0; p < plane; ++p) colt[p * kdim + kk] = src[kk * plane + p];
    // Per sample: partial[co, kk] = sum_p dy[co, p] * col[kk, p], then dw += partial.
    std::fill(partial.begin(), partial.end(), 0.0);
#pragma omp parallel for schedule(static) if (g.out_channels * kdim * plane > 32768)
    for (long blk = 0; blk < blocks; ++blk) {
      const std::size_t i = static_cast<std::size_t>(blk) * kMr;
      gemm_rows(i, std::min(g.out_channels, i + kMr), kdim, plane, dyn, colt.data(), partial.data());
    }
    for (std::size_t i = 0; i < partial.size(); ++i) dw[i] += partial[i];
  }
}

}  // namespace ssvae::kernels
