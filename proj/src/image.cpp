#include "ssvae/image.hpp"

#include <algorithm>
#include <cmath>

namespace ssvae {

Tensor images_to_tensor(std::span<const ImageU8> images) {
  if (images.empty()) throw ShapeError("images_to_tensor: empty batch");
  const auto& first = images.front();
  const std::size_t h = first.height, w = first.width, c = first.channels;
  std::vector<double> data(images.size() * c * h * w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& img = images[n];
    if (img.height != h || img.width != w || img.channels != c) {
      throw ShapeError("images_to_tensor: image " + std::to_string(n) + " has a different size");
    }
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          data[((n * c + ch) * h + y) * w + x] = img.at(y, x, ch);
  }
  return Tensor::from_data({images.size(), c, h, w}, std::move(data));
}

std::vector<ImageU8> tensor_to_images(const Tensor& batch) {
  if (batch.rank() != 4) throw ShapeError("tensor_to_images expects [N, C, H, W]");
  const std::size_t n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  const auto v = batch.data();
  std::vector<ImageU8> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ImageU8 img(h, w, c);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const double p = std::clamp(std::floor(v[((i * c + ch) * h + y) * w + x] + 0.5), 0.0, 255.0);
          img.at(y, x, ch) = static_cast<std::uint8_t>(p);
        }
    out.push_back(std::move(img));
  }
  return out;
}

ImageU8 make_grid(std::span<const ImageU8> images, std::size_t cols) {
  if (images.empty() || cols == 0) return {};
  const std::size_t h = images[0].height, w = images[0].width, c = images[0].channels;
  const std::size_t rows = (images.size() + cols - 1) / cols;
  const std::size_t gap = 1;
  ImageU8 grid(rows * (h + gap) + gap, cols * (w + gap) + gap, c, 0);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::size_t oy = gap + (i / cols) * (h + gap);
    const std::size_t ox = gap + (i % cols) * (w + gap);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t ch = 0; ch < c; ++ch) grid.at(oy + y, ox + x, ch) = images[i].at(y, x, ch);
  }
  return grid;
}

}  // namespace ssvae
