#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ssvae/tensor.hpp"

namespace ssvae {

/// 8-bit image, interleaved HWC.
struct ImageU8 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;

  ImageU8() = default;
  ImageU8(std::size_t h, std::size_t w, std::size_t c, std::uint8_t fill = 0)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

  std::size_t size() const { return pixels.size(); }
  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * channels + c];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }
  bool operator==(const ImageU8&) const = default;
};

/// Stacks images of one size into an [N, C, H, W] tensor of values 0..255.
Tensor images_to_tensor(std::span<const ImageU8> images);
/// Inverse of images_to_tensor; values are rounded and clamped to 0..255.
std::vector<ImageU8> tensor_to_images(const Tensor& batch);

/// Tiles images (same size) into a grid with `cols` columns.
ImageU8 make_grid(std::span<const ImageU8> images, std::size_t cols);

}  // namespace ssvae
