#include <algorithm>
#include <array>
#include <cmath>

#include "ssvae/dataset.hpp"

namespace ssvae {

namespace {

using Colour = std::array<std::uint8_t, 3>;

// A small palette keeps the sprites learnable at toy scale.
constexpr std::array<Colour, 8> kPalette{{{20, 20, 30},
                                          {230, 230, 220},
                                          {200, 40, 40},
                                          {40, 160, 60},
                                          {40, 70, 200},
                                          {240, 200, 40},
                                          {150, 60, 180},
                                          {40, 190, 200}}};

void paint(ImageU8& img, std::size_t y, std::size_t x, const Colour& c) {
  for (std::size_t k = 0; k < 3; ++k) img.at(y, x, k) = c[k];
}

}  // namespace

std::vector<ImageU8> generate_sprites(std::size_t count, std::size_t size, std::uint64_t seed) {
  if (size < 4) throw DomainError("sprites need at least 4x4 pixels");
  Rng rng(seed);
  std::vector<ImageU8> out;
  out.reserve(count);
  const double s = static_cast<double>(size);
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t bg = rng.index(kPalette.size());
    ImageU8 img(size, size, 3);
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) paint(img, y, x, kPalette[bg]);
    }
    const std::size_t shapes = 1 + rng.index(3);
    for (std::size_t k = 0; k < shapes; ++k) {
      std::size_t fg = rng.index(kPalette.size() - 1);
      if (fg >= bg) ++fg;
      const Colour& colour = kPalette[fg];
      const double cy = s * (0.2 + 0.6 * rng.uniform());
      const double cx = s * (0.2 + 0.6 * rng.uniform());
      const double r = s * (0.12 + 0.18 * rng.uniform());
      const std::size_t kind = rng.index(3);
      for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
          const double dy = static_cast<double>(y) + 0.5 - cy;
          const double dx = static_cast<double>(x) + 0.5 - cx;
          bool inside = false;
          switch (kind) {
            case 0: inside = std::abs(dx) <= r && std::abs(dy) <= r; break;
            case 1: inside = dx * dx + dy * dy <= r * r; break;
            default:
              inside = (std::abs(dx) <= r && std::abs(dy) <= r / 3) ||
                       (std::abs(dy) <= r && std::abs(dx) <= r / 3);
          }
          if (inside) paint(img, y, x, colour);
        }
      }
    }
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace ssvae
