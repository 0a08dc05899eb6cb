#include "ssvae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "ssvae/png_io.hpp"

namespace ssvae {

namespace fs = std::filesystem;

std::vector<std::string> list_pngs(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw DatasetError("not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ImageU8> load_png_directory(const std::string& dir, const IngestOptions& options) {
  const auto paths = list_pngs(dir);
  if (paths.empty()) throw DatasetError("no PNG files in " + dir);
  std::vector<ImageU8> images;
  std::vector<std::string> problems;
  for (const auto& path : paths) {
    try {
      ImageU8 img = read_png(path);
      if (options.crop) img = center_crop_faces(img);
      if (options.resize) img = resize_area(img, options.resize, options.resize);
      if (!images.empty() && (img.height != images[0].height || img.width != images[0].width ||
                              img.channels != images[0].channels)) {
        problems.push_back(path + ": size " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                           "x" + std::to_string(img.channels) + " differs from the first image");
        continue;
      }
      images.push_back(std::move(img));
    } catch (const std::exception& e) {
      problems.push_back(path + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = std::to_string(problems.size()) + " image(s) failed to load:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw DatasetError(msg);
  }
  return images;
}

Dataset split_dataset(std::vector<ImageU8> images, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) throw DomainError("split fraction must lie in [0, 1)");
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  const auto n_test = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(images.size())));
  Dataset d;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_test ? d.test : d.train).push_back(std::move(images[order[i]]));
  }
  return d;
}

Dataset ingest_dataset(const std::string& dir, double fraction, std::uint64_t seed,
                       const IngestOptions& options) {
  return split_dataset(load_png_directory(dir, options), fraction, seed);
}

ImageU8 center_crop_faces(const ImageU8& image) {
  if (image.width < kCropLeft + kCropSize || image.height < kCropTop + kCropSize) {
    throw DatasetError("image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                       " is too small for the 148x148 crop");
  }
  ImageU8 out(kCropSize, kCropSize, image.channels);
  for (std::size_t y = 0; y < kCropSize; ++y) {
    for (std::size_t x = 0; x < kCropSize; ++x) {
      for (std::size_t c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(y + kCropTop, x + kCropLeft, c);
    }
  }
  return out;
}

namespace {

/// Per output index: source pixels and their overlap weights.
std::vector<std::vector<std::pair<std::size_t, double>>> area_weights(std::size_t in, std::size_t out) {
  std::vector<std::vector<std::pair<std::size_t, double>>> w(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    const double lo = o * scale, hi = (o + 1) * scale;
    for (auto i = static_cast<std::size_t>(std::floor(lo)); i < in && static_cast<double>(i) < hi; ++i) {
      const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
      if (overlap > 0.0) w[o].push_back({i, overlap / scale});
    }
  }
  return w;
}

}  // namespace

ImageU8 resize_area(const ImageU8& image, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw DomainError("resize target must be non-empty");
  if (height == image.height && width == image.width) return image;
  const auto wy = area_weights(image.height, height);
  const auto wx = area_weights(image.width, width);
  ImageU8 out(height, width, image.channels);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < image.channels; ++c) {
        double acc = 0.0;
        for (const auto& [sy, fy] : wy[y]) {
          for (const auto& [sx, fx] : wx[x]) acc += fy * fx * image.at(sy, sx, c);
        }
        out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::floor(acc + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

ImageU8 apply_affine(const ImageU8& image, const AffineParams& p) {
  ImageU8 out(image.height, image.width, image.channels);
  const double cy = (static_cast<double>(image.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(image.width) - 1.0) / 2.0;
  const double a = p.rotation_deg * 3.14159265358979323846 / 180.0;
  const double cs = std::cos(a), sn = std::sin(a);
  const auto max_y = static_cast<double>(image.height - 1), max_x = static_cast<double>(image.width - 1);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      // Inverse map: output -> source.
      const double dx = static_cast<double>(x) - cx - p.shift_x;
      const double dy = static_cast<double>(y) - cy - p.shift_y;
      double sx = cs * dx + sn * dy + cx;
      const double sy = -sn * dx + cs * dy + cy;
      if (p.flip) sx = max_x - sx;
      const auto ix = static_cast<std::size_t>(std::clamp(std::floor(sx + 0.5), 0.0, max_x));
      const auto iy = static_cast<std::size_t>(std::clamp(std::floor(sy + 0.5), 0.0, max_y));
      for (std::size_t c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(iy, ix, c);
    }
  }
  return out;
}

AffineParams sample_affine(const ImageU8& image, const AugmentConfig& config, Rng& rng) {
  AffineParams p;
  p.flip = rng.uniform() < config.flip_probability;
  p.rotation_deg = (2.0 * rng.uniform() - 1.0) * config.max_rotation_deg;
  p.shift_x = (2.0 * rng.uniform() - 1.0) * config.max_translation * static_cast<double>(image.width);
  p.shift_y = (2.0 * rng.uniform() - 1.0) * config.max_translation * static_cast<double>(image.height);
  return p;
}

std::vector<ImageU8> augment(const std::vector<ImageU8>& batch, Rng& rng, const AugmentConfig& config) {
  std::vector<ImageU8> out;
  out.reserve(batch.size());
  for (const auto& img : batch) out.push_back(apply_affine(img, sample_affine(img, config, rng)));
  return out;
}

}  // namespace ssvae
