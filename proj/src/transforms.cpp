#include "ssvae/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ssvae {

namespace {

inline std::uint8_t round_half_up(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

// Mirror an index into [0, n): ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
std::size_t mirror(long i, std::size_t n) {
  const long len = static_cast<long>(n);
  if (len == 1) return 0;
  const long period = 2 * len;
  long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < len ? m : period - 1 - m);
}

}  // namespace

std::string to_string(const TransformSpec& spec) {
  std::ostringstream os;
  switch (spec.kind) {
    case TransformKind::Downscale: os << "downscale:" << spec.factor; break;
    case TransformKind::Grayscale: os << "grayscale"; break;
    case TransformKind::Sketch: os << "sketch:" << spec.blur_sigma; break;
  }
  return os.str();
}

TransformSpec parse_transform(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (kind == "downscale") {
    const int factor = arg.empty() ? 2 : std::stoi(arg);
    if (factor < 2) throw DomainError("downscale factor must be >= 2");
    return TransformSpec::downscale(factor);
  }
  if (kind == "grayscale") return TransformSpec::grayscale();
  if (kind == "sketch") {
    const double sigma = arg.empty() ? 3.0 : std::stod(arg);
    if (!(sigma > 0)) throw DomainError("sketch blur sigma must be positive");
    return TransformSpec::sketch(sigma);
  }
  throw DomainError("unknown transform '" + text + "'");
}

ImageU8 downscale(const ImageU8& x, int factor) {
  if (factor < 2) throw DomainError("downscale factor must be >= 2");
  const auto f = static_cast<std::size_t>(factor);
  if (x.height % f != 0 || x.width % f != 0) {
    throw DomainError("downscale: " + std::to_string(x.height) + "x" + std::to_string(x.width) +
                      " is not divisible by " + std::to_string(factor));
  }
  ImageU8 out(x.height / f, x.width / f, x.channels);
  const unsigned area = static_cast<unsigned>(f * f);
  for (std::size_t y = 0; y < out.height; ++y)
    for (std::size_t xx = 0; xx < out.width; ++xx)
      for (std::size_t c = 0; c < x.channels; ++c) {
        unsigned sum = 0;
        for (std::size_t dy = 0; dy < f; ++dy)
          for (std::size_t dx = 0; dx < f; ++dx) sum += x.at(y * f + dy, xx * f + dx, c);
        // floor(sum / area + 1/2) in exact integer arithmetic
        out.at(y, xx, c) = static_cast<std::uint8_t>((2 * sum + area) / (2 * area));
      }
  return out;
}

ImageU8 grayscale(const ImageU8& x) {
  if (x.channels == 1) return x;
  if (x.channels != 3) throw DomainError("grayscale expects 1 or 3 channels");
  ImageU8 out(x.height, x.width, 1);
  for (std::size_t y = 0; y < x.height; ++y)
    for (std::size_t xx = 0; xx < x.width; ++xx) {
      // Integer weights keep .5 ties exact.
      const unsigned luma = 299u * x.at(y, xx, 0) + 587u * x.at(y, xx, 1) + 114u * x.at(y, xx, 2);
      out.at(y, xx, 0) = static_cast<std::uint8_t>((luma + 500) / 1000);
    }
  return out;
}

std::vector<double> gaussian_blur(const std::vector<double>& plane, std::size_t height,
                                  std::size_t width, double sigma) {
  if (!(sigma > 0)) throw DomainError("blur sigma must be positive");
  const long radius = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (long k = -radius; k <= radius; ++k) {
    const double w = std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
    kernel[static_cast<std::size_t>(k + radius)] = w;
    total += w;
  }
  for (auto& w : kernel) w /= total;

  std::vector<double> tmp(plane.size()), out(plane.size());
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      double acc = 0.0;
      for (long k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] *
               plane[y * width + mirror(static_cast<long>(x) + k, width)];
      }
      tmp[y * width + x] = acc;
    }
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      double acc = 0.0;
      for (long k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] *
               tmp[mirror(static_cast<long>(y) + k, height) * width + x];
      }
      out[y * width + x] = acc;
    }
  return out;
}

ImageU8 sketch(const ImageU8& x, double blur_sigma) {
  const ImageU8 gray = grayscale(x);
  std::vector<double> inverted(gray.size());
  for (std::size_t i = 0; i < gray.size(); ++i) inverted[i] = 255.0 - gray.pixels[i];
  const auto blurred = gaussian_blur(inverted, gray.height, gray.width, blur_sigma);
  ImageU8 out(gray.height, gray.width, 1);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const double denom = 255.0 - blurred[i];
    // Blurring a constant may leave rounding residue, so "non-positive" is
    // judged with a small tolerance.
    if (denom <= 1e-9) {
      out.pixels[i] = 255;
    } else {
      out.pixels[i] = round_half_up(gray.pixels[i] * 255.0 / denom);
    }
  }
  return out;
}

ImageU8 apply_transform(const ImageU8& x, const TransformSpec& spec) {
  switch (spec.kind) {
    case TransformKind::Downscale: return downscale(x, spec.factor);
    case TransformKind::Grayscale: return grayscale(x);
    case TransformKind::Sketch: return sketch(x, spec.blur_sigma);
  }
  throw DomainError("unknown transform kind");
}

std::vector<ImageU8> apply_chain(const ImageU8& x, const std::vector<TransformSpec>& specs) {
  std::vector<ImageU8> out;
  out.reserve(specs.size());
  const ImageU8* cur = &x;
  for (const auto& spec : specs) {
    out.push_back(apply_transform(*cur, spec));
    cur = &out.back();
  }
  return out;
}

ImageGeometry transformed_geometry(const ImageGeometry& in, const TransformSpec& spec) {
  switch (spec.kind) {
    case TransformKind::Downscale: {
      const auto f = static_cast<std::size_t>(spec.factor);
      if (spec.factor < 2 || in.height % f != 0 || in.width % f != 0) {
        throw DomainError("downscale factor " + std::to_string(spec.factor) +
                          " does not divide the image size");
      }
      return {in.channels, in.height / f, in.width / f};
    }
    case TransformKind::Grayscale:
    case TransformKind::Sketch: return {1, in.height, in.width};
  }
  throw DomainError("unknown transform kind");
}

Tensor apply_transform(const Tensor& batch, const TransformSpec& spec) {
  const auto images = tensor_to_images(batch);
  std::vector<ImageU8> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(apply_transform(img, spec));
  return images_to_tensor(out);
}

}  // namespace ssvae
