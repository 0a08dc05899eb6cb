#pragma once

#include <string>
#include <vector>

#include "ssvae/image.hpp"
#include "ssvae/tensor.hpp"

namespace ssvae {

enum class TransformKind { Downscale, Grayscale, Sketch };

/// One deterministic, non-trainable transform d(x) with discrete output.
struct TransformSpec {
  TransformKind kind = TransformKind::Downscale;
  int factor = 2;            // downscale only
  double blur_sigma = 3.0;   // sketch only

  static TransformSpec downscale(int factor) { return {TransformKind::Downscale, factor, 3.0}; }
  static TransformSpec grayscale() { return {TransformKind::Grayscale, 2, 3.0}; }
  static TransformSpec sketch(double sigma = 3.0) { return {TransformKind::Sketch, 2, sigma}; }
};

std::string to_string(const TransformSpec& spec);
/// Parses "downscale:2", "grayscale", "sketch" or "sketch:1.5".
TransformSpec parse_transform(const std::string& text);

/// Block average over factor x factor windows, rounded half-up.
ImageU8 downscale(const ImageU8& x, int factor);
/// Luma 0.299 R + 0.587 G + 0.114 B rounded half-up; identity on gray input.
ImageU8 grayscale(const ImageU8& x);
/// Separable Gaussian blur (kernel truncated at 3 sigma, mirrored borders) of
/// a single-channel image, kept in floating point.
std::vector<double> gaussian_blur(const std::vector<double>& plane, std::size_t height,
                                  std::size_t width, double sigma);
/// Colour-dodge of the grayscale image with its blurred inverse.
ImageU8 sketch(const ImageU8& x, double blur_sigma);

ImageU8 apply_transform(const ImageU8& x, const TransformSpec& spec);
/// [d_1(x), d_2(d_1(x)), ...]: each stage feeds the next, coarsest last.
std::vector<ImageU8> apply_chain(const ImageU8& x, const std::vector<TransformSpec>& specs);

/// Output geometry of a transform applied to an image of the given size.
struct ImageGeometry {
  std::size_t channels, height, width;
  bool operator==(const ImageGeometry&) const = default;
};
ImageGeometry transformed_geometry(const ImageGeometry& in, const TransformSpec& spec);

/// Applies `spec` to every image of an [N, C, H, W] pixel tensor.
Tensor apply_transform(const Tensor& batch, const TransformSpec& spec);

}  // namespace ssvae
