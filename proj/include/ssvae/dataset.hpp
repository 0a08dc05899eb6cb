#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "ssvae/image.hpp"
#include "ssvae/rng.hpp"

namespace ssvae {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  std::vector<ImageU8> train;
  std::vector<ImageU8> test;
};

struct IngestOptions {
  bool crop = false;         // 148x148 window at x = 15, y = 40
  std::size_t resize = 0;    // square output side after cropping; 0 keeps size
};

/// Sorted *.png paths of a directory.
std::vector<std::string> list_pngs(const std::string& dir);
/// Loads every PNG; failures and size mismatches are collected into one error.
std::vector<ImageU8> load_png_directory(const std::string& dir, const IngestOptions& options = {});

/// Seeded permutation; the first round(fraction * n) shuffled images form the test set.
Dataset split_dataset(std::vector<ImageU8> images, double fraction, std::uint64_t seed);
Dataset ingest_dataset(const std::string& dir, double fraction, std::uint64_t seed,
                       const IngestOptions& options = {});

inline constexpr std::size_t kCropSize = 148;
inline constexpr std::size_t kCropLeft = 15;
inline constexpr std::size_t kCropTop = 40;
ImageU8 center_crop_faces(const ImageU8& image);
/// Box-filter resampling with fractional pixel overlaps, rounded half-up.
ImageU8 resize_area(const ImageU8& image, std::size_t height, std::size_t width);

struct AffineParams {
  bool flip = false;
  double rotation_deg = 0.0;
  double shift_x = 0.0;  // pixels
  double shift_y = 0.0;
};

struct AugmentConfig {
  double flip_probability = 0.5;
  double max_rotation_deg = 5.0;
  double max_translation = 0.05;  // fraction of the side
};

/// Nearest-neighbour resampling about the image centre; samples falling
/// outside are clamped to the border.
ImageU8 apply_affine(const ImageU8& image, const AffineParams& params);
AffineParams sample_affine(const ImageU8& image, const AugmentConfig& config, Rng& rng);
std::vector<ImageU8> augment(const std::vector<ImageU8>& batch, Rng& rng,
                             const AugmentConfig& config = {});

/// Procedural 16x16-style RGB sprites: a flat background with a few
/// coloured rectangles, discs and crosses.
std::vector<ImageU8> generate_sprites(std::size_t count, std::size_t size, std::uint64_t seed);

}  // namespace ssvae
