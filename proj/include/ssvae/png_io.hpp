#pragma once

#include <filesystem>
#include <stdexcept>

#include "ssvae/image.hpp"

namespace ssvae {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads an 8-bit gray or RGB PNG. Alpha is dropped, palettes expanded and
/// 16-bit samples reduced to 8 bits.
ImageU8 read_png(const std::filesystem::path& path);
/// Writes a 1-channel (gray) or 3-channel (RGB) image.
void write_png(const std::filesystem::path& path, const ImageU8& image);

}  // namespace ssvae
