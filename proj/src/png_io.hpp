#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace opseval::detail {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // packed RGB, 3 bytes per pixel
};

// Throws DecodeError if the file is not an 8-bit image; palette/gray/alpha
// inputs are expanded to RGB.
RgbImage read_rgb_png(const std::string& path);

// Lossless 8-bit RGB output. Throws IoError on failure.
void write_rgb_png(const std::string& path, const RgbImage& img);

}  // namespace opseval::detail
