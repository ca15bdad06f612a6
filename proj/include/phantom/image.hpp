#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace phantom {

// 8-bit interleaved raster. Scene images are 3-channel RGB; opacity masks
// use a single channel.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, int c = 3, std::uint8_t fill = 0)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  bool empty() const { return width <= 0 || height <= 0; }

  std::uint8_t* at(int x, int y) {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
  const std::uint8_t* at(int x, int y) const {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

// Lossless PNG codec. Decoding normalizes palette, gray and 16-bit inputs to
// 8-bit and drops alpha when `channels` is 3. Anything that is not a PNG
// stream is rejected with ImageError.
Image decode_png(std::span<const std::uint8_t> bytes, int channels = 3);
std::vector<std::uint8_t> encode_png(const Image& image);

Image read_png(const std::filesystem::path& path, int channels = 3);
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace phantom
