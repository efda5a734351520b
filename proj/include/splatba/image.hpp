#pragma once

#include <cstddef>
#include <vector>

namespace splatba {

/// Row-major interleaved image: index = (y * width + x) * channels + c.
/// Color images hold 3 channels in [0, 1]; depth and alpha images hold 1.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  double& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
  bool operator==(const Image&) const = default;
};

/// Round-trips through 8-bit storage: round(clamp(x) * 255) / 255.
Image quantize_8bit(const Image& img);
/// Round-trips through 16-bit storage.
Image quantize_16bit(const Image& img);
/// Round-trips through 32-bit float storage.
Image quantize_float32(const Image& img);

}  // namespace splatba
