#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "knerf/common.hpp"

namespace knerf {

// Float RGB image with channel values in [0, 1], row-major rows of pixels.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // width * height * 3

  ImageBuffer() = default;
  ImageBuffer(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0.f) {}

  float* at(int x, int y) { return pixels.data() + (static_cast<size_t>(y) * width + x) * 3; }
  const float* at(int x, int y) const {
    return pixels.data() + (static_cast<size_t>(y) * width + x) * 3;
  }

  bool in_range() const {
    for (float v : pixels)
      if (!(v >= 0.f && v <= 1.f)) return false;
    return true;
  }
};

// 8-bit RGBA PNG with alpha 255, quantized by round-to-nearest.
void write_png_rgba8(const std::string& path, const ImageBuffer& img);

// Loads an RGBA8 (or RGB8) PNG. When composite_over_white is set, the alpha
// channel is composited as rgb*a + (1-a); otherwise alpha is dropped.
ImageBuffer read_png(const std::string& path, bool composite_over_white = true);

}  // namespace knerf
