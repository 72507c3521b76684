#pragma once

#include <cstddef>
#include <vector>

#include "evhdr/errors.hpp"

namespace evhdr {

/// Dense interleaved (HWC) float image, row 0 at the top.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {
    if (h < 0 || w < 0 || c < 0) throw InvalidInput("Image: negative dimension");
  }

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  float& at(int y, int x, int c) { return data[index(y, x, c)]; }
  float at(int y, int x, int c) const { return data[index(y, x, c)]; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

/// Copies the window [y0, y0+h) x [x0, x0+w).
Image crop_image(const Image& img, int y0, int x0, int h, int w);

}  // namespace evhdr
