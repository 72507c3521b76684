#include "evhdr/image.hpp"

#include <algorithm>

namespace evhdr {

Image crop_image(const Image& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || h < 0 || w < 0 || y0 + h > img.height ||
      x0 + w > img.width) {
    throw InvalidInput("crop_image: window outside image");
  }
  Image out(h, w, img.channels);
  const std::size_t row = static_cast<std::size_t>(w) * img.channels;
  for (int y = 0; y < h; ++y) {
    auto src = img.data.begin() + img.index(y0 + y, x0, 0);
    std::copy(src, src + row, out.data.begin() + out.index(y, 0, 0));
  }
  return out;
}

}  // namespace evhdr
