#include "cellscope/image.hpp"

#include "cellscope/error.hpp"

namespace cellscope {

GrayImage::GrayImage(std::size_t width, std::size_t height, std::uint8_t fill)
    : width_(width), height_(height), pixels_(width * height, fill) {}

GrayImage::GrayImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (pixels_.size() != width * height) {
    throw InputError("GrayImage: pixel count does not match width * height");
  }
}

GrayImage GrayImage::crop(std::size_t x0, std::size_t y0, std::size_t w, std::size_t h) const {
  if (x0 + w > width_ || y0 + h > height_) throw InputError("GrayImage::crop: window exceeds image");
  GrayImage out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) out.at(x, y) = at(x0 + x, y0 + y);
  }
  return out;
}

RgbImage::RgbImage(const GrayImage& gray)
    : width_(gray.width()), height_(gray.height()), pixels_(gray.width() * gray.height()) {
  auto src = gray.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) pixels_[i] = {src[i], src[i], src[i]};
}

}  // namespace cellscope
