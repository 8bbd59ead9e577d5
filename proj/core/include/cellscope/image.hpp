#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace cellscope {

/// 8-bit grayscale raster, row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(std::size_t width, std::size_t height, std::uint8_t fill = 0);
  /// Throws InputError if pixels.size() != width * height.
  GrayImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  bool empty() const noexcept { return width_ == 0 || height_ == 0; }

  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels_[y * width_ + x]; }
  std::uint8_t& at(std::size_t x, std::size_t y) { return pixels_[y * width_ + x]; }
  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  /// Copy of the [x0, x0+w) x [y0, y0+h) window; must lie inside the image.
  GrayImage crop(std::size_t x0, std::size_t y0, std::size_t w, std::size_t h) const;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// 8-bit RGB raster used for review overlays.
class RgbImage {
 public:
  struct Pixel {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    friend bool operator==(const Pixel&, const Pixel&) = default;
  };

  RgbImage() = default;
  explicit RgbImage(const GrayImage& gray);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  Pixel at(std::size_t x, std::size_t y) const { return pixels_[y * width_ + x]; }
  void set(std::size_t x, std::size_t y, Pixel p) { pixels_[y * width_ + x] = p; }
  std::span<const Pixel> pixels() const noexcept { return pixels_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<Pixel> pixels_;
};

/// Reads an 8-bit grayscale PNG or a single-page 8-bit grayscale TIFF,
/// chosen by file signature. Throws IoError on anything else.
GrayImage read_gray_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const GrayImage& image);
void write_png(const std::filesystem::path& path, const RgbImage& image);
/// Single-strip uncompressed 8-bit grayscale TIFF.
void write_tiff(const std::filesystem::path& path, const GrayImage& image);

}  // namespace cellscope
