#include <png.h>
#include <tiffio.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "cellscope/error.hpp"
#include "cellscope/image.hpp"

namespace cellscope {
namespace {

bool has_png_signature(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::array<unsigned char, 8> sig{};
  if (!in.read(reinterpret_cast<char*>(sig.data()), sig.size())) return false;
  return png_sig_cmp(sig.data(), 0, sig.size()) == 0;
}

GrayImage read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot decode PNG '" + path.string() + "': " + image.message);
  }
  if ((image.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_LINEAR)) != 0) {
    png_image_free(&image);
    throw IoError("PNG '" + path.string() + "' is not 8-bit grayscale");
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    throw IoError("cannot decode PNG '" + path.string() + "': " + image.message);
  }
  return GrayImage(image.width, image.height, std::move(pixels));
}

struct TiffCloser {
  void operator()(TIFF* t) const noexcept { TIFFClose(t); }
};

GrayImage read_tiff(const std::filesystem::path& path) {
  TIFFSetWarningHandler(nullptr);
  TIFFSetErrorHandler(nullptr);
  std::unique_ptr<TIFF, TiffCloser> tif(TIFFOpen(path.c_str(), "r"));
  if (!tif) throw IoError("cannot decode image '" + path.string() + "': not a PNG or TIFF file");
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint16_t samples = 1;
  std::uint16_t bits = 8;
  TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &width);
  TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &height);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &samples);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bits);
  if (samples != 1 || bits != 8) {
    throw IoError("TIFF '" + path.string() + "' is not 8-bit single-channel grayscale");
  }
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(width) * height);
  const tmsize_t line = TIFFScanlineSize(tif.get());
  if (line < static_cast<tmsize_t>(width)) throw IoError("TIFF '" + path.string() + "' has unexpected layout");
  std::vector<std::uint8_t> buffer(static_cast<std::size_t>(line));
  for (std::uint32_t row = 0; row < height; ++row) {
    if (TIFFReadScanline(tif.get(), buffer.data(), row) < 0) {
      throw IoError("cannot read TIFF scanline " + std::to_string(row) + " of '" + path.string() + "'");
    }
    std::copy_n(buffer.begin(), width, pixels.begin() + static_cast<std::ptrdiff_t>(row) * width);
  }
  if (TIFFReadDirectory(tif.get())) throw IoError("TIFF '" + path.string() + "' has more than one page");
  return GrayImage(width, height, std::move(pixels));
}

template <typename Pixels>
void write_png_buffer(const std::filesystem::path& path, std::size_t width, std::size_t height, std::uint32_t format,
                      const Pixels* data) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, data, 0, nullptr)) {
    throw IoError("cannot write PNG '" + path.string() + "': " + image.message);
  }
}

}  // namespace

GrayImage read_gray_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("image '" + path.string() + "' does not exist");
  GrayImage img = has_png_signature(path) ? read_png(path) : read_tiff(path);
  if (img.empty()) throw IoError("image '" + path.string() + "' has zero size");
  return img;
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
  write_png_buffer(path, image.width(), image.height(), PNG_FORMAT_GRAY, image.pixels().data());
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  static_assert(sizeof(RgbImage::Pixel) == 3);
  write_png_buffer(path, image.width(), image.height(), PNG_FORMAT_RGB, image.pixels().data());
}

void write_tiff(const std::filesystem::path& path, const GrayImage& image) {
  std::unique_ptr<TIFF, TiffCloser> tif(TIFFOpen(path.c_str(), "w"));
  if (!tif) throw IoError("cannot open TIFF '" + path.string() + "' for writing");
  TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(image.width()));
  TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(image.height()));
  TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, 1);
  TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, 8);
  TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
  TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
  TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, static_cast<std::uint32_t>(image.height()));
  std::vector<std::uint8_t> row(image.width());
  for (std::size_t y = 0; y < image.height(); ++y) {
    for (std::size_t x = 0; x < image.width(); ++x) row[x] = image.at(x, y);
    if (TIFFWriteScanline(tif.get(), row.data(), static_cast<std::uint32_t>(y), 0) < 0) {
      throw IoError("cannot write TIFF '" + path.string() + "'");
    }
  }
}

}  // namespace cellscope
