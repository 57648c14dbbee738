#include "sdt/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

namespace sdt {
namespace {

std::vector<std::uint8_t> read_png(const std::filesystem::path& path, png_uint_32 format, int& width,
                                   int& height) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw std::runtime_error("cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw std::runtime_error("cannot decode PNG " + path.string() + ": " + img.message);
  }
  width = static_cast<int>(img.width);
  height = static_cast<int>(img.height);
  return buf;
}

void write_png(const std::filesystem::path& path, png_uint_32 format, int width, int height,
               const std::vector<std::uint8_t>& buf) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw std::runtime_error("cannot write PNG " + path.string() + ": " + img.message);
  }
}

}  // namespace

Mask read_mask_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto buf = read_png(path, PNG_FORMAT_GRAY, w, h);
  Mask m = make_mask(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m(y, x) = buf[static_cast<std::size_t>(y) * w + x] != 0 ? 1 : 0;
  }
  return m;
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint8_t> buf(mask.plane_size());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      buf[static_cast<std::size_t>(y) * mask.width() + x] = mask(y, x) ? 255 : 0;
    }
  }
  write_png(path, PNG_FORMAT_GRAY, mask.width(), mask.height(), buf);
}

void write_rgb_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels() != 3) throw std::invalid_argument("write_rgb_png: expected 3 channels");
  const int w = image.width(), h = image.height();
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(image.at(c, y, x)), 0.0, 1.0);
        buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  write_png(path, PNG_FORMAT_RGB, w, h, buf);
}

Image read_rgb_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto buf = read_png(path, PNG_FORMAT_RGB, w, h);
  Image img(3, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0f;
    }
  }
  return img;
}

}  // namespace sdt
