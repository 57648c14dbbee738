#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace sdt {

/// Dense channel-major (C, H, W) array in C order. Used for latents, images
/// and binary masks alike; the element type carries the distinction.
template <class T>
class Planar {
 public:
  Planar() = default;
  Planar(int channels, int height, int width, T fill = T{})
      : channels_(channels), height_(height), width_(width) {
    if (channels < 0 || height < 0 || width < 0) {
      throw std::invalid_argument("Planar: negative dimension");
    }
    data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  const T& at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  // single-channel convenience
  T& operator()(int y, int x) { return data_[index(0, y, x)]; }
  const T& operator()(int y, int x) const { return data_[index(0, y, x)]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::span<T> plane(int c) { return std::span<T>(data_).subspan(c * plane_size(), plane_size()); }
  std::span<const T> plane(int c) const {
    return std::span<const T>(data_).subspan(c * plane_size(), plane_size());
  }

  bool same_shape(const Planar& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }
  template <class U>
  bool same_extent(const Planar<U>& o) const {
    return height_ == o.height() && width_ == o.width();
  }

  friend bool operator==(const Planar& a, const Planar& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// Single-channel {0,1} mask.
using Mask = Planar<std::uint8_t>;
/// Latent tensor (C, h, w) of float32.
using Latent = Planar<float>;
/// RGB image (3, H, W) with values nominally in [0, 1].
using Image = Planar<float>;

inline Mask make_mask(int height, int width, std::uint8_t fill = 0) {
  return Mask(1, height, width, fill);
}

inline bool is_binary(const Mask& m) {
  for (auto v : m.values()) {
    if (v > 1) return false;
  }
  return true;
}

inline std::size_t count_set(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m.values()) n += v != 0;
  return n;
}

inline bool any_set(const Mask& m) {
  for (auto v : m.values()) {
    if (v != 0) return true;
  }
  return false;
}

/// Columns [begin, end) of every channel and row.
template <class T>
Planar<T> crop_columns(const Planar<T>& a, int begin, int end) {
  if (begin < 0 || end > a.width() || begin > end) {
    throw std::out_of_range("crop_columns: range outside array");
  }
  Planar<T> out(a.channels(), a.height(), end - begin);
  for (int c = 0; c < a.channels(); ++c) {
    for (int y = 0; y < a.height(); ++y) {
      for (int x = begin; x < end; ++x) out.at(c, y, x - begin) = a.at(c, y, x);
    }
  }
  return out;
}

}  // namespace sdt
