#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "partnr/colors.hpp"
#include "partnr/types.hpp"

namespace partnr {

// 8-bit RGB top-view image, row-major by v.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb8 fill = kBackground);
  Image(int width, int height, std::vector<std::uint8_t> rgb);

  int width() const { return width_; }
  int height() const { return height_; }
  bool contains(Pixel p) const { return p.u >= 0 && p.v >= 0 && p.u < width_ && p.v < height_; }

  Rgb8 at(int u, int v) const {
    const std::size_t i = offset(u, v);
    return {data_[i], data_[i + 1], data_[i + 2]};
  }
  Rgb8 at(Pixel p) const { return at(p.u, p.v); }
  void set(int u, int v, Rgb8 c) {
    const std::size_t i = offset(u, v);
    data_[i] = c.r;
    data_[i + 1] = c.g;
    data_[i + 2] = c.b;
  }

  std::span<const std::uint8_t> bytes() const { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t offset(int u, int v) const { return (static_cast<std::size_t>(v) * width_ + u) * 3; }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// PNG encoding of the image (8-bit RGB).
std::vector<std::uint8_t> encode_png(const Image& image);
void write_png(const Image& image, const std::string& path);

}  // namespace partnr
