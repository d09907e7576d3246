#pragma once

#include <span>
#include <vector>

#include "partnr/types.hpp"

namespace partnr {

// Dense W x H field of finite action values, stored row-major by v.
class Heatmap {
 public:
  Heatmap(int width, int height, std::vector<double> values);
  Heatmap(int width, int height, double fill);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }

  double at(int u, int v) const { return values_[index(u, v)]; }
  double at(Pixel p) const { return at(p.u, p.v); }
  std::span<const double> values() const { return values_; }

  bool contains(Pixel p) const {
    return p.u >= 0 && p.v >= 0 && p.u < width_ && p.v < height_;
  }
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * width_ + u;
  }
  Pixel pixel(std::size_t index) const {
    return {static_cast<int>(index % width_), static_cast<int>(index / width_)};
  }

  double min() const;
  double max() const;

  // softmax over all pixels (temperature 1, max-subtracted)
  std::vector<double> normalized() const;

 private:
  int width_;
  int height_;
  std::vector<double> values_;
};

}  // namespace partnr
