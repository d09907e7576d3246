#include "partnr/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "partnr/ambiguity.hpp"
#include "partnr/error.hpp"

namespace partnr {

Heatmap::Heatmap(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width_ < 1 || height_ < 1) {
    throw InvalidInput("heatmap must be at least 1x1");
  }
  if (values_.size() != static_cast<std::size_t>(width_) * height_) {
    throw InvalidInput("heatmap has " + std::to_string(values_.size()) + " values, expected " +
                       std::to_string(width_ * height_));
  }
  for (double x : values_) {
    if (!std::isfinite(x)) throw InvalidInput("heatmap values must be finite");
  }
}

Heatmap::Heatmap(int width, int height, double fill)
    : Heatmap(width, height,
              std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0),
                                  fill)) {}

double Heatmap::min() const { return *std::min_element(values_.begin(), values_.end()); }

double Heatmap::max() const { return *std::max_element(values_.begin(), values_.end()); }

std::vector<double> Heatmap::normalized() const { return softmax(values_); }

}  // namespace partnr
