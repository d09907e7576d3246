#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "partnr/image.hpp"

namespace partnr {

// Per-pixel features of the value-map learner:
//   patch mean RGB over a 5x5 edge-clamped patch,
//   box-likeness  (fraction of the patch in filled regions),
//   bowl-likeness (fraction of the patch inside ring regions),
//   region RGB and its square (color of the object region under the pixel),
//   constant 1.
enum FeatureIndex : int {
  kPatchR,
  kPatchG,
  kPatchB,
  kBoxLikeness,
  kBowlLikeness,
  kRegionR,
  kRegionG,
  kRegionB,
  kRegionR2,
  kRegionG2,
  kRegionB2,
  kBias,
  kFeatureDim
};

inline constexpr int kPatchRadius = 2;

// Object structure recovered from the image alone. Components are
// 4-connected runs of one non-background color; a component whose bounding
// box center is not its own pixel is a ring, otherwise it is filled. A ring's
// region is its whole bounding box.
struct Segmentation {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> filled;
  std::vector<std::uint8_t> ring_region;
  std::vector<Rgb8> region_color;
};

Segmentation segment(const Image& image);

class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int width, int height) : width_(width), height_(height), data_(std::size_t(width) * height * kFeatureDim) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixels() const { return std::size_t(width_) * height_; }

  std::span<const double> at(std::size_t pixel) const { return {data_.data() + pixel * kFeatureDim, kFeatureDim}; }
  std::span<double> at(std::size_t pixel) { return {data_.data() + pixel * kFeatureDim, kFeatureDim}; }
  std::span<const double> data() const { return data_; }

  // Keeps the allocation when the size is unchanged.
  void reshape(int width, int height) {
    width_ = width;
    height_ = height;
    data_.resize(std::size_t(width) * height * kFeatureDim);
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

// Features of one pixel. Throws InvalidInput when p is outside the image.
std::array<double, kFeatureDim> pixel_features(const Image& image, Pixel p);

FeatureMap compute_features(const Image& image);
void compute_features(const Image& image, FeatureMap& out);

// Pixels of the 4-connected non-background component containing p; empty when
// p is background.
std::vector<std::uint8_t> footprint_mask(const Image& image, Pixel p);

namespace kernels {

// Separable integer box filters, rows split across OpenMP threads.
FeatureMap feature_map(const Image& image, const Segmentation& seg);
void feature_map(const Image& image, const Segmentation& seg, FeatureMap& out);
// out[i] = <features(i), weights>
void score(const FeatureMap& features, std::span<const double> weights, std::span<double> out);

// Straightforward per-pixel versions; bit-identical to the parallel ones.
namespace serial {
FeatureMap feature_map(const Image& image, const Segmentation& seg);
void feature_map(const Image& image, const Segmentation& seg, FeatureMap& out);
void score(const FeatureMap& features, std::span<const double> weights, std::span<double> out);
}  // namespace serial

}  // namespace kernels
}  // namespace partnr
