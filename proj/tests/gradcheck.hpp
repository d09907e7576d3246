// Finite-difference check of the training gradient on small random
// observations. Shared by the unit tests and the acceptance binary.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "partnr/model.hpp"

namespace gradcheck {

using namespace partnr;

// A few one-color blocks on the background.
inline Image random_image(int w, int h, Rng& rng) {
  Image img(w, h);
  std::uniform_int_distribution<int> color(0, kNumColors - 1), pos(0, std::max(w, h) - 1), side(1, 3);
  for (int k = 0; k < 3; ++k) {
    const Rgb8 c = color_rgb(color(rng));
    const int u0 = pos(rng) % w, v0 = pos(rng) % h, s = side(rng);
    for (int v = v0; v < std::min(h, v0 + s); ++v)
      for (int u = u0; u < std::min(w, u0 + s); ++u) img.set(u, v, c);
  }
  return img;
}

inline void randomize(ValueModel& m, Rng& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  for (double& w : m.flat()) w = n(rng);
}

// Cross-entropy recomputed from per-pixel features, with the masked pixels
// replaced by the minimum of the others. Long double throughout.
inline long double reference_loss(const ValueModel& m, const Image& img, std::span<const std::uint8_t> mask,
                                  Role role, int color, Pixel target) {
  const auto& w = m.weights(role, color);
  std::vector<long double> q;
  long double lo = INFINITY;
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      const auto f = pixel_features(img, {u, v});
      long double s = 0;
      for (int k = 0; k < kFeatureDim; ++k) s += (long double)f[k] * w[k];
      q.push_back(s);
      if (mask.empty() || !mask[q.size() - 1]) lo = std::min(lo, s);
    }
  }
  if (!mask.empty())
    for (std::size_t i = 0; i < q.size(); ++i)
      if (mask[i]) q[i] = lo;
  const long double mx = *std::max_element(q.begin(), q.end());
  long double z = 0;
  for (auto x : q) z += std::exp(x - mx);
  return -(q[std::size_t(target.v) * img.width() + target.u] - mx - std::log(z));
}

struct Result {
  double worst_relative_error = 0.0;  // ||g - fd|| / max(||g||, ||fd||)
  double worst_loss_error = 0.0;      // relative, against reference_loss
};

// `pairs` random (8x8 observation, target) pairs; odd pairs train the place
// head with part of the map masked.
inline Result run(int pairs, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> px(0, 7), col(0, kNumColors - 1);
  Result out;
  for (int pair = 0; pair < pairs; ++pair) {
    const Image img = random_image(8, 8, rng);
    const auto features = compute_features(img);
    ValueModel m;
    randomize(m, rng, 0.5);
    const Role role = pair % 2 ? Role::kPlace : Role::kPick;
    const int color = col(rng);
    const Pixel target{px(rng), px(rng)};
    std::vector<std::uint8_t> mask;
    if (role == Role::kPlace) {
      Pixel cond{px(rng), px(rng)};
      for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u)
          if (!(img.at(u, v) == kBackground)) cond = {u, v};
      mask = place_mask(img, cond);
    }
    const auto ex = example_loss(m, features, mask, role, color, target);
    const double ref = double(reference_loss(m, img, mask, role, color, target));
    out.worst_loss_error = std::max(out.worst_loss_error, std::abs(ex.loss - ref) / std::max(std::abs(ref), 1e-300));

    double num2 = 0.0, g2 = 0.0, fd2 = 0.0;
    const double h = 1e-5;
    for (int k = 0; k < kFeatureDim; ++k) {
      ValueModel plus = m, minus = m;
      plus.weights(role, color)[k] += h;
      minus.weights(role, color)[k] -= h;
      const double fd = (example_loss(plus, features, mask, role, color, target).loss -
                         example_loss(minus, features, mask, role, color, target).loss) /
                        (2 * h);
      num2 += (ex.gradient[k] - fd) * (ex.gradient[k] - fd);
      g2 += ex.gradient[k] * ex.gradient[k];
      fd2 += fd * fd;
    }
    const double rel = std::sqrt(num2) / std::max(std::sqrt(std::max(g2, fd2)), 1e-12);
    out.worst_relative_error = std::max(out.worst_relative_error, rel);
  }
  return out;
}

}  // namespace gradcheck
