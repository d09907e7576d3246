#include "partnr/features.hpp"

#include <algorithm>
#include <climits>
#include <string>

#include "partnr/error.hpp"

namespace partnr {

namespace {

constexpr int kPatchSide = 2 * kPatchRadius + 1;
constexpr double kPatchArea = kPatchSide * kPatchSide;
constexpr double kColorPatchScale = kPatchArea * 255.0;

struct Component {
  Rgb8 color;
  int umin = INT_MAX, vmin = INT_MAX, umax = -1, vmax = -1;
  bool ring = false;
  long area() const { return long(umax - umin + 1) * (vmax - vmin + 1); }
};

// Region features shared by both kernels.
void write_region(const Segmentation& seg, std::size_t i, std::span<double> f) {
  const Rgb8 c = seg.region_color[i];
  const double r = c.r / 255.0, g = c.g / 255.0, b = c.b / 255.0;
  f[kRegionR] = r;
  f[kRegionG] = g;
  f[kRegionB] = b;
  f[kRegionR2] = r * r;
  f[kRegionG2] = g * g;
  f[kRegionB2] = b * b;
  f[kBias] = 1.0;
}

void write_patch(std::span<double> f, long r, long g, long b, long filled, long ring) {
  f[kPatchR] = r / kColorPatchScale;
  f[kPatchG] = g / kColorPatchScale;
  f[kPatchB] = b / kColorPatchScale;
  f[kBoxLikeness] = filled / kPatchArea;
  f[kBowlLikeness] = ring / kPatchArea;
}

}  // namespace

Segmentation segment(const Image& image) {
  const int w = image.width();
  const int h = image.height();
  const std::size_t n = std::size_t(w) * h;

  std::vector<int> label(n, -1);
  std::vector<Component> comps;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < n; ++start) {
    const int su = int(start % w), sv = int(start / w);
    const Rgb8 c = image.at(su, sv);
    if (label[start] >= 0 || c == kBackground) continue;
    const int id = int(comps.size());
    Component comp;
    comp.color = c;
    label[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const int u = int(i % w), v = int(i / w);
      comp.umin = std::min(comp.umin, u);
      comp.umax = std::max(comp.umax, u);
      comp.vmin = std::min(comp.vmin, v);
      comp.vmax = std::max(comp.vmax, v);
      const int nu[4] = {u - 1, u + 1, u, u};
      const int nv[4] = {v, v, v - 1, v + 1};
      for (int k = 0; k < 4; ++k) {
        if (nu[k] < 0 || nv[k] < 0 || nu[k] >= w || nv[k] >= h) continue;
        const std::size_t j = std::size_t(nv[k]) * w + nu[k];
        if (label[j] < 0 && image.at(nu[k], nv[k]) == c) {
          label[j] = id;
          stack.push_back(j);
        }
      }
    }
    comps.push_back(comp);
  }
  for (int id = 0; id < int(comps.size()); ++id) {
    auto& comp = comps[id];
    const int cu = (comp.umin + comp.umax) / 2;
    const int cv = (comp.vmin + comp.vmax) / 2;
    comp.ring = label[std::size_t(cv) * w + cu] != id;
  }

  Segmentation seg;
  seg.width = w;
  seg.height = h;
  seg.filled.assign(n, 0);
  seg.ring_region.assign(n, 0);
  seg.region_color.assign(n, kBackground);
  std::vector<long> ring_area(n, LONG_MAX);

  for (const auto& comp : comps) {
    if (!comp.ring) continue;
    for (int v = comp.vmin; v <= comp.vmax; ++v) {
      for (int u = comp.umin; u <= comp.umax; ++u) {
        const std::size_t i = std::size_t(v) * w + u;
        seg.ring_region[i] = 1;
        // Nested or overlapping rings: the smallest enclosing one names the region.
        if (comp.area() < ring_area[i]) {
          ring_area[i] = comp.area();
          seg.region_color[i] = comp.color;
        }
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] < 0) continue;
    const auto& comp = comps[label[i]];
    if (!comp.ring) {
      seg.filled[i] = 1;
      seg.region_color[i] = comp.color;
    } else {
      seg.region_color[i] = comp.color;
    }
  }
  return seg;
}

namespace kernels {

namespace serial {

void feature_map(const Image& image, const Segmentation& seg, FeatureMap& out) {
  const int w = image.width();
  const int h = image.height();
  out.reshape(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      long r = 0, g = 0, b = 0, filled = 0, ring = 0;
      for (int dv = -kPatchRadius; dv <= kPatchRadius; ++dv) {
        for (int du = -kPatchRadius; du <= kPatchRadius; ++du) {
          const int pu = std::clamp(u + du, 0, w - 1);
          const int pv = std::clamp(v + dv, 0, h - 1);
          const Rgb8 c = image.at(pu, pv);
          const std::size_t j = std::size_t(pv) * w + pu;
          r += c.r;
          g += c.g;
          b += c.b;
          filled += seg.filled[j];
          ring += seg.ring_region[j];
        }
      }
      const std::size_t i = std::size_t(v) * w + u;
      auto f = out.at(i);
      write_patch(f, r, g, b, filled, ring);
      write_region(seg, i, f);
    }
  }
}

FeatureMap feature_map(const Image& image, const Segmentation& seg) {
  FeatureMap out;
  feature_map(image, seg, out);
  return out;
}

void score(const FeatureMap& features, std::span<const double> weights, std::span<double> out) {
  for (std::size_t i = 0; i < features.pixels(); ++i) {
    const auto f = features.at(i);
    double s = 0.0;
    for (int k = 0; k < kFeatureDim; ++k) s += f[k] * weights[k];
    out[i] = s;
  }
}

}  // namespace serial

void feature_map(const Image& image, const Segmentation& seg, FeatureMap& out) {
  constexpr int kChannels = 5;
  const int w = image.width();
  const int h = image.height();
  const std::size_t n = std::size_t(w) * h;
  const auto bytes = image.bytes();

  // Channel planes: r, g, b, filled, ring_region. Scratch is reused across
  // calls; training calls this once per example.
  thread_local std::vector<long> plane;
  thread_local std::vector<long> rows;
  plane.resize(n * kChannels);
  rows.resize(n * kChannels);
  for (std::size_t i = 0; i < n; ++i) {
    plane[i * kChannels + 0] = bytes[i * 3 + 0];
    plane[i * kChannels + 1] = bytes[i * 3 + 1];
    plane[i * kChannels + 2] = bytes[i * 3 + 2];
    plane[i * kChannels + 3] = seg.filled[i];
    plane[i * kChannels + 4] = seg.ring_region[i];
  }

#pragma omp parallel for schedule(static)
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      long acc[kChannels] = {0, 0, 0, 0, 0};
      for (int du = -kPatchRadius; du <= kPatchRadius; ++du) {
        const std::size_t j = std::size_t(v) * w + std::clamp(u + du, 0, w - 1);
        for (int c = 0; c < kChannels; ++c) acc[c] += plane[j * kChannels + c];
      }
      const std::size_t i = std::size_t(v) * w + u;
      for (int c = 0; c < kChannels; ++c) rows[i * kChannels + c] = acc[c];
    }
  }

  out.reshape(w, h);
#pragma omp parallel for schedule(static)
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      long acc[kChannels] = {0, 0, 0, 0, 0};
      for (int dv = -kPatchRadius; dv <= kPatchRadius; ++dv) {
        const std::size_t j = std::size_t(std::clamp(v + dv, 0, h - 1)) * w + u;
        for (int c = 0; c < kChannels; ++c) acc[c] += rows[j * kChannels + c];
      }
      const std::size_t i = std::size_t(v) * w + u;
      auto f = out.at(i);
      write_patch(f, acc[0], acc[1], acc[2], acc[3], acc[4]);
      write_region(seg, i, f);
    }
  }
}

FeatureMap feature_map(const Image& image, const Segmentation& seg) {
  FeatureMap out;
  feature_map(image, seg, out);
  return out;
}

void score(const FeatureMap& features, std::span<const double> weights, std::span<double> out) {
  const long n = static_cast<long>(features.pixels());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const auto f = features.at(std::size_t(i));
    double s = 0.0;
    for (int k = 0; k < kFeatureDim; ++k) s += f[k] * weights[k];
    out[std::size_t(i)] = s;
  }
}

}  // namespace kernels

std::array<double, kFeatureDim> pixel_features(const Image& image, Pixel p) {
  if (!image.contains(p)) {
    throw InvalidInput("pixel (" + std::to_string(p.u) + ", " + std::to_string(p.v) + ") is outside the image");
  }
  const auto map = kernels::serial::feature_map(image, segment(image));
  std::array<double, kFeatureDim> out;
  const auto f = map.at(std::size_t(p.v) * image.width() + p.u);
  std::copy(f.begin(), f.end(), out.begin());
  return out;
}

FeatureMap compute_features(const Image& image) { return kernels::feature_map(image, segment(image)); }

void compute_features(const Image& image, FeatureMap& out) { kernels::feature_map(image, segment(image), out); }

std::vector<std::uint8_t> footprint_mask(const Image& image, Pixel p) {
  const int w = image.width();
  const int h = image.height();
  std::vector<std::uint8_t> mask(std::size_t(w) * h, 0);
  if (!image.contains(p) || image.at(p) == kBackground) return mask;
  std::vector<Pixel> stack{p};
  mask[std::size_t(p.v) * w + p.u] = 1;
  while (!stack.empty()) {
    const Pixel q = stack.back();
    stack.pop_back();
    const Pixel next[4] = {{q.u - 1, q.v}, {q.u + 1, q.v}, {q.u, q.v - 1}, {q.u, q.v + 1}};
    for (Pixel r : next) {
      if (!image.contains(r)) continue;
      const std::size_t j = std::size_t(r.v) * w + r.u;
      if (mask[j] || image.at(r) == kBackground) continue;
      mask[j] = 1;
      stack.push_back(r);
    }
  }
  return mask;
}

}  // namespace partnr
