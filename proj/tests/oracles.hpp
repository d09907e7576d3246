// Independent reference implementations used as test oracles. They favour
// obviousness over speed and share no code with the library under test.
#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include "partnr/heatmap.hpp"
#include "partnr/rng.hpp"

namespace oracle {

// Pixels strictly greater than every 8-neighbour.
inline std::vector<partnr::Pixel> strict_local_maxima(const partnr::Heatmap& h) {
  std::vector<partnr::Pixel> out;
  for (int v = 0; v < h.height(); ++v) {
    for (int u = 0; u < h.width(); ++u) {
      bool strict = true;
      for (int dv = -1; dv <= 1 && strict; ++dv) {
        for (int du = -1; du <= 1 && strict; ++du) {
          if (du == 0 && dv == 0) continue;
          const int nu = u + du, nv = v + dv;
          if (nu < 0 || nv < 0 || nu >= h.width() || nv >= h.height()) continue;
          if (h.at(nu, nv) >= h.at(u, v)) strict = false;
        }
      }
      if (strict) out.push_back({u, v});
    }
  }
  return out;
}

// Persistence of a strict maximum by brute force: the highest level at which
// the superlevel component holding the peak also holds a higher pixel. For
// pairwise-distinct values this is the elder-rule death level.
inline double brute_persistence(const partnr::Heatmap& h, partnr::Pixel peak) {
  const double top = h.at(peak);
  std::vector<double> levels(h.values().begin(), h.values().end());
  std::sort(levels.begin(), levels.end(), std::greater<>());
  for (double level : levels) {
    if (level > top) continue;
    std::vector<char> seen(h.size(), 0);
    std::deque<partnr::Pixel> queue{peak};
    seen[h.index(peak.u, peak.v)] = 1;
    bool merged = false;
    while (!queue.empty() && !merged) {
      const auto p = queue.front();
      queue.pop_front();
      if (h.at(p) > top) merged = true;
      for (int dv = -1; dv <= 1; ++dv) {
        for (int du = -1; du <= 1; ++du) {
          const partnr::Pixel q{p.u + du, p.v + dv};
          if (!h.contains(q) || seen[h.index(q.u, q.v)] || h.at(q) < level) continue;
          seen[h.index(q.u, q.v)] = 1;
          queue.push_back(q);
        }
      }
    }
    if (merged) return top - level;
  }
  return std::numeric_limits<double>::infinity();
}

// Heatmap with pairwise-distinct values: a random permutation of 0..n-1
// scaled into [0, 1).
inline partnr::Heatmap distinct_heatmap(int w, int h, partnr::Rng& rng) {
  std::vector<double> values(std::size_t(w) * h);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = double(i) / double(values.size());
  std::shuffle(values.begin(), values.end(), rng);
  return partnr::Heatmap(w, h, std::move(values));
}

// Smooth random field: a few Gaussian bumps, so persistence is meaningful.
inline partnr::Heatmap bumpy_heatmap(int w, int h, int bumps, partnr::Rng& rng) {
  std::uniform_real_distribution<double> pos(0.0, 1.0);
  std::vector<double> values(std::size_t(w) * h, 0.0);
  for (int b = 0; b < bumps; ++b) {
    const double cu = pos(rng) * w, cv = pos(rng) * h, amp = 0.5 + pos(rng), s = 1.0 + 3.0 * pos(rng);
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const double d2 = (u - cu) * (u - cu) + (v - cv) * (v - cv);
        values[std::size_t(v) * w + u] += amp * std::exp(-d2 / (2 * s * s));
      }
    }
  }
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += 1e-9 * double(i % 7);
  return partnr::Heatmap(w, h, std::move(values));
}

inline std::vector<double> softmax(const std::vector<double>& x) {
  long double m = *std::max_element(x.begin(), x.end()), s = 0;
  for (double v : x) s += std::exp((long double)v - m);
  std::vector<double> out;
  for (double v : x) out.push_back(double(std::exp((long double)v - m) / s));
  return out;
}

}  // namespace oracle
