#include "partnr/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "partnr/error.hpp"

namespace partnr {
namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void attach(std::size_t child_root, std::size_t parent_root) { parent_[child_root] = parent_root; }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

std::vector<LocalMaximum> persistent_maxima(const Heatmap& heatmap, double persistence_min) {
  if (!(persistence_min >= 0.0)) throw InvalidInput("persistence_min must be >= 0");

  const int w = heatmap.width();
  const int h = heatmap.height();
  const auto values = heatmap.values();
  const std::size_t n = values.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Row-major index order is the (v, u) tie-break.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;

  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  UnionFind uf(n);
  std::vector<std::size_t> peak_of_root(n, kUnset);  // valid at roots only
  std::vector<bool> entered(n, false);
  std::vector<double> persistence(n, -1.0);          // -1: not a peak

  std::size_t roots[8];
  for (std::size_t idx : order) {
    const int u = static_cast<int>(idx % w);
    const int v = static_cast<int>(idx / w);

    int nroots = 0;
    for (int dv = -1; dv <= 1; ++dv) {
      for (int du = -1; du <= 1; ++du) {
        if (du == 0 && dv == 0) continue;
        const int nu = u + du;
        const int nv = v + dv;
        if (nu < 0 || nv < 0 || nu >= w || nv >= h) continue;
        const std::size_t nidx = static_cast<std::size_t>(nv) * w + nu;
        if (!entered[nidx]) continue;
        const std::size_t r = uf.find(nidx);
        if (std::find(roots, roots + nroots, r) == roots + nroots) roots[nroots++] = r;
      }
    }
    entered[idx] = true;

    if (nroots == 0) {
      peak_of_root[idx] = idx;
      persistence[idx] = kInfinitePersistence;
      continue;
    }

    // The component whose peak entered first survives.
    std::size_t survivor = roots[0];
    for (int i = 1; i < nroots; ++i) {
      if (rank[peak_of_root[roots[i]]] < rank[peak_of_root[survivor]]) survivor = roots[i];
    }
    for (int i = 0; i < nroots; ++i) {
      const std::size_t r = roots[i];
      if (r == survivor) continue;
      const std::size_t dying_peak = peak_of_root[r];
      persistence[dying_peak] = values[dying_peak] - values[idx];
      uf.attach(r, survivor);
    }
    uf.attach(idx, survivor);
  }

  std::vector<LocalMaximum> maxima;
  for (std::size_t idx = 0; idx < n; ++idx) {
    const double p = persistence[idx];
    if (p <= 0.0) continue;  // not a peak, or a plateau artifact
    if (p < persistence_min) continue;
    maxima.push_back({heatmap.pixel(idx), values[idx], p});
  }
  std::sort(maxima.begin(), maxima.end(), [](const LocalMaximum& a, const LocalMaximum& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.pixel < b.pixel;
  });
  return maxima;
}

double default_persistence_min(const Heatmap& heatmap, double relative) {
  return relative * (heatmap.max() - heatmap.min());
}

Pixel argmax_pixel(const Heatmap& heatmap) {
  const auto values = heatmap.values();
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return heatmap.pixel(best);
}

nlohmann::json maxima_to_json(std::span<const LocalMaximum> maxima) {
  auto out = nlohmann::json::array();
  for (const auto& m : maxima) {
    nlohmann::json persistence = std::isinf(m.persistence) ? nlohmann::json("inf")
                                                           : nlohmann::json(m.persistence);
    out.push_back({{"u", m.pixel.u}, {"v", m.pixel.v}, {"value", m.value}, {"persistence", persistence}});
  }
  return out;
}

}  // namespace partnr
