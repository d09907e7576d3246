#pragma once

#include <limits>
#include <span>
#include <vector>

#include "json.hpp"

#include "partnr/heatmap.hpp"

namespace partnr {

inline constexpr double kInfinitePersistence = std::numeric_limits<double>::infinity();

// A peak of the superlevel-set filtration. The global maximum carries
// infinite persistence.
struct LocalMaximum {
  Pixel pixel;
  double value = 0.0;
  double persistence = 0.0;

  friend bool operator==(const LocalMaximum&, const LocalMaximum&) = default;
};

/// 0-dimensional persistence of the descending (superlevel) filtration over
/// the 8-connected pixel grid.
///
/// Pixels enter in (value desc, v asc, u asc) order, so every flat plateau is
/// represented by its first pixel in row-major order. When two components
/// meet, the one whose peak entered later dies with persistence
/// peak - level. Peaks that die at their own birth level are plateau
/// artifacts, not strict maxima, and are never reported.
///
/// Returns peaks with persistence >= persistence_min, sorted by value
/// descending and then (v, u) ascending. The global maximum is always first.
std::vector<LocalMaximum> persistent_maxima(const Heatmap& heatmap, double persistence_min);

// 0.05 * (max - min) unless another fraction is given.
double default_persistence_min(const Heatmap& heatmap, double relative = 0.05);

// First maximal pixel in row-major order.
Pixel argmax_pixel(const Heatmap& heatmap);

// [{u, v, value, persistence}], infinite persistence written as "inf".
nlohmann::json maxima_to_json(std::span<const LocalMaximum> maxima);

}  // namespace partnr
