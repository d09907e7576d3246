#include "partnr/ambiguity.hpp"

#include <algorithm>
#include <cmath>

#include "partnr/error.hpp"

namespace partnr {

std::vector<double> softmax(std::span<const double> values) {
  std::vector<double> out(values.size());
  if (values.empty()) return out;
  const double top = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::exp(values[i] - top);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

namespace {

std::vector<double> normalized_values(std::span<const LocalMaximum> maxima) {
  if (maxima.empty()) throw InvalidInput("ambiguity measure needs at least one maximum");
  std::vector<double> raw;
  raw.reserve(maxima.size());
  for (const auto& m : maxima) {
    if (!std::isfinite(m.value)) throw InvalidInput("maximum value is not finite");
    raw.push_back(m.value);
  }
  return softmax(raw);
}

}  // namespace

double ambiguity_measure(std::span<const LocalMaximum> maxima) {
  const auto p = normalized_values(maxima);
  return *std::max_element(p.begin(), p.end());
}

Verdict gate(double p_hat, double threshold) {
  return p_hat <= threshold ? Verdict::kAmbiguous : Verdict::kConfident;
}

std::vector<Candidate> candidate_set(std::span<const LocalMaximum> maxima, double candidate_floor) {
  const auto p = normalized_values(maxima);
  const std::size_t top = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < maxima.size(); ++i) {
    if (p[i] > candidate_floor || i == top) out.push_back({maxima[i], p[i]});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Candidate& a, const Candidate& b) { return a.normalized > b.normalized; });
  return out;
}

GateDecision decide(std::span<const LocalMaximum> maxima, double threshold, double candidate_floor) {
  GateDecision d;
  d.p_hat = ambiguity_measure(maxima);
  d.threshold = threshold;
  d.verdict = gate(d.p_hat, threshold);
  d.candidates = candidate_set(maxima, candidate_floor);
  return d;
}

nlohmann::json to_json(const GateDecision& decision) {
  auto candidates = nlohmann::json::array();
  for (const auto& c : decision.candidates) {
    candidates.push_back({{"u", c.maximum.pixel.u},
                          {"v", c.maximum.pixel.v},
                          {"value", c.maximum.value},
                          {"normalized", c.normalized}});
  }
  return {{"p_hat", decision.p_hat},
          {"threshold", decision.threshold},
          {"verdict", std::string(to_string(decision.verdict))},
          {"candidates", std::move(candidates)}};
}

}  // namespace partnr
