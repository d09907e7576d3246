#pragma once

#include <span>
#include <vector>

#include "json.hpp"
#include "partnr/topology.hpp"

namespace partnr {

struct Candidate {
  LocalMaximum maximum;
  double normalized = 0.0;  // softmax over the full maxima set
};

struct GateDecision {
  double p_hat = 1.0;
  double threshold = 0.5;
  Verdict verdict = Verdict::kConfident;
  std::vector<Candidate> candidates;
};

// Numerically stable softmax at temperature 1.
std::vector<double> softmax(std::span<const double> values);

// Largest softmax-normalized value among the maxima; in [1/k, 1].
double ambiguity_measure(std::span<const LocalMaximum> maxima);

// Ambiguous iff p_hat <= threshold.
Verdict gate(double p_hat, double threshold);

// Maxima whose normalized value exceeds the floor, in input order. The top
// maximum is always kept.
std::vector<Candidate> candidate_set(std::span<const LocalMaximum> maxima, double candidate_floor);

GateDecision decide(std::span<const LocalMaximum> maxima, double threshold, double candidate_floor);

nlohmann::json to_json(const GateDecision& decision);

}  // namespace partnr
