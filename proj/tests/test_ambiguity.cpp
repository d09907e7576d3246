#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "partnr/ambiguity.hpp"
#include "partnr/error.hpp"

using namespace partnr;

namespace {

std::vector<LocalMaximum> maxima_with(const std::vector<double>& values) {
  std::vector<LocalMaximum> out;
  for (std::size_t i = 0; i < values.size(); ++i) out.push_back({{int(i), 0}, values[i], 1.0});
  return out;
}

}  // namespace

TEST_CASE("softmax of three close peaks") {
  const std::vector<double> x{2.000, 1.856, 0.970};
  const auto p = softmax(x);
  CHECK(p[0] == doctest::Approx(0.44986386270047607).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.3895316070069307).epsilon(1e-12));
  CHECK(p[2] == doctest::Approx(0.1606045302925932).epsilon(1e-12));
  CHECK(ambiguity_measure(maxima_with(x)) == doctest::Approx(0.44986386270047607).epsilon(1e-12));
}

TEST_CASE("softmax is stable for large inputs") {
  const auto p = softmax(std::vector<double>{1000.0, 999.0});
  CHECK(std::isfinite(p[0]));
  CHECK(p[0] + p[1] == doctest::Approx(1.0));
}

TEST_CASE("single maximum gives p_hat of exactly one") {
  CHECK(ambiguity_measure(maxima_with({-3.7})) == 1.0);
}

TEST_CASE("m equal maxima give p_hat = 1/m") {
  for (int m = 1; m <= 12; ++m) {
    CHECK(std::abs(ambiguity_measure(maxima_with(std::vector<double>(m, 0.3))) - 1.0 / m) <= 1e-12);
  }
}

TEST_CASE("ambiguity measure against an independent softmax") {
  Rng rng(9);
  std::uniform_real_distribution<double> val(-5, 5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(1 + trial % 9);
    for (double& v : x) v = val(rng);
    const auto ref = oracle::softmax(x);
    CHECK(ambiguity_measure(maxima_with(x)) ==
          doctest::Approx(*std::max_element(ref.begin(), ref.end())).epsilon(1e-12));
    const double p = ambiguity_measure(maxima_with(x));
    CHECK(p >= 1.0 / double(x.size()) - 1e-15);
    CHECK(p <= 1.0);
  }
}

TEST_CASE("empty maxima set is invalid") {
  CHECK_THROWS_AS(ambiguity_measure(std::vector<LocalMaximum>{}), InvalidInput);
}

TEST_CASE("gate is ambiguous at and below the threshold") {
  CHECK(gate(0.45, 0.5) == Verdict::kAmbiguous);
  CHECK(gate(0.5, 0.5) == Verdict::kAmbiguous);
  CHECK(gate(0.5000001, 0.5) == Verdict::kConfident);
  CHECK(gate(1.0, 0.5) == Verdict::kConfident);
}

TEST_CASE("candidate floor drops negligible maxima but keeps the top") {
  const auto maxima = maxima_with({5.0, 4.9, 0.0});
  const auto c = candidate_set(maxima, 0.01);
  REQUIRE(c.size() == 2);
  CHECK(c[0].maximum.pixel == Pixel{0, 0});
  CHECK(c[0].normalized > c[1].normalized);
  // A floor above every normalized value still keeps the top maximum.
  CHECK(candidate_set(maxima, 0.99).size() == 1);

  const auto d = decide(maxima, 0.6, 0.01);
  CHECK(d.verdict == Verdict::kAmbiguous);
  CHECK(d.p_hat == doctest::Approx(oracle::softmax({5.0, 4.9, 0.0})[0]));
  CHECK(d.candidates.size() == 2);
  const auto j = to_json(d);
  CHECK(j["verdict"] == "ambiguous");
  CHECK(j["candidates"].size() == 2);
}
