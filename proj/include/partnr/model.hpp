#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "partnr/dataset.hpp"
#include "partnr/features.hpp"
#include "partnr/heatmap.hpp"
#include "partnr/rng.hpp"

namespace partnr {

struct TrainConfig {
  double learning_rate = 0.5;
  double l2 = 1e-4;
  int epochs = 50;
  // Examples per update; 0 means full batch.
  int batch_size = 32;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

using WeightVector = std::array<double, kFeatureDim>;

// Linear value maps: Q(u, v) = <w[role][color], features(u, v)>, one weight
// vector per (role, color token). Zero weights give a constant heatmap.
class ValueModel {
 public:
  static constexpr int kVersion = 1;

  ValueModel();

  const WeightVector& weights(Role role, int color) const;
  WeightVector& weights(Role role, int color);

  std::span<const double> flat() const { return {&weights_[0][0][0], kSize}; }
  std::span<double> flat() { return {&weights_[0][0][0], kSize}; }

  friend bool operator==(const ValueModel&, const ValueModel&) = default;

  static constexpr std::size_t kSize = 2 * kNumColors * kFeatureDim;

 private:
  std::array<std::array<WeightVector, kNumColors>, 2> weights_{};
};

nlohmann::json to_json(const ValueModel& model);
ValueModel model_from_json(const nlohmann::json& j);
void save_model(const ValueModel& model, const std::string& path);
ValueModel load_model(const std::string& path);

// Pixels suppressed for a place heatmap: the object under the executed pick.
// Empty when the pick landed on background.
std::vector<std::uint8_t> place_mask(const Image& image, std::optional<Pixel> condition);

// Role place requires a condition (InvalidInput otherwise). Masked pixels take
// the minimum over the unmasked ones.
Heatmap predict_heatmap(const ValueModel& model, const Observation& obs, Role role, int color,
                        std::optional<Pixel> condition = std::nullopt);
Heatmap predict_heatmap(const ValueModel& model, const FeatureMap& features, const Image& image, Role role,
                        int color, std::optional<Pixel> condition);

// Cross-entropy of softmax(Q) against a one-hot target, for one example.
struct ExampleLoss {
  double loss = 0.0;
  WeightVector gradient{};  // d loss / d w[role][color]
};

ExampleLoss example_loss(const ValueModel& model, const FeatureMap& features,
                         std::span<const std::uint8_t> mask, Role role, int color, Pixel target);

// Mean cross-entropy over every example plus l2/2 * ||w||^2.
double dataset_loss(const ValueModel& model, const Dataset& dataset, double l2);

// Batch gradient of the mean loss (without the l2 term), flattened like
// ValueModel::flat. Examples are evaluated across OpenMP threads and reduced
// in index order, so the result does not depend on the thread count.
std::vector<double> batch_gradient(const ValueModel& model, const Dataset& dataset,
                                   std::span<const ExampleRef> batch, double* mean_loss = nullptr);

namespace kernels::serial {
std::vector<double> batch_gradient(const ValueModel& model, const Dataset& dataset,
                                   std::span<const ExampleRef> batch, double* mean_loss = nullptr);
}

// `epochs` passes over a seeded shuffle in mini-batches of cfg.batch_size.
// Throws InvalidInput on an empty dataset.
ValueModel train(ValueModel model, const Dataset& dataset, int epochs, const TrainConfig& cfg, Rng& rng);

// `steps` updates on batches drawn uniformly with replacement (all examples
// in full-batch mode).
ValueModel train_steps(ValueModel model, const Dataset& dataset, int steps, const TrainConfig& cfg, Rng& rng);

// Updates one epoch costs on a dataset with this many examples.
int updates_per_epoch(std::size_t examples, const TrainConfig& cfg);

}  // namespace partnr
