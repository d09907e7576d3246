#include "partnr/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "partnr/error.hpp"

namespace partnr {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (!(l2 >= 0.0)) throw ConfigError("train.l2 must be >= 0");
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (batch_size < 0) throw ConfigError("train.batch_size must be >= 0");
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
  j = {{"learning_rate", cfg.learning_rate},
       {"l2", cfg.l2},
       {"epochs", cfg.epochs},
       {"batch_size", cfg.batch_size}};
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.l2 = j.value("l2", cfg.l2);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
}

ValueModel::ValueModel() = default;

const WeightVector& ValueModel::weights(Role role, int color) const {
  if (color < 0 || color >= kNumColors) throw UnknownToken("color index out of range");
  return weights_[role == Role::kPick ? 0 : 1][color];
}

WeightVector& ValueModel::weights(Role role, int color) {
  if (color < 0 || color >= kNumColors) throw UnknownToken("color index out of range");
  return weights_[role == Role::kPick ? 0 : 1][color];
}

namespace {

std::size_t flat_offset(Role role, int color) {
  return (static_cast<std::size_t>(role == Role::kPick ? 0 : 1) * kNumColors + color) * kFeatureDim;
}

int head_color(const Command& c, Role role) { return role == Role::kPick ? c.pick_color : c.place_color; }

// Index of the smallest unmasked value, or n when every pixel is masked.
std::size_t unmasked_argmin(std::span<const double> q, std::span<const std::uint8_t> mask) {
  std::size_t best = q.size();
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!mask.empty() && mask[i]) continue;
    if (best == q.size() || q[i] < q[best]) best = i;
  }
  return best;
}

template <class Score>
ExampleLoss example_loss_impl(const ValueModel& model, const FeatureMap& features,
                              std::span<const std::uint8_t> mask, Role role, int color, Pixel target,
                              Score score) {
  const auto& w = model.weights(role, color);
  const std::size_t n = features.pixels();
  const std::size_t t = std::size_t(target.v) * features.width() + target.u;
  thread_local std::vector<double> q;
  q.resize(n);
  score(features, w, q);

  const std::size_t floor_idx = unmasked_argmin(q, mask);
  const bool masking = !mask.empty() && floor_idx < n;
  auto effective = [&](std::size_t i) { return masking && mask[i] ? floor_idx : i; };
  if (masking) {
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i]) q[i] = q[floor_idx];
    }
  }

  const double top = *std::max_element(q.begin(), q.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = std::exp(q[i] - top);  // q now holds unnormalized probabilities
    sum += q[i];
  }
  ExampleLoss out;
  out.loss = std::log(sum) - std::log(q[t]);

  double floor_mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = q[i] / sum;
    if (masking && mask[i]) {
      floor_mass += p;
      continue;
    }
    const auto f = features.at(i);
    for (int k = 0; k < kFeatureDim; ++k) out.gradient[k] += p * f[k];
  }
  if (floor_mass > 0.0) {
    const auto f = features.at(floor_idx);
    for (int k = 0; k < kFeatureDim; ++k) out.gradient[k] += floor_mass * f[k];
  }
  const auto ft = features.at(effective(t));
  for (int k = 0; k < kFeatureDim; ++k) out.gradient[k] -= ft[k];
  return out;
}

template <class FeatureFn, class Score>
ExampleLoss evaluate_example(const ValueModel& model, const Dataset& dataset, ExampleRef ref, FeatureFn features_of,
                             Score score) {
  const auto& e = dataset[ref.entry];
  const Image& img = e.observation.image;
  thread_local FeatureMap features;
  features_of(img, features);
  const Pixel target = ref.role == Role::kPick ? e.action.pick : e.action.place;
  std::vector<std::uint8_t> mask;
  if (ref.role == Role::kPlace) mask = place_mask(img, e.action.pick);
  return example_loss_impl(model, features, mask, ref.role, head_color(e.observation.command, ref.role), target,
                           score);
}

void accumulate(std::vector<double>& grad, const ValueModel& model, const Dataset& dataset, ExampleRef ref,
                const ExampleLoss& ex) {
  (void)model;
  const auto& cmd = dataset[ref.entry].observation.command;
  const std::size_t off = flat_offset(ref.role, head_color(cmd, ref.role));
  for (int k = 0; k < kFeatureDim; ++k) grad[off + k] += ex.gradient[k];
}

void apply_update(ValueModel& model, std::span<const double> grad, const TrainConfig& cfg) {
  auto w = model.flat();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * (grad[i] + cfg.l2 * w[i]);
}

}  // namespace

std::vector<std::uint8_t> place_mask(const Image& image, std::optional<Pixel> condition) {
  if (!condition || !image.contains(*condition)) return {};
  auto mask = footprint_mask(image, *condition);
  if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) return {};
  return mask;
}

Heatmap predict_heatmap(const ValueModel& model, const FeatureMap& features, const Image& image, Role role,
                        int color, std::optional<Pixel> condition) {
  if (role == Role::kPlace && !condition) throw InvalidInput("place heatmap needs the executed pick");
  const auto& w = model.weights(role, color);
  std::vector<double> q(features.pixels());
  kernels::score(features, w, q);
  if (role == Role::kPlace) {
    const auto mask = place_mask(image, condition);
    const std::size_t floor_idx = unmasked_argmin(q, mask);
    if (!mask.empty() && floor_idx < q.size()) {
      const double floor = q[floor_idx];
      for (std::size_t i = 0; i < q.size(); ++i) {
        if (mask[i]) q[i] = floor;
      }
    }
  }
  return Heatmap(features.width(), features.height(), std::move(q));
}

Heatmap predict_heatmap(const ValueModel& model, const Observation& obs, Role role, int color,
                        std::optional<Pixel> condition) {
  return predict_heatmap(model, compute_features(obs.image), obs.image, role, color, condition);
}

ExampleLoss example_loss(const ValueModel& model, const FeatureMap& features, std::span<const std::uint8_t> mask,
                         Role role, int color, Pixel target) {
  if (target.u < 0 || target.v < 0 || target.u >= features.width() || target.v >= features.height()) {
    throw InvalidInput("training target is outside the image");
  }
  return example_loss_impl(model, features, mask, role, color, target,
                           [](const FeatureMap& f, std::span<const double> w, std::span<double> out) {
                             kernels::score(f, w, out);
                           });
}

std::vector<double> batch_gradient(const ValueModel& model, const Dataset& dataset, std::span<const ExampleRef> batch,
                                   double* mean_loss) {
  const long n = static_cast<long>(batch.size());
  std::vector<ExampleLoss> per_example(batch.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    per_example[std::size_t(i)] = evaluate_example(
        model, dataset, batch[std::size_t(i)], [](const Image& img, FeatureMap& out) { compute_features(img, out); },
        [](const FeatureMap& f, std::span<const double> w, std::span<double> out) { kernels::score(f, w, out); });
  }
  std::vector<double> grad(ValueModel::kSize, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    accumulate(grad, model, dataset, batch[i], per_example[i]);
    loss += per_example[i].loss;
  }
  if (n > 0) {
    for (double& g : grad) g /= double(n);
    loss /= double(n);
  }
  if (mean_loss) *mean_loss = loss;
  return grad;
}

namespace kernels::serial {

std::vector<double> batch_gradient(const ValueModel& model, const Dataset& dataset, std::span<const ExampleRef> batch,
                                   double* mean_loss) {
  std::vector<double> grad(ValueModel::kSize, 0.0);
  double loss = 0.0;
  for (const auto& ref : batch) {
    const auto ex = evaluate_example(
        model, dataset, ref,
        [](const Image& img, FeatureMap& out) { kernels::serial::feature_map(img, segment(img), out); },
        [](const FeatureMap& f, std::span<const double> w, std::span<double> out) {
          kernels::serial::score(f, w, out);
        });
    accumulate(grad, model, dataset, ref, ex);
    loss += ex.loss;
  }
  if (!batch.empty()) {
    for (double& g : grad) g /= double(batch.size());
    loss /= double(batch.size());
  }
  if (mean_loss) *mean_loss = loss;
  return grad;
}

}  // namespace kernels::serial

double dataset_loss(const ValueModel& model, const Dataset& dataset, double l2) {
  double loss = 0.0;
  batch_gradient(model, dataset, dataset.examples(), &loss);
  double norm = 0.0;
  for (double w : model.flat()) norm += w * w;
  return loss + 0.5 * l2 * norm;
}

int updates_per_epoch(std::size_t examples, const TrainConfig& cfg) {
  if (examples == 0) return 0;
  if (cfg.batch_size == 0 || std::size_t(cfg.batch_size) >= examples) return 1;
  return static_cast<int>((examples + cfg.batch_size - 1) / cfg.batch_size);
}

ValueModel train(ValueModel model, const Dataset& dataset, int epochs, const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (dataset.examples().empty()) throw InvalidInput("cannot train on an empty dataset");
  if (epochs < 0) throw InvalidInput("epochs must be >= 0");
  std::vector<ExampleRef> order(dataset.examples());
  const std::size_t batch = cfg.batch_size == 0 ? order.size() : std::size_t(cfg.batch_size);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    if (batch < order.size()) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      const auto grad = batch_gradient(model, dataset, std::span(order).subspan(start, len));
      apply_update(model, grad, cfg);
    }
  }
  return model;
}

ValueModel train_steps(ValueModel model, const Dataset& dataset, int steps, const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto& all = dataset.examples();
  if (all.empty()) throw InvalidInput("cannot train on an empty dataset");
  const bool full = cfg.batch_size == 0 || std::size_t(cfg.batch_size) >= all.size();
  std::vector<ExampleRef> batch;
  for (int s = 0; s < steps; ++s) {
    std::span<const ExampleRef> refs = all;
    if (!full) {
      batch.clear();
      std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
      for (int b = 0; b < cfg.batch_size; ++b) batch.push_back(all[pick(rng)]);
      refs = batch;
    }
    apply_update(model, batch_gradient(model, dataset, refs), cfg);
  }
  return model;
}

nlohmann::json to_json(const ValueModel& model) {
  auto weights = nlohmann::json::object();
  for (Role role : kRoles) {
    auto per_color = nlohmann::json::object();
    for (int c = 0; c < kNumColors; ++c) {
      const auto& w = model.weights(role, c);
      per_color[std::string(color_name(c))] = std::vector<double>(w.begin(), w.end());
    }
    weights[std::string(to_string(role))] = std::move(per_color);
  }
  std::vector<std::string> vocab;
  for (int c = 0; c < kNumColors; ++c) vocab.emplace_back(color_name(c));
  return {{"format", "partnr-value-model"},
          {"version", ValueModel::kVersion},
          {"feature_dim", kFeatureDim},
          {"vocabulary", vocab},
          {"weights", std::move(weights)}};
}

ValueModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "partnr-value-model") throw InvalidInput("not a value model checkpoint");
  if (j.value("version", 0) != ValueModel::kVersion) throw InvalidInput("unsupported checkpoint version");
  if (j.at("feature_dim").get<int>() != kFeatureDim) throw InvalidInput("checkpoint feature_dim mismatch");
  ValueModel m;
  for (Role role : kRoles) {
    const auto& per_color = j.at("weights").at(std::string(to_string(role)));
    for (const auto& [name, values] : per_color.items()) {
      const auto v = values.get<std::vector<double>>();
      if (v.size() != kFeatureDim) throw InvalidInput("checkpoint weight vector has the wrong length");
      auto& w = m.weights(role, color_index(name));
      std::copy(v.begin(), v.end(), w.begin());
    }
  }
  return m;
}

void save_model(const ValueModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << to_json(model).dump(1) << '\n';
}

ValueModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return model_from_json(nlohmann::json::parse(in));
}

}  // namespace partnr
