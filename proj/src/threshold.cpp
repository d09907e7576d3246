#include "partnr/threshold.hpp"

#include <algorithm>
#include <string>

#include "partnr/error.hpp"

namespace partnr {

void ThresholdConfig::validate() const {
  auto in_unit = [](double x) { return x > 0.0 && x < 1.0; };
  if (!in_unit(p_min) || !in_unit(p_max) || !(p_min < p0 && p0 < p_max)) {
    throw ConfigError("threshold: need 0 < p_min < p0 < p_max < 1");
  }
  if (!(s_des > 0.0 && s_des <= 1.0)) throw ConfigError("threshold: s_des must be in (0, 1]");
  if (window < 1) throw ConfigError("threshold: window must be positive");
  if (!(rate > 0.0)) throw ConfigError("threshold: rate must be positive");
}

void to_json(nlohmann::json& j, const ThresholdConfig& cfg) {
  j = {{"p0", cfg.p0},       {"s_des", cfg.s_des}, {"window", cfg.window},
       {"rate", cfg.rate},   {"p_min", cfg.p_min}, {"p_max", cfg.p_max},
       {"paper_literal_update", cfg.paper_literal_update}};
}

void from_json(const nlohmann::json& j, ThresholdConfig& cfg) {
  cfg.p0 = j.value("p0", cfg.p0);
  cfg.s_des = j.value("s_des", cfg.s_des);
  cfg.window = j.value("window", cfg.window);
  cfg.rate = j.value("rate", cfg.rate);
  cfg.p_min = j.value("p_min", cfg.p_min);
  cfg.p_max = j.value("p_max", cfg.p_max);
  cfg.paper_literal_update = j.value("paper_literal_update", cfg.paper_literal_update);
}

int& FlagCounts::operator[](Flag flag) {
  switch (flag) {
    case Flag::kTP: return tp;
    case Flag::kTN: return tn;
    case Flag::kFP: return fp;
    case Flag::kFN: break;
  }
  return fn;
}

int FlagCounts::operator[](Flag flag) const { return const_cast<FlagCounts&>(*this)[flag]; }

ConfusionLedger::ConfusionLedger(int window) : window_(window) {
  if (window_ < 1) throw InvalidInput("ledger window must be positive");
}

void ConfusionLedger::record(std::int64_t t, Flag flag) {
  if (last_t_ && t <= *last_t_) {
    throw InvalidInput("ledger step " + std::to_string(t) + " does not follow " +
                       std::to_string(*last_t_));
  }
  last_t_ = t;
  events_.push_back({t, flag});
  ++windowed_[flag];
  ++totals_[flag];
  if (static_cast<int>(events_.size()) > window_) {
    --windowed_[events_.front().flag];
    events_.pop_front();
  }
}

double ConfusionLedger::sensitivity(double fallback) const {
  const int necessary = windowed_.tp + windowed_.fn;
  if (necessary == 0) return fallback;
  return static_cast<double>(windowed_.tp) / necessary;
}

std::optional<double> ConfusionLedger::specificity() const {
  const int unnecessary = windowed_.tn + windowed_.fp;
  if (unnecessary == 0) return std::nullopt;
  return static_cast<double>(windowed_.tn) / unnecessary;
}

double estimate_sensitivity(const ConfusionLedger& ledger, double s_des) {
  return ledger.sensitivity(s_des);
}

double update_threshold(double p_thr, double s_hat, const ThresholdConfig& cfg) {
  const double error = cfg.s_des - s_hat;
  const double next = cfg.paper_literal_update ? cfg.p0 - cfg.rate * error : p_thr + cfg.rate * error;
  return std::clamp(next, cfg.p_min, cfg.p_max);
}

double update_threshold(double p_thr, const ConfusionLedger& ledger, const ThresholdConfig& cfg) {
  return update_threshold(p_thr, estimate_sensitivity(ledger, cfg.s_des), cfg);
}

ThresholdController::ThresholdController(ThresholdConfig cfg)
    : cfg_(cfg), ledger_(cfg.window), threshold_(cfg.p0) {
  cfg_.validate();
}

double ThresholdController::observe(std::int64_t t, Flag flag) {
  ledger_.record(t, flag);
  threshold_ = update_threshold(threshold_, ledger_, cfg_);
  return threshold_;
}

}  // namespace partnr
