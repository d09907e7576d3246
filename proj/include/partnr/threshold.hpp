#pragma once

#include <cstdint>
#include <deque>
#include <optional>

#include "json.hpp"
#include "partnr/types.hpp"

namespace partnr {

struct ThresholdConfig {
  double p0 = 0.5;
  double s_des = 0.9;
  int window = 50;
  double rate = 0.005;
  double p_min = 0.05;
  double p_max = 0.95;
  // p = p0 - rate * (s_des - s) instead of the integrating update.
  bool paper_literal_update = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const ThresholdConfig& cfg);
void from_json(const nlohmann::json& j, ThresholdConfig& cfg);

struct FlagCounts {
  int tp = 0;
  int tn = 0;
  int fp = 0;
  int fn = 0;

  int total() const { return tp + tn + fp + fn; }
  int& operator[](Flag flag);
  int operator[](Flag flag) const;
  friend bool operator==(const FlagCounts&, const FlagCounts&) = default;
};

// Confusion bookkeeping for one action role.
//
//   queried, input necessary      -> TP
//   queried, teacher chose a_max  -> FP
//   autonomous, corrected         -> FN
//   autonomous, not corrected     -> TN
//
// Windowed counts cover the last `window` recorded decisions.
class ConfusionLedger {
 public:
  struct Event {
    std::int64_t t;
    Flag flag;
  };

  explicit ConfusionLedger(int window = 50);

  // Throws InvalidInput unless t is strictly greater than the previous step.
  void record(std::int64_t t, Flag flag);

  int window_length() const { return window_; }
  const FlagCounts& windowed() const { return windowed_; }
  const FlagCounts& totals() const { return totals_; }
  const std::deque<Event>& window_events() const { return events_; }
  std::optional<std::int64_t> last_step() const { return last_t_; }

  // k_TP / (k_TP + k_FN); `fallback` when no necessary decisions are in the window.
  double sensitivity(double fallback) const;
  // k_TN / (k_TN + k_FP); empty when the window has neither.
  std::optional<double> specificity() const;

 private:
  int window_;
  std::deque<Event> events_;
  FlagCounts windowed_;
  FlagCounts totals_;
  std::optional<std::int64_t> last_t_;
};

double estimate_sensitivity(const ConfusionLedger& ledger, double s_des);

// clamp(p + rate * (s_des - s_hat), p_min, p_max), or the literal form when
// cfg.paper_literal_update is set.
double update_threshold(double p_thr, double s_hat, const ThresholdConfig& cfg);
double update_threshold(double p_thr, const ConfusionLedger& ledger, const ThresholdConfig& cfg);

// Ledger plus threshold for a single role.
class ThresholdController {
 public:
  explicit ThresholdController(ThresholdConfig cfg = {});

  double threshold() const { return threshold_; }
  const ConfusionLedger& ledger() const { return ledger_; }
  const ThresholdConfig& config() const { return cfg_; }

  double sensitivity() const { return ledger_.sensitivity(cfg_.s_des); }
  std::optional<double> specificity() const { return ledger_.specificity(); }

  // Records the flag and applies one threshold update. Returns the new threshold.
  double observe(std::int64_t t, Flag flag);

 private:
  ThresholdConfig cfg_;
  ConfusionLedger ledger_;
  double threshold_;
};

}  // namespace partnr
