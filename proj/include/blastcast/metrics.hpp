#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace blastcast::metrics {

// All metrics take normalized fields, prediction first, as flat spans.

/// sqrt(mean((pred - truth)^2)).
double rmse(std::span<const float> pred, std::span<const float> truth);

/// 100 * mean(|pred - truth| / truth) over cells with truth >= threshold.
/// Returns NaN when no cell qualifies.
double mape(std::span<const float> pred, std::span<const float> truth,
            double threshold = 0.01);

/// 1 - SS_res / SS_tot. Returns NaN for a constant truth field.
double r2(std::span<const float> pred, std::span<const float> truth);

struct StepMetrics {
  int step = 0;
  double rmse = 0.0;
  double mape = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
  bool diverged = false;

  bool mape_included() const { return !diverged && !std::isnan(mape); }
  bool r2_included() const { return !diverged && !std::isnan(r2); }
  bool included() const { return !diverged && std::isfinite(rmse); }
};

StepMetrics evaluate_step(int step, std::span<const float> pred,
                          std::span<const float> truth, double threshold = 0.01);

/// Column order follows the comparison tables: MAPE_max, MAPE_avg, RMSE_max,
/// RMSE_avg, R2_min, plus R2_max.
struct AggregateMetrics {
  double mape_max = 0.0;
  double mape_avg = 0.0;
  double rmse_max = 0.0;
  double rmse_avg = 0.0;
  double r2_min = 0.0;
  double r2_max = 0.0;
  int steps = 0;
};

/// Aggregates over the first `horizon` entries of `series`, skipping
/// excluded steps per metric. Throws ConfigError when nothing is included.
AggregateMetrics aggregate(std::span<const StepMetrics> series, int horizon);

std::string to_csv(std::span<const StepMetrics> series);
std::vector<StepMetrics> from_csv(const std::string& text);
nlohmann::ordered_json to_json(const AggregateMetrics& a, int horizon,
                               double threshold);
/// Fixed-width text table with the same column order.
std::string format_table(const std::string& label, const AggregateMetrics& a);

}  // namespace blastcast::metrics
