#include "blastcast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "blastcast/error.hpp"

namespace blastcast::metrics {

namespace {

void check_shapes(std::span<const float> pred, std::span<const float> truth) {
  if (pred.size() != truth.size()) {
    throw ContractError("metric inputs differ in size: " +
                        std::to_string(pred.size()) + " vs " +
                        std::to_string(truth.size()));
  }
  if (pred.empty()) throw ContractError("metric inputs are empty");
}

}  // namespace

double rmse(std::span<const float> pred, std::span<const float> truth) {
  check_shapes(pred, truth);
  double sum = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double d = static_cast<double>(pred[k]) - truth[k];
    sum += d * d;
  }
  return std::sqrt(sum / pred.size());
}

double mape(std::span<const float> pred, std::span<const float> truth,
            double threshold) {
  check_shapes(pred, truth);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double t = truth[k];
    if (t < threshold || t <= 0.0) continue;
    sum += std::abs(static_cast<double>(pred[k]) - t) / t;
    ++count;
  }
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  return 100.0 * sum / count;
}

double r2(std::span<const float> pred, std::span<const float> truth) {
  check_shapes(pred, truth);
  double mean = 0.0;
  for (float t : truth) mean += t;
  mean /= truth.size();
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double d = static_cast<double>(pred[k]) - truth[k];
    const double m = truth[k] - mean;
    ss_res += d * d;
    ss_tot += m * m;
  }
  if (ss_tot == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return 1.0 - ss_res / ss_tot;
}

StepMetrics evaluate_step(int step, std::span<const float> pred,
                          std::span<const float> truth, double threshold) {
  StepMetrics m;
  m.step = step;
  m.rmse = rmse(pred, truth);
  m.mape = mape(pred, truth, threshold);
  m.r2 = r2(pred, truth);
  m.diverged = !std::isfinite(m.rmse);
  return m;
}

AggregateMetrics aggregate(std::span<const StepMetrics> series, int horizon) {
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  const auto n = std::min(series.size(), static_cast<std::size_t>(horizon));
  AggregateMetrics a;
  a.r2_min = std::numeric_limits<double>::infinity();
  a.r2_max = -std::numeric_limits<double>::infinity();
  int n_rmse = 0;
  int n_mape = 0;
  int n_r2 = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const StepMetrics& s = series[k];
    if (s.included()) {
      a.rmse_max = std::max(a.rmse_max, s.rmse);
      a.rmse_avg += s.rmse;
      ++n_rmse;
    }
    if (s.mape_included()) {
      a.mape_max = std::max(a.mape_max, s.mape);
      a.mape_avg += s.mape;
      ++n_mape;
    }
    if (s.r2_included()) {
      a.r2_min = std::min(a.r2_min, s.r2);
      a.r2_max = std::max(a.r2_max, s.r2);
      ++n_r2;
    }
  }
  if (n_rmse == 0) {
    throw ConfigError("no included steps within the declared horizon");
  }
  a.rmse_avg /= n_rmse;
  a.mape_avg = n_mape > 0 ? a.mape_avg / n_mape
                          : std::numeric_limits<double>::quiet_NaN();
  if (n_mape == 0) a.mape_max = std::numeric_limits<double>::quiet_NaN();
  if (n_r2 == 0) {
    a.r2_min = a.r2_max = std::numeric_limits<double>::quiet_NaN();
  }
  a.steps = n_rmse;
  return a;
}

std::string to_csv(std::span<const StepMetrics> series) {
  std::ostringstream out;
  out << "step,rmse,mape,r2,included\n";
  char buf[160];
  for (const StepMetrics& s : series) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%d\n", s.step, s.rmse,
                  s.mape, s.r2, s.included() ? 1 : 0);
    out << buf;
  }
  return out.str();
}

std::vector<StepMetrics> from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != "step,rmse,mape,r2,included") {
    throw CorruptDatasetError("unexpected metrics CSV header");
  }
  std::vector<StepMetrics> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell[5];
    for (auto& c : cell) std::getline(row, c, ',');
    StepMetrics s;
    try {
      s.step = std::stoi(cell[0]);
      s.rmse = std::stod(cell[1]);
      s.mape = std::stod(cell[2]);
      s.r2 = std::stod(cell[3]);
    } catch (const std::exception&) {
      throw CorruptDatasetError("malformed metrics CSV row: " + line);
    }
    s.diverged = cell[4] == "0" && !std::isfinite(s.rmse);
    out.push_back(s);
  }
  return out;
}

nlohmann::ordered_json to_json(const AggregateMetrics& a, int horizon,
                               double threshold) {
  nlohmann::ordered_json j;
  j["MAPE_max"] = a.mape_max;
  j["MAPE_avg"] = a.mape_avg;
  j["RMSE_max"] = a.rmse_max;
  j["RMSE_avg"] = a.rmse_avg;
  j["R2_min"] = a.r2_min;
  j["R2_max"] = a.r2_max;
  j["horizon"] = horizon;
  j["included_steps"] = a.steps;
  j["mape_threshold"] = threshold;
  return j;
}

std::string format_table(const std::string& label, const AggregateMetrics& a) {
  char buf[256];
  std::ostringstream out;
  std::snprintf(buf, sizeof buf, "%-24s %9s %9s %9s %9s %9s\n", "Model",
                "MAPE_max", "MAPE_avg", "RMSE_max", "RMSE_avg", "R2_min");
  out << buf;
  std::snprintf(buf, sizeof buf, "%-24s %9.2f %9.2f %9.4f %9.4f %9.4f\n",
                label.c_str(), a.mape_max, a.mape_avg, a.rmse_max, a.rmse_avg,
                a.r2_min);
  out << buf;
  return out.str();
}

}  // namespace blastcast::metrics
