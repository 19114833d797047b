#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "blastcast/app.hpp"

namespace blastcast::app {

namespace {

struct Band {
  std::vector<double> mean;
  std::vector<double> sd;
};

// Mean and deviation across cases at each step; NaN where no case counts.
template <typename Get, typename Keep>
Band band(const Evaluation& eval, std::size_t steps, Get get, Keep keep) {
  Band b;
  for (std::size_t k = 0; k < steps; ++k) {
    double sum = 0.0, sq = 0.0;
    int n = 0;
    for (const auto& c : eval.cases) {
      if (k >= c.steps.size() || !keep(c.steps[k])) continue;
      const double v = get(c.steps[k]);
      sum += v;
      sq += v * v;
      ++n;
    }
    const double mean = n ? sum / n : std::nan("");
    b.mean.push_back(mean);
    b.sd.push_back(n ? std::sqrt(std::max(0.0, sq / n - mean * mean)) : std::nan(""));
  }
  return b;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string panel(const Band& b, const std::string& title, double x0) {
  constexpr double kW = 300, kH = 220, kTop = 30;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t k = 0; k < b.mean.size(); ++k) {
    if (std::isnan(b.mean[k])) continue;
    lo = std::min(lo, b.mean[k] - b.sd[k]);
    hi = std::max(hi, b.mean[k] + b.sd[k]);
  }
  std::string s = "<g>\n<rect x=\"" + num(x0) + "\" y=\"" + num(kTop) + "\" width=\"" +
                  num(kW) + "\" height=\"" + num(kH) +
                  "\" fill=\"none\" stroke=\"#444\"/>\n<text x=\"" + num(x0 + kW / 2) +
                  "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" + title + "</text>\n";
  if (!std::isfinite(lo)) return s + "</g>\n";
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double n = std::max<double>(1.0, b.mean.size() - 1.0);
  auto px = [&](std::size_t k) { return x0 + kW * k / n; };
  auto py = [&](double v) { return kTop + kH * (hi - v) / (hi - lo); };

  std::string upper, lower, line;
  for (std::size_t k = 0; k < b.mean.size(); ++k) {
    if (std::isnan(b.mean[k])) continue;
    upper += num(px(k)) + "," + num(py(b.mean[k] + b.sd[k])) + " ";
    line += num(px(k)) + "," + num(py(b.mean[k])) + " ";
  }
  for (std::size_t k = b.mean.size(); k-- > 0;) {
    if (std::isnan(b.mean[k])) continue;
    lower += num(px(k)) + "," + num(py(b.mean[k] - b.sd[k])) + " ";
  }
  s += "<polygon points=\"" + upper + lower + "\" fill=\"#9ecae1\" opacity=\"0.6\"/>\n";
  s += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"#08519c\"/>\n";
  s += "<text x=\"" + num(x0 - 4) + "\" y=\"" + num(kTop + 10) +
       "\" text-anchor=\"end\" font-size=\"10\">" + num(hi) + "</text>\n";
  s += "<text x=\"" + num(x0 - 4) + "\" y=\"" + num(kTop + kH) +
       "\" text-anchor=\"end\" font-size=\"10\">" + num(lo) + "</text>\n";
  s += "<text x=\"" + num(x0 + kW / 2) + "\" y=\"" + num(kTop + kH + 16) +
       "\" text-anchor=\"middle\" font-size=\"11\">step</text>\n";
  return s + "</g>\n";
}

}  // namespace

std::string metric_curves_svg(const Evaluation& eval) {
  std::size_t steps = 0;
  for (const auto& c : eval.cases) steps = std::max(steps, c.steps.size());
  using M = metrics::StepMetrics;
  const Band rmse = band(eval, steps, [](const M& m) { return m.rmse; },
                         [](const M& m) { return m.included(); });
  const Band mape = band(eval, steps, [](const M& m) { return m.mape; },
                         [](const M& m) { return m.mape_included(); });
  const Band r2 = band(eval, steps, [](const M& m) { return m.r2; },
                       [](const M& m) { return m.r2_included(); });
  std::string s =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1060\" height=\"280\" "
      "font-family=\"sans-serif\">\n";
  s += panel(rmse, "RMSE", 50);
  s += panel(mape, "MAPE (%)", 400);
  s += panel(r2, "R2", 750);
  return s + "</svg>\n";
}

}  // namespace blastcast::app
