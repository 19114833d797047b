#include <cmath>
#include <random>
#include <vector>

#include "blastcast/error.hpp"
#include "blastcast/metrics.hpp"
#include "doctest.h"

using namespace blastcast;
using namespace blastcast::metrics;

namespace {

// Straightforward loop oracles, written without the library's helpers.
double oracle_mape(const std::vector<float>& p, const std::vector<float>& t) {
  double s = 0;
  int n = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (t[k] >= 0.01) {
      s += std::fabs(double(p[k]) - double(t[k])) / double(t[k]);
      n++;
    }
  }
  return 100.0 * s / n;
}

double oracle_r2(const std::vector<float>& p, const std::vector<float>& t) {
  long double mean = 0;
  for (float v : t) mean += v;
  mean /= t.size();
  long double res = 0, tot = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    res += (long double)(p[k] - (long double)t[k]) * (p[k] - (long double)t[k]);
    tot += (t[k] - mean) * (t[k] - mean);
  }
  return double(1 - res / tot);
}

std::vector<float> random_field(std::mt19937_64& rng, std::size_t n, float lo, float hi) {
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(n);
  for (float& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("metric examples") {
  const std::vector<float> t = {0.5f, 0.5f, 1.0f, 0.0f};
  CHECK(rmse(t, t) == 0.0);
  CHECK(mape(t, t) == 0.0);
  CHECK(r2(t, t) == 1.0);

  const std::vector<float> truth = {0.2f, 0.4f};
  const std::vector<float> pred = {0.3f, 0.4f};
  CHECK(rmse(pred, truth) == doctest::Approx(std::sqrt(0.01 / 2)).epsilon(1e-6));
  CHECK(mape(pred, truth) == doctest::Approx(25.0).epsilon(1e-5));

  // Truth below the threshold is excluded from MAPE.
  const std::vector<float> tiny = {0.005f, 0.5f};
  const std::vector<float> off = {0.5f, 0.5f};
  CHECK(mape(off, tiny) == 0.0);
  const std::vector<float> all_tiny = {0.001f, 0.002f};
  CHECK(std::isnan(mape(all_tiny, all_tiny)));

  const std::vector<float> flat = {0.3f, 0.3f, 0.3f};
  CHECK(std::isnan(r2(flat, flat)));

  // Predicting the mean gives R2 = 0.
  const std::vector<float> t3 = {0.0f, 0.5f, 1.0f};
  const std::vector<float> mean3 = {0.5f, 0.5f, 0.5f};
  CHECK(r2(mean3, t3) == doctest::Approx(0.0).epsilon(1e-12));

  const std::vector<float> shorter = {0.1f};
  CHECK_THROWS_AS(rmse(shorter, t3), ContractError);
}

TEST_CASE("metrics agree with loop oracles on random fields") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = random_field(rng, 4096, 0.0f, 1.0f);
    auto p = t;
    std::normal_distribution<float> noise(0.0f, 0.05f);
    for (float& v : p) v += noise(rng);
    CHECK(mape(p, t) == doctest::Approx(oracle_mape(p, t)).epsilon(1e-10));
    CHECK(r2(p, t) == doctest::Approx(oracle_r2(p, t)).epsilon(1e-10));
    CHECK(r2(p, t) <= 1.0);
    CHECK(rmse(p, t) >= 0.0);
    CHECK(mape(p, t) >= 0.0);
  }
}

TEST_CASE("aggregation over a horizon") {
  std::vector<StepMetrics> series;
  for (int k = 0; k < 5; ++k) {
    StepMetrics s;
    s.step = k + 1;
    s.rmse = 0.01 * (k + 1);
    s.mape = 1.0 * (k + 1);
    s.r2 = 1.0 - 0.1 * k;
    series.push_back(s);
  }
  const AggregateMetrics a = aggregate(series, 3);
  CHECK(a.steps == 3);
  CHECK(a.rmse_max == doctest::Approx(0.03));
  CHECK(a.rmse_avg == doctest::Approx(0.02));
  CHECK(a.mape_max == doctest::Approx(3.0));
  CHECK(a.mape_avg == doctest::Approx(2.0));
  CHECK(a.r2_min == doctest::Approx(0.8));
  CHECK(a.r2_max == doctest::Approx(1.0));

  series[1].diverged = true;
  series[1].rmse = INFINITY;
  const AggregateMetrics b = aggregate(series, 3);
  CHECK(b.steps == 2);
  CHECK(b.rmse_avg == doctest::Approx(0.02));

  for (auto& s : series) s.diverged = true;
  CHECK_THROWS_AS(aggregate(series, 5), ConfigError);
  CHECK_THROWS_AS(aggregate(series, 0), ConfigError);
}

TEST_CASE("aggregate json keys and CSV round trip") {
  std::vector<StepMetrics> series(2);
  series[0] = {1, 0.01, 2.0, 0.99, false};
  series[1] = {2, 0.02, NAN, 0.95, false};
  const AggregateMetrics a = aggregate(series, 2);
  const auto j = to_json(a, 2, 0.01);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys[0] == "MAPE_max");
  CHECK(keys[1] == "MAPE_avg");
  CHECK(keys[2] == "RMSE_max");
  CHECK(keys[3] == "RMSE_avg");
  CHECK(keys[4] == "R2_min");
  CHECK(a.mape_avg == doctest::Approx(2.0));

  const auto back = from_csv(to_csv(series));
  REQUIRE(back.size() == 2);
  CHECK(back[0].rmse == series[0].rmse);
  CHECK(back[1].r2 == series[1].r2);
  CHECK(std::isnan(back[1].mape));
  CHECK(format_table("model", a).find("MAPE_max") != std::string::npos);
}
