#pragma once

// Network and loss checks shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "blastcast/network.hpp"
#include "blastcast/training.hpp"

namespace checks {

using blastcast::net::BlastNet;
using blastcast::net::ModelConfig;

/// Double-loop cross-correlation with replicate padding.
inline std::vector<double> correlate(const std::vector<double>& p, int h, int w,
                                     const double k[3][3]) {
  std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          const int yy = std::clamp(y + a - 1, 0, h - 1);
          const int xx = std::clamp(x + b - 1, 0, w - 1);
          s += k[a][b] * p[yy * w + xx];
        }
      }
      out[y * w + x] = s;
    }
  }
  return out;
}

inline constexpr double kDx[3][3] = {{-3, 0, 3}, {-10, 0, 10}, {-3, 0, 3}};
inline constexpr double kDy[3][3] = {{-3, -10, -3}, {0, 0, 0}, {3, 10, 3}};

/// Largest absolute difference between scharr_gradients and the loop
/// oracle over `fields` random 16x16 double fields.
inline double scharr_oracle_error(int fields, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int n = 0; n < fields; ++n) {
    std::vector<double> p(256);
    for (double& v : p) v = u(rng);
    const torch::Tensor t =
        torch::from_blob(p.data(), {1, 1, 16, 16}, torch::kFloat64).clone();
    const auto [gx, gy] = blastcast::train::scharr_gradients(t);
    const auto ox = correlate(p, 16, 16, kDx);
    const auto oy = correlate(p, 16, 16, kDy);
    const auto ax = gx.contiguous();
    const auto ay = gy.contiguous();
    for (int k = 0; k < 256; ++k) {
      worst = std::max(worst, std::abs(ax.data_ptr<double>()[k] - ox[k]));
      worst = std::max(worst, std::abs(ay.data_ptr<double>()[k] - oy[k]));
    }
  }
  return worst;
}

/// True when a constant field gives zero gradients and the unit ramp
/// P(i, j) = j gives interior Gx = 32 and Gy = 0 exactly.
inline bool scharr_constant_and_ramp_exact() {
  const torch::Tensor c = torch::full({1, 1, 16, 16}, 3.25, torch::kFloat64);
  const auto [cx, cy] = blastcast::train::scharr_gradients(c);
  if (cx.abs().max().item<double>() != 0.0 || cy.abs().max().item<double>() != 0.0) {
    return false;
  }
  const torch::Tensor ramp =
      torch::arange(16, torch::kFloat64).view({1, 1, 1, 16}).expand({1, 1, 16, 16});
  const auto [rx, ry] = blastcast::train::scharr_gradients(ramp.contiguous());
  const torch::Tensor interior_x = rx.slice(2, 1, 15).slice(3, 1, 15);
  const torch::Tensor interior_y = ry.slice(2, 1, 15).slice(3, 1, 15);
  return (interior_x == 32.0).all().item<bool>() &&
         (interior_y == 0.0).all().item<bool>();
}

inline ModelConfig small_config() {
  ModelConfig cfg;
  cfg.c1 = 6;
  cfg.c2 = 8;
  cfg.gru_width = 8;
  cfg.attention_ratio = 2;
  cfg.init_seed = 11;
  return cfg;
}

struct GradCheck {
  double max_rel_error = 0.0;
  int checked = 0;
};

/// Analytic gradients of L_total against central differences for
/// `count` random scalar parameters of a small double-precision model.
inline GradCheck gradient_check(int count, std::uint64_t seed, double step = 1e-3) {
  torch::manual_seed(seed);
  BlastNet model(small_config());
  model->to(torch::kFloat64);
  model->train();

  const torch::Tensor x = torch::rand({2, 10, 4, 16, 16}, torch::kFloat64);
  torch::Tensor target;
  {
    torch::NoGradGuard ng;
    const torch::Tensor base = model->forward(x);
    // Offsets keep every residual and gradient residual away from zero.
    const torch::Tensor ramp_i =
        torch::arange(16, torch::kFloat64).view({1, 1, 1, 16}) * 0.01;
    const torch::Tensor ramp_j =
        torch::arange(16, torch::kFloat64).view({1, 1, 16, 1}) * 0.013;
    target = base + 0.5 + ramp_i + ramp_j;
  }
  auto loss_value = [&]() {
    torch::NoGradGuard ng;
    return blastcast::train::composite_loss(model->forward(x), target).total.item<double>();
  };

  model->zero_grad();
  blastcast::train::composite_loss(model->forward(x), target).total.backward();

  std::vector<torch::Tensor> params = model->parameters();
  std::int64_t total = 0;
  for (const auto& p : params) total += p.numel();
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<std::int64_t> pick(0, total - 1);

  GradCheck out;
  for (int n = 0; n < count; ++n) {
    std::int64_t flat = pick(rng);
    std::size_t which = 0;
    while (flat >= params[which].numel()) flat -= params[which++].numel();
    torch::Tensor p = params[which].view(-1);
    const double analytic = params[which].grad().view(-1)[flat].item<double>();
    double original;
    {
      torch::NoGradGuard ng;
      original = p[flat].item<double>();
      p[flat] = original + step;
    }
    const double up = loss_value();
    {
      torch::NoGradGuard ng;
      p[flat] = original - step;
    }
    const double down = loss_value();
    {
      torch::NoGradGuard ng;
      p[flat] = original;
    }
    const double numeric = (up - down) / (2 * step);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic - numeric) / denom);
    ++out.checked;
  }
  return out;
}

/// Gate values outside (0, 1) over `draws` random weight/input draws.
inline long gate_range_violations(int draws, std::uint64_t seed) {
  torch::manual_seed(seed);
  torch::NoGradGuard ng;
  blastcast::net::ConvGru cell(3, 4);
  long bad = 0;
  for (int n = 0; n < draws; ++n) {
    for (auto& p : cell->parameters()) p.uniform_(-0.5, 0.5);
    const torch::Tensor x = torch::randn({1, 3, 6, 6});
    const torch::Tensor h = torch::randn({1, 4, 6, 6});
    blastcast::net::GruGates g;
    cell->step(x, h, &g);
    bad += ((g.z <= 0) | (g.z >= 1)).sum().item<long>();
    bad += ((g.r <= 0) | (g.r >= 1)).sum().item<long>();
  }
  return bad;
}

/// With all weights and biases zero, one step must give exactly 0.5 * h.
inline bool zero_weight_gru_halves_state() {
  torch::NoGradGuard ng;
  blastcast::net::ConvGru cell(3, 4);
  for (auto& p : cell->parameters()) p.zero_();
  const torch::Tensor h = torch::randn({2, 4, 6, 6});
  const torch::Tensor out = cell->step(torch::randn({2, 3, 6, 6}), h);
  const bool halves = torch::equal(out, 0.5 * h);
  const torch::Tensor zero = cell->step(torch::randn({2, 3, 6, 6}), torch::zeros_like(h));
  return halves && (zero == 0).all().item<bool>();
}

/// Every ablation variant builds and maps (1, 10, 4, 32, 32) to (1, 1, 32, 32).
inline std::vector<std::pair<std::string, bool>> ablation_runs() {
  std::vector<std::pair<std::string, ModelConfig>> variants;
  ModelConfig base = small_config();
  variants.emplace_back("full", base);
  auto v = base;
  v.use_multiscale = false;
  variants.emplace_back("no_multiscale", v);
  v = base;
  v.use_gru = false;
  variants.emplace_back("no_gru", v);
  v = base;
  v.use_encoder_decoder = false;
  variants.emplace_back("no_encoder_decoder", v);
  const char* names[4] = {"pressure", "time", "distance", "layout"};
  for (int c = 1; c < 4; ++c) {
    v = base;
    v.channel_mask[c] = false;
    variants.emplace_back(std::string("no_") + names[c], v);
  }
  std::vector<std::pair<std::string, bool>> out;
  torch::NoGradGuard ng;
  for (auto& [name, cfg] : variants) {
    BlastNet m(cfg);
    m->eval();
    const torch::Tensor y = m->forward(torch::rand({1, 10, 4, 32, 32}));
    out.emplace_back(name, y.sizes() == torch::IntArrayRef({1, 1, 32, 32}) &&
                               torch::isfinite(y).all().item<bool>());
  }
  return out;
}

}  // namespace checks
