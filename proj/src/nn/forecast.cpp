#include "blastcast/forecast.hpp"

#include <chrono>
#include <deque>
#include <numeric>

#include "blastcast/error.hpp"

namespace blastcast::forecast {

using torch::Tensor;

double RolloutResult::total_seconds() const {
  return std::accumulate(step_seconds.begin(), step_seconds.end(), 0.0);
}

FrameSequence RolloutResult::denormalized(const dataset::NormalizationStats& stats,
                                          const std::string& case_id,
                                          const GridSpec& grid,
                                          double dt_out) const {
  FrameSequence out;
  out.case_id = case_id;
  out.grid = grid;
  out.dt_out = dt_out;
  for (const FieldF& f : normalized) out.frames.push_back(dataset::denormalize(f, stats));
  return out;
}

namespace {

Tensor frame_tensor(const FieldF& pressure, long index, const dataset::Statics& statics,
                    const dataset::WindowParams& params) {
  const int h = pressure.ny();
  const int w = pressure.nx();
  Tensor t = torch::empty({1, dataset::kChannels, h, w}, torch::kFloat32);
  dataset::fill_frame_channels(
      pressure, index, statics, params,
      {t.data_ptr<float>(), static_cast<std::size_t>(dataset::kChannels * h * w)});
  return t;
}

FieldF to_field(const Tensor& pred, int nx, int ny) {
  const Tensor c = pred.to(torch::kFloat32).contiguous();
  FieldF f(nx, ny);
  std::copy_n(c.data_ptr<float>(), f.size(), f.storage().begin());
  return f;
}

}  // namespace

RolloutResult rollout(net::BlastNet& model, const std::vector<FieldF>& seed,
                      const dataset::Statics& statics,
                      const dataset::WindowParams& params, int n_steps,
                      long start_index) {
  const int t_len = params.window;
  if (static_cast<int>(seed.size()) != t_len) {
    throw ContractError("rollout needs exactly " + std::to_string(t_len) +
                        " seed frames, got " + std::to_string(seed.size()));
  }
  if (n_steps < 1) throw ContractError("rollout needs n_steps >= 1");
  if (model->config().window != t_len) {
    throw ContractError("model window differs from rollout window");
  }
  const int nx = seed.front().nx();
  const int ny = seed.front().ny();
  for (const FieldF& f : seed) {
    if (f.nx() != nx || f.ny() != ny) throw ContractError("seed frames differ in shape");
  }
  require_same_shape(statics.distance, seed.front(), "distance channel vs seed");
  require_same_shape(statics.layout, seed.front(), "layout channel vs seed");

  torch::NoGradGuard no_grad;
  model->eval();

  std::vector<Tensor> frames;
  for (int k = 0; k < t_len; ++k) {
    frames.push_back(frame_tensor(seed[k], start_index + k, statics, params));
  }
  const Tensor window = torch::stack(frames, 1);
  model->check_input(window);

  // Per-frame encoder outputs for the current window, oldest first.
  std::deque<net::Encoded> cache;
  {
    const net::Encoded all = model->encode(window.flatten(0, 1));
    for (int k = 0; k < t_len; ++k) {
      net::Encoded e;
      e.latent = all.latent.narrow(0, k, 1);
      if (all.skip1.defined()) {
        e.skip1 = all.skip1.narrow(0, k, 1);
        e.skip2 = all.skip2.narrow(0, k, 1);
      }
      cache.push_back(std::move(e));
    }
  }

  RolloutResult result;
  result.start_index = start_index;
  using clock = std::chrono::steady_clock;
  for (int step = 0; step < n_steps; ++step) {
    const auto t0 = clock::now();
    std::vector<Tensor> latents;
    for (const auto& e : cache) latents.push_back(e.latent);
    const Tensor state = model->temporal(torch::stack(latents, 1));
    const Tensor pred = model->decode(state, cache.back());
    if (!torch::isfinite(pred).all().item<bool>()) {
      result.diverged_at = step;
      result.step_seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
      break;
    }
    FieldF field = to_field(pred, nx, ny);
    const long index = start_index + t_len + step;
    if (step + 1 < n_steps) {
      cache.pop_front();
      cache.push_back(model->encode(frame_tensor(field, index, statics, params)));
    }
    result.normalized.push_back(std::move(field));
    result.ground_truth_seeded.push_back(step < t_len);
    result.step_seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
  }
  return result;
}

}  // namespace blastcast::forecast
