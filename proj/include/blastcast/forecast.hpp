#pragma once

#include <optional>
#include <vector>

#include "blastcast/dataset.hpp"
#include "blastcast/frames.hpp"
#include "blastcast/network.hpp"

namespace blastcast::forecast {

struct RolloutResult {
  /// Predicted frames only: entry k is frame start + T + k.
  std::vector<FieldF> normalized;
  /// True while the input window still held a ground-truth frame.
  std::vector<bool> ground_truth_seeded;
  /// Wall time of each step, seconds.
  std::vector<double> step_seconds;
  /// Step (0-based) whose prediction was non-finite; the rollout stops there.
  std::optional<int> diverged_at;
  /// Frame index of the first seed frame.
  long start_index = 0;

  std::size_t size() const { return normalized.size(); }
  double total_seconds() const;
  /// Predicted frames as absolute pressures.
  FrameSequence denormalized(const dataset::NormalizationStats& stats,
                             const std::string& case_id, const GridSpec& grid,
                             double dt_out) const;
};

/// Autoregressive rollout from `seed` (exactly T normalized frames, frame
/// indices start_index..start_index+T-1). Each step re-runs the recurrent
/// core from a zero state over the current window; per-frame encoder
/// outputs are cached. Throws ContractError on bad inputs.
RolloutResult rollout(net::BlastNet& model, const std::vector<FieldF>& seed,
                      const dataset::Statics& statics,
                      const dataset::WindowParams& params, int n_steps,
                      long start_index = 0);

}  // namespace blastcast::forecast
