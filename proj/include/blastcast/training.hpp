#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "blastcast/dataset.hpp"
#include "blastcast/network.hpp"

namespace blastcast::train {

/// Fixed 3x3 Scharr derivative kernels, (2, 1, 3, 3) with x first.
torch::Tensor scharr_kernels(torch::TensorOptions options = torch::kFloat32);

/// Cross-correlation of (N, 1, H, W) fields with the Scharr kernels after
/// replicate padding; both outputs keep the input size.
std::pair<torch::Tensor, torch::Tensor> scharr_gradients(const torch::Tensor& p);

struct LossConfig {
  double lambda1 = 1.0;
  double lambda2 = 0.8;

  void validate() const;
};

struct LossTerms {
  torch::Tensor data;
  torch::Tensor grad;
  torch::Tensor total;
};

/// L_data = mean |pred - true|; L_grad = mean over samples of
/// (mean |dx pred - dx true| + mean |dy pred - dy true|);
/// L_total = lambda1 L_data + lambda2 L_grad. Inputs are (N, 1, H, W).
LossTerms composite_loss(const torch::Tensor& pred, const torch::Tensor& truth,
                         const LossConfig& cfg = {});

struct TrainConfig {
  double learning_rate = 5e-4;
  double weight_decay = 1e-3;
  int batch_size = 32;
  long iterations = 1000;
  std::uint64_t seed = 0;
  /// Checkpoint and held-out evaluation period, in iterations.
  long checkpoint_every = 100;
  /// Held-out samples used for best-checkpoint selection.
  int heldout_samples = 64;
  /// When positive, training stops at the first checkpoint whose one-step
  /// L_data over the training set (evaluation mode) is below this value.
  double stop_below_data = 0.0;
  /// When positive, training stops after the iteration that exceeds this
  /// wall-clock budget, seconds.
  double time_budget_seconds = 0.0;

  void validate() const;
};

/// Window samples of several cases addressed by one flat index.
class SampleSet {
 public:
  SampleSet() = default;
  explicit SampleSet(std::vector<dataset::CaseWindows> cases);

  std::size_t size() const { return index_.size(); }
  bool empty() const { return index_.empty(); }
  const std::vector<dataset::CaseWindows>& cases() const { return cases_; }

  /// Stacks the given samples into (B, T, C, H, W) inputs and (B, 1, H, W)
  /// targets.
  std::pair<torch::Tensor, torch::Tensor> batch(
      const std::vector<std::size_t>& samples) const;

 private:
  std::vector<dataset::CaseWindows> cases_;
  std::vector<std::pair<std::size_t, std::size_t>> index_;
};

/// Sample order of one epoch: Fisher-Yates shuffle seeded from
/// (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, long epoch);

/// Sample indices of training iteration `iteration` (1-based).
std::vector<std::size_t> batch_indices(std::size_t n, int batch_size,
                                       std::uint64_t seed, long iteration);

struct LossRecord {
  long iteration = 0;
  double data = 0.0;
  double grad = 0.0;
  double total = 0.0;
};

std::string history_csv(const std::vector<LossRecord>& history);

struct TrainResult {
  std::vector<LossRecord> history;
  long best_iteration = 0;
  std::optional<double> best_heldout;
  /// Best weights when held-out data exists, otherwise the final weights.
  net::BlastNet model{nullptr};
  /// Last training-set L_data evaluated for the stopping rule.
  std::optional<double> train_data_loss;
  bool target_reached = false;
  long iterations_run = 0;
};

struct Progress {
  long iteration;
  LossRecord record;
};

/// Mean one-step L_data of `model` in evaluation mode over `samples`.
double heldout_loss(net::BlastNet& model, const SampleSet& set,
                    const std::vector<std::size_t>& samples);

/// Trains `model` in place with Adam and teacher forcing. When `run_dir`
/// is set, writes loss_history.csv, periodic checkpoints, best.ckpt and
/// final.ckpt there. Throws Error(kDiverged) on a non-finite loss after
/// saving last_finite.ckpt.
TrainResult train(net::BlastNet model, const SampleSet& train_set,
                  const SampleSet& heldout, const TrainConfig& cfg,
                  const LossConfig& loss_cfg = {},
                  const std::optional<std::filesystem::path>& run_dir = std::nullopt,
                  const std::function<void(const Progress&)>& on_progress = {});

/// Single-threaded, deterministic kernels.
void set_deterministic(bool on);

}  // namespace blastcast::train
