#include "blastcast/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "blastcast/binary_io.hpp"
#include "blastcast/error.hpp"
#include "blastcast/rng.hpp"

namespace blastcast::train {

using torch::Tensor;

namespace {

constexpr double kScharrX[3][3] = {{-3, 0, 3}, {-10, 0, 10}, {-3, 0, 3}};
constexpr double kScharrY[3][3] = {{-3, -10, -3}, {0, 0, 0}, {3, 10, 3}};

void check_kernels_intact(const Tensor& k) {
  const Tensor c = k.to(torch::kFloat64).contiguous();
  const double* d = c.data_ptr<double>();
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (d[a * 3 + b] != kScharrX[a][b] || d[9 + a * 3 + b] != kScharrY[a][b]) {
        throw Error(ErrorKind::kContract, "Scharr kernels were modified");
      }
    }
  }
}

}  // namespace

Tensor scharr_kernels(torch::TensorOptions options) {
  Tensor k = torch::empty({2, 1, 3, 3}, torch::kFloat64);
  auto a = k.accessor<double, 4>();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      a[0][0][r][c] = kScharrX[r][c];
      a[1][0][r][c] = kScharrY[r][c];
    }
  }
  return k.to(options).set_requires_grad(false);
}

std::pair<Tensor, Tensor> scharr_gradients(const Tensor& p) {
  if (p.dim() != 4 || p.size(1) != 1) {
    throw ContractError("scharr_gradients expects (N, 1, H, W)");
  }
  if (p.size(2) < 3 || p.size(3) < 3) {
    throw ContractError("scharr_gradients needs fields of at least 3x3");
  }
  namespace F = torch::nn::functional;
  const Tensor padded =
      F::pad(p, F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReplicate));
  const Tensor g = F::conv2d(padded, scharr_kernels(p.options().requires_grad(false)));
  return {g.narrow(1, 0, 1), g.narrow(1, 1, 1)};
}

void LossConfig::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
    throw ConfigError("loss weights must be non-negative");
  }
}

LossTerms composite_loss(const Tensor& pred, const Tensor& truth,
                         const LossConfig& cfg) {
  if (pred.sizes() != truth.sizes()) {
    throw ContractError("loss inputs differ in shape: " + c10::str(pred.sizes()) +
                        " vs " + c10::str(truth.sizes()));
  }
  LossTerms t;
  t.data = (pred - truth).abs().mean();
  const auto [gxp, gyp] = scharr_gradients(pred);
  const auto [gxt, gyt] = scharr_gradients(truth);
  const Tensor per_sample = (gxp - gxt).abs().mean({1, 2, 3}) +
                            (gyp - gyt).abs().mean({1, 2, 3});
  t.grad = per_sample.mean();
  t.total = cfg.lambda1 * t.data + cfg.lambda2 * t.grad;
  return t;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
  if (heldout_samples < 1) throw ConfigError("heldout_samples must be >= 1");
  if (!(stop_below_data >= 0.0)) throw ConfigError("stop_below_data must be >= 0");
  if (!(time_budget_seconds >= 0.0)) {
    throw ConfigError("time_budget_seconds must be >= 0");
  }
}

SampleSet::SampleSet(std::vector<dataset::CaseWindows> cases)
    : cases_(std::move(cases)) {
  for (std::size_t c = 0; c < cases_.size(); ++c) {
    if (cases_[c].height() != cases_.front().height() ||
        cases_[c].width() != cases_.front().width()) {
      throw ContractError("cases in one sample set must share a grid");
    }
    for (std::size_t k = 0; k < cases_[c].size(); ++k) index_.emplace_back(c, k);
  }
}

std::pair<Tensor, Tensor> SampleSet::batch(
    const std::vector<std::size_t>& samples) const {
  if (samples.empty()) throw ContractError("empty batch");
  const auto& first = cases_.front();
  const int64_t t = first.params().window;
  const int64_t h = first.height();
  const int64_t w = first.width();
  const auto b = static_cast<int64_t>(samples.size());
  Tensor x = torch::empty({b, t, dataset::kChannels, h, w}, torch::kFloat32);
  Tensor y = torch::empty({b, 1, h, w}, torch::kFloat32);
  const std::size_t in_size = static_cast<std::size_t>(t * dataset::kChannels * h * w);
  const std::size_t out_size = static_cast<std::size_t>(h * w);
  for (int64_t n = 0; n < b; ++n) {
    const auto& [c, k] = index_.at(samples[n]);
    cases_[c].fill_window(k, {x.data_ptr<float>() + n * in_size, in_size});
    cases_[c].fill_target(k, {y.data_ptr<float>() + n * out_size, out_size});
  }
  return {x, y};
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, long epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
  shuffle(order, rng);
  return order;
}

std::vector<std::size_t> batch_indices(std::size_t n, int batch_size,
                                       std::uint64_t seed, long iteration) {
  const long per_epoch = static_cast<long>((n + batch_size - 1) / batch_size);
  const long epoch = (iteration - 1) / per_epoch;
  const long slot = (iteration - 1) % per_epoch;
  const std::vector<std::size_t> order = epoch_order(n, seed, epoch);
  const std::size_t begin = static_cast<std::size_t>(slot) * batch_size;
  const std::size_t end = std::min(n, begin + batch_size);
  return {order.begin() + begin, order.begin() + end};
}

std::string history_csv(const std::vector<LossRecord>& history) {
  std::ostringstream out;
  out << "iteration,L_data,L_grad,L_total\n";
  char buf[128];
  for (const LossRecord& r : history) {
    std::snprintf(buf, sizeof buf, "%ld,%.9g,%.9g,%.9g\n", r.iteration, r.data,
                  r.grad, r.total);
    out << buf;
  }
  return out.str();
}

double heldout_loss(net::BlastNet& model, const SampleSet& set,
                    const std::vector<std::size_t>& samples) {
  torch::NoGradGuard no_grad;
  const bool was_training = model->is_training();
  model->eval();
  double sum = 0.0;
  const std::size_t chunk = 8;
  for (std::size_t begin = 0; begin < samples.size(); begin += chunk) {
    const std::vector<std::size_t> part(
        samples.begin() + begin,
        samples.begin() + std::min(samples.size(), begin + chunk));
    auto [x, y] = set.batch(part);
    sum += (model->forward(x) - y).abs().mean().item<double>() * part.size();
  }
  model->train(was_training);
  return sum / samples.size();
}

namespace {

bool all_finite(net::BlastNet& model) {
  for (const auto& p : model->parameters()) {
    if (!torch::isfinite(p).all().item<bool>()) return false;
  }
  return true;
}

std::string iteration_name(long it) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "iter_%07ld.ckpt", it);
  return buf;
}

}  // namespace

TrainResult train(net::BlastNet model, const SampleSet& train_set,
                  const SampleSet& heldout, const TrainConfig& cfg,
                  const LossConfig& loss_cfg,
                  const std::optional<std::filesystem::path>& run_dir,
                  const std::function<void(const Progress&)>& on_progress) {
  cfg.validate();
  loss_cfg.validate();
  if (train_set.empty()) throw ConfigError("no training samples");
  if (run_dir) std::filesystem::create_directories(*run_dir / "checkpoints");

  torch::optim::Adam optimizer(
      model->parameters(),
      torch::optim::AdamOptions(cfg.learning_rate).weight_decay(cfg.weight_decay));
  const Tensor kernels = scharr_kernels();

  auto spread = [&](const SampleSet& set) {
    std::vector<std::size_t> ids;
    const std::size_t m = std::min<std::size_t>(cfg.heldout_samples, set.size());
    for (std::size_t k = 0; k < m; ++k) ids.push_back(k * set.size() / m);
    return ids;
  };
  const std::vector<std::size_t> heldout_ids = spread(heldout);
  const std::vector<std::size_t> train_ids = spread(train_set);
  const auto started = std::chrono::steady_clock::now();

  TrainResult result;
  std::string best_bytes;
  std::string last_good_bytes = net::checkpoint_bytes(model);
  model->train();

  for (long it = 1; it <= cfg.iterations; ++it) {
    auto [x, y] =
        train_set.batch(batch_indices(train_set.size(), cfg.batch_size, cfg.seed, it));
    const LossTerms loss = composite_loss(model->forward(x), y, loss_cfg);
    const double total = loss.total.item<double>();
    if (!std::isfinite(total)) {
      std::string where = "not saved";
      if (run_dir) {
        const auto path = *run_dir / "last_finite.ckpt";
        if (all_finite(model)) {
          net::save_checkpoint(path, model);
        } else {
          io::write_file(path, last_good_bytes);
        }
        io::write_file(*run_dir / "loss_history.csv", history_csv(result.history));
        where = path.string();
      }
      throw Error(ErrorKind::kDiverged,
                  "non-finite loss at iteration " + std::to_string(it) +
                      "; last finite weights: " + where);
    }
    optimizer.zero_grad();
    loss.total.backward();
    optimizer.step();

    LossRecord rec{it, loss.data.item<double>(), loss.grad.item<double>(), total};
    result.history.push_back(rec);
    if (on_progress) on_progress({it, rec});

    result.iterations_run = it;
    const bool out_of_time =
        cfg.time_budget_seconds > 0.0 &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() >
            cfg.time_budget_seconds;
    bool stop = out_of_time;
    if (it % cfg.checkpoint_every == 0 || it == cfg.iterations || out_of_time) {
      check_kernels_intact(kernels);
      last_good_bytes = net::checkpoint_bytes(model);
      if (run_dir) {
        io::write_file(*run_dir / "checkpoints" / iteration_name(it), last_good_bytes);
        io::write_file(*run_dir / "loss_history.csv", history_csv(result.history));
      }
      if (!heldout_ids.empty()) {
        const double h = heldout_loss(model, heldout, heldout_ids);
        if (!result.best_heldout || h < *result.best_heldout) {
          result.best_heldout = h;
          result.best_iteration = it;
          best_bytes = last_good_bytes;
        }
      }
      if (cfg.stop_below_data > 0.0) {
        result.train_data_loss = heldout_loss(model, train_set, train_ids);
        if (*result.train_data_loss < cfg.stop_below_data) {
          result.target_reached = true;
          stop = true;
        }
      }
    }
    if (stop) break;
  }

  if (run_dir) {
    io::write_file(*run_dir / "final.ckpt", last_good_bytes);
    io::write_file(*run_dir / "best.ckpt",
                   best_bytes.empty() ? last_good_bytes : best_bytes);
    io::write_file(*run_dir / "loss_history.csv", history_csv(result.history));
  }
  if (best_bytes.empty()) {
    result.best_iteration = result.iterations_run;
    result.model = model;
  } else {
    result.model = net::model_from_checkpoint_bytes(best_bytes, "best weights");
  }
  result.model->eval();
  return result;
}

void set_deterministic(bool on) {
  if (on) {
    torch::set_num_threads(1);
    at::globalContext().setDeterministicAlgorithms(true, false);
  } else {
    at::globalContext().setDeterministicAlgorithms(false, false);
  }
}

}  // namespace blastcast::train
