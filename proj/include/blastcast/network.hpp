#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace blastcast::net {

struct ModelConfig {
  int input_channels = 4;
  int window = 10;
  int c1 = 32;
  int c2 = 64;
  int gru_width = 64;
  int attention_ratio = 8;
  int spatial_kernel = 7;
  bool use_multiscale = true;
  bool use_gru = true;
  bool use_encoder_decoder = true;
  /// Input channels kept, in [pressure, time, distance, layout] order.
  std::array<bool, 4> channel_mask{true, true, true, true};
  std::uint64_t init_seed = 0;

  /// Throws ConfigError on non-positive widths or an invalid kernel.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Conv2d options with padding dilation * (kernel / 2).
torch::nn::Conv2dOptions conv_options(int in, int out, int kernel, int stride = 1,
                                      int dilation = 1, bool bias = true);

class CbamImpl : public torch::nn::Module {
 public:
  CbamImpl(int channels, int ratio, int spatial_kernel);
  torch::Tensor forward(const torch::Tensor& x);
  /// (B, C, 1, 1) channel gate for input x.
  torch::Tensor channel_gate(const torch::Tensor& x);
  /// (B, 1, H, W) spatial gate for an already channel-refined input.
  torch::Tensor spatial_gate(const torch::Tensor& x);

  torch::nn::Conv2d fc1{nullptr}, fc2{nullptr}, spatial{nullptr};
};
TORCH_MODULE(Cbam);

/// Three parallel receptive-field branches fused by a 1x1 convolution,
/// then Mish and CBAM. With `multiscale` off a single 3x3 convolution
/// replaces the branches.
class MultiScaleImpl : public torch::nn::Module {
 public:
  MultiScaleImpl(int in, int out, const ModelConfig& cfg);
  torch::Tensor forward(const torch::Tensor& x);
  torch::Tensor branch1(const torch::Tensor& x);
  torch::Tensor branch2(const torch::Tensor& x);
  torch::Tensor branch3(const torch::Tensor& x);
  bool multiscale() const { return multiscale_; }

  torch::nn::Sequential b1{nullptr}, b2{nullptr}, b3{nullptr}, plain{nullptr};
  torch::nn::Conv2d fuse{nullptr};
  Cbam cbam{nullptr};

 private:
  bool multiscale_;
};
TORCH_MODULE(MultiScale);

/// Stride-2 max-pool, conv and conv-1x1-1x1 branches summed.
class ReductionImpl : public torch::nn::Module {
 public:
  explicit ReductionImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);
  torch::Tensor pool_branch(const torch::Tensor& x);
  torch::Tensor conv_branch(const torch::Tensor& x);
  torch::Tensor deep_branch(const torch::Tensor& x);

  torch::nn::MaxPool2d pool{nullptr};
  torch::nn::Sequential conv{nullptr}, deep{nullptr};
};
TORCH_MODULE(Reduction);

struct GruGates {
  torch::Tensor z;
  torch::Tensor r;
};

class ConvGruImpl : public torch::nn::Module {
 public:
  ConvGruImpl(int in, int hidden);
  /// One update; optionally reports the gate fields.
  torch::Tensor step(const torch::Tensor& x, const torch::Tensor& h,
                     GruGates* gates = nullptr);
  /// Runs over (B, T, C, h, w) from a zero state and returns h_T.
  torch::Tensor forward(const torch::Tensor& sequence);
  int hidden() const { return hidden_; }

  torch::nn::Conv2d x_gates{nullptr}, h_gates{nullptr}, h_candidate{nullptr};

 private:
  int hidden_;
};
TORCH_MODULE(ConvGru);

/// Nearest 2x upsampling, skip concatenation, 3x3 conv + BN + Mish + CBAM.
class DecoderStageImpl : public torch::nn::Module {
 public:
  DecoderStageImpl(int in, int skip, int out, const ModelConfig& cfg);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& skip);

  torch::nn::Conv2d conv{nullptr};
  torch::nn::BatchNorm2d bn{nullptr};
  Cbam cbam{nullptr};
};
TORCH_MODULE(DecoderStage);

/// Per-frame encoder output. `skip1`/`skip2` are empty without the
/// encoder-decoder path.
struct Encoded {
  torch::Tensor skip1;   // (N, c1, H, W)
  torch::Tensor skip2;   // (N, c2, H/2, W/2)
  torch::Tensor latent;  // (N, c2, H/4, W/4), or (N, c1, H, W) when flat
};

class BlastNetImpl : public torch::nn::Module {
 public:
  explicit BlastNetImpl(const ModelConfig& cfg);

  /// (B, T, C, H, W) -> (B, 1, H, W).
  torch::Tensor forward(const torch::Tensor& window);

  /// Encodes independent frames (N, C, H, W).
  Encoded encode(const torch::Tensor& frames);
  /// Latents (B, T, ...) to the state handed to the decoder.
  torch::Tensor temporal(const torch::Tensor& latents);
  /// State plus last-frame skips to the (B, 1, H, W) prediction.
  torch::Tensor decode(const torch::Tensor& state, const Encoded& last);

  const ModelConfig& config() const { return cfg_; }
  /// Throws ContractError naming the offending dimension.
  void check_input(const torch::Tensor& window) const;

  MultiScale enc1{nullptr}, enc2{nullptr};
  Reduction red1{nullptr}, red2{nullptr};
  ConvGru gru{nullptr};
  DecoderStage dec1{nullptr}, dec2{nullptr};
  torch::nn::Sequential lift{nullptr};
  torch::nn::Conv2d head{nullptr};

 private:
  ModelConfig cfg_;
  torch::Tensor mask_;
};
TORCH_MODULE(BlastNet);

/// Fan-in scaled uniform kernels, zero biases, identity normalization.
void initialize(torch::nn::Module& module, std::uint64_t seed);

std::int64_t parameter_count(torch::nn::Module& module);

/// Named float tensors (parameters and float buffers), sorted by name.
std::vector<std::pair<std::string, torch::Tensor>> named_state(
    torch::nn::Module& module);

void save_checkpoint(const std::filesystem::path& path, BlastNet& model);
/// Builds a model from the stored config and loads every tensor,
/// validating names and shapes.
BlastNet load_checkpoint(const std::filesystem::path& path);
/// Serialized bytes of a checkpoint, used for exact comparisons.
std::string checkpoint_bytes(BlastNet& model);
BlastNet model_from_checkpoint_bytes(std::string_view bytes,
                                     const std::string& origin = "checkpoint");

}  // namespace blastcast::net
