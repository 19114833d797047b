#include "blastcast/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "blastcast/binary_io.hpp"
#include "blastcast/error.hpp"

namespace blastcast::net {

namespace nn = torch::nn;
using torch::Tensor;

void ModelConfig::validate() const {
  if (input_channels != 4) throw ConfigError("input_channels must be 4");
  if (window < 1) throw ConfigError("window must be >= 1");
  if (c1 < 1 || c2 < 1 || gru_width < 1) {
    throw ConfigError("stage and GRU widths must be positive");
  }
  if (attention_ratio < 1) throw ConfigError("attention ratio must be >= 1");
  if (spatial_kernel < 1 || spatial_kernel % 2 == 0) {
    throw ConfigError("spatial attention kernel must be odd and positive");
  }
}

nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"input_channels", c.input_channels},
      {"window", c.window},
      {"widths", {c.c1, c.c2}},
      {"gru_width", c.gru_width},
      {"attention_ratio", c.attention_ratio},
      {"spatial_kernel", c.spatial_kernel},
      {"use_multiscale", c.use_multiscale},
      {"use_gru", c.use_gru},
      {"use_encoder_decoder", c.use_encoder_decoder},
      {"channel_mask", c.channel_mask},
      {"init_seed", c.init_seed},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.input_channels = j.value("input_channels", c.input_channels);
    c.window = j.value("window", c.window);
    if (j.contains("widths")) {
      const auto& w = j.at("widths");
      if (!w.is_array() || w.size() != 2) {
        throw ConfigError("model.widths must be a list of two integers");
      }
      c.c1 = w[0].get<int>();
      c.c2 = w[1].get<int>();
    }
    c.gru_width = j.value("gru_width", c.gru_width);
    c.attention_ratio = j.value("attention_ratio", c.attention_ratio);
    c.spatial_kernel = j.value("spatial_kernel", c.spatial_kernel);
    c.use_multiscale = j.value("use_multiscale", c.use_multiscale);
    c.use_gru = j.value("use_gru", c.use_gru);
    c.use_encoder_decoder = j.value("use_encoder_decoder", c.use_encoder_decoder);
    if (j.contains("channel_mask")) {
      c.channel_mask = j.at("channel_mask").get<std::array<bool, 4>>();
    }
    c.init_seed = j.value("init_seed", c.init_seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid model config: ") + e.what());
  }
  c.validate();
  return c;
}

nn::Conv2dOptions conv_options(int in, int out, int kernel, int stride,
                               int dilation, bool bias) {
  return nn::Conv2dOptions(in, out, kernel)
      .stride(stride)
      .padding(dilation * (kernel / 2))
      .dilation(dilation)
      .bias(bias);
}

// ---------------------------------------------------------------- CBAM

CbamImpl::CbamImpl(int channels, int ratio, int spatial_kernel) {
  const int hidden = std::max(1, channels / ratio);
  fc1 = register_module("fc1", nn::Conv2d(conv_options(channels, hidden, 1)));
  fc2 = register_module("fc2", nn::Conv2d(conv_options(hidden, channels, 1)));
  spatial = register_module("spatial",
                            nn::Conv2d(conv_options(2, 1, spatial_kernel)));
}

Tensor CbamImpl::channel_gate(const Tensor& x) {
  auto mlp = [&](const Tensor& v) { return fc2(torch::relu(fc1(v))); };
  const Tensor avg = x.mean({2, 3}, true);
  const Tensor mx = x.amax({2, 3}, true);
  return torch::sigmoid(mlp(avg) + mlp(mx));
}

Tensor CbamImpl::spatial_gate(const Tensor& x) {
  const Tensor avg = x.mean(1, true);
  const Tensor mx = x.amax(1, true);
  return torch::sigmoid(spatial(torch::cat({avg, mx}, 1)));
}

Tensor CbamImpl::forward(const Tensor& x) {
  const Tensor refined = x * channel_gate(x);
  return refined * spatial_gate(refined);
}

// --------------------------------------------------------- multi-scale

MultiScaleImpl::MultiScaleImpl(int in, int out, const ModelConfig& cfg)
    : multiscale_(cfg.use_multiscale) {
  const int b = (out + 2) / 3;
  int fused_in = out;
  if (multiscale_) {
    b1 = register_module("b1", nn::Sequential(nn::Conv2d(conv_options(in, b, 1)),
                                              nn::BatchNorm2d(b)));
    b2 = register_module("b2", nn::Sequential(nn::Conv2d(conv_options(in, b, 1)),
                                              nn::Conv2d(conv_options(b, b, 3, 1, 2)),
                                              nn::BatchNorm2d(b)));
    b3 = register_module("b3", nn::Sequential(nn::Conv2d(conv_options(in, b, 1)),
                                              nn::Conv2d(conv_options(b, b, 3)),
                                              nn::Conv2d(conv_options(b, b, 3, 1, 2)),
                                              nn::BatchNorm2d(b)));
    fused_in = 3 * b;
  } else {
    plain = register_module(
        "plain", nn::Sequential(nn::Conv2d(conv_options(in, out, 3)),
                                nn::BatchNorm2d(out)));
  }
  fuse = register_module("fuse", nn::Conv2d(conv_options(fused_in, out, 1)));
  cbam = register_module("cbam", Cbam(out, cfg.attention_ratio, cfg.spatial_kernel));
}

Tensor MultiScaleImpl::branch1(const Tensor& x) { return b1->forward(x); }
Tensor MultiScaleImpl::branch2(const Tensor& x) { return b2->forward(x); }
Tensor MultiScaleImpl::branch3(const Tensor& x) { return b3->forward(x); }

Tensor MultiScaleImpl::forward(const Tensor& x) {
  Tensor stacked;
  if (multiscale_) {
    if (x.size(2) < 7 || x.size(3) < 7) {
      throw ConfigError("multi-scale module needs at least 7x7 inputs, got " +
                        std::to_string(x.size(2)) + "x" +
                        std::to_string(x.size(3)));
    }
    stacked = torch::cat({branch1(x), branch2(x), branch3(x)}, 1);
  } else {
    stacked = plain->forward(x);
  }
  return cbam(torch::mish(fuse(stacked)));
}

// ----------------------------------------------------------- reduction

ReductionImpl::ReductionImpl(int channels) {
  pool = register_module(
      "pool", nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2).padding(1)));
  conv = register_module(
      "conv", nn::Sequential(nn::Conv2d(conv_options(channels, channels, 3, 2)),
                             nn::BatchNorm2d(channels)));
  deep = register_module(
      "deep", nn::Sequential(nn::Conv2d(conv_options(channels, channels, 3, 2)),
                             nn::Conv2d(conv_options(channels, channels, 1)),
                             nn::Conv2d(conv_options(channels, channels, 1)),
                             nn::BatchNorm2d(channels)));
}

Tensor ReductionImpl::pool_branch(const Tensor& x) { return pool(x); }
Tensor ReductionImpl::conv_branch(const Tensor& x) { return conv->forward(x); }
Tensor ReductionImpl::deep_branch(const Tensor& x) { return deep->forward(x); }

Tensor ReductionImpl::forward(const Tensor& x) {
  if (x.size(2) % 2 != 0 || x.size(3) % 2 != 0) {
    throw ConfigError("reduction block needs even spatial dims, got " +
                      std::to_string(x.size(2)) + "x" +
                      std::to_string(x.size(3)));
  }
  return pool_branch(x) + conv_branch(x) + deep_branch(x);
}

// ------------------------------------------------------------ ConvGRU

ConvGruImpl::ConvGruImpl(int in, int hidden) : hidden_(hidden) {
  x_gates = register_module("x_gates", nn::Conv2d(conv_options(in, 3 * hidden, 3)));
  h_gates = register_module("h_gates", nn::Conv2d(conv_options(hidden, 2 * hidden, 3)));
  h_candidate = register_module("h_candidate",
                                nn::Conv2d(conv_options(hidden, hidden, 3)));
}

Tensor ConvGruImpl::step(const Tensor& x, const Tensor& h, GruGates* gates) {
  const auto xs = x_gates(x).chunk(3, 1);
  const auto hs = h_gates(h).chunk(2, 1);
  const Tensor z = torch::sigmoid(xs[0] + hs[0]);
  const Tensor r = torch::sigmoid(xs[1] + hs[1]);
  const Tensor candidate = torch::tanh(xs[2] + h_candidate(r * h));
  if (gates) *gates = {z, r};
  return (1 - z) * h + z * candidate;
}

Tensor ConvGruImpl::forward(const Tensor& sequence) {
  const auto b = sequence.size(0);
  Tensor h = torch::zeros({b, hidden_, sequence.size(3), sequence.size(4)},
                          sequence.options());
  for (int64_t t = 0; t < sequence.size(1); ++t) h = step(sequence.select(1, t), h);
  return h;
}

// ------------------------------------------------------------ decoder

DecoderStageImpl::DecoderStageImpl(int in, int skip, int out,
                                   const ModelConfig& cfg) {
  conv = register_module("conv", nn::Conv2d(conv_options(in + skip, out, 3)));
  bn = register_module("bn", nn::BatchNorm2d(out));
  cbam = register_module("cbam", Cbam(out, cfg.attention_ratio, cfg.spatial_kernel));
}

Tensor DecoderStageImpl::forward(const Tensor& x, const Tensor& skip) {
  namespace F = torch::nn::functional;
  const Tensor up = F::interpolate(
      x, F::InterpolateFuncOptions()
             .size(std::vector<int64_t>{skip.size(2), skip.size(3)})
             .mode(torch::kNearest));
  return cbam(torch::mish(bn(conv(torch::cat({up, skip}, 1)))));
}

// -------------------------------------------------------------- model

BlastNetImpl::BlastNetImpl(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int c_in = cfg_.input_channels;
  if (cfg_.use_encoder_decoder) {
    enc1 = register_module("enc1", MultiScale(c_in, cfg_.c1, cfg_));
    red1 = register_module("red1", Reduction(cfg_.c1));
    enc2 = register_module("enc2", MultiScale(cfg_.c1, cfg_.c2, cfg_));
    red2 = register_module("red2", Reduction(cfg_.c2));
    int state = cfg_.c2;
    if (cfg_.use_gru) {
      gru = register_module("gru", ConvGru(cfg_.c2, cfg_.gru_width));
      state = cfg_.gru_width;
    }
    dec1 = register_module("dec1", DecoderStage(state, cfg_.c2, cfg_.c2, cfg_));
    dec2 = register_module("dec2", DecoderStage(cfg_.c2, cfg_.c1, cfg_.c1, cfg_));
    head = register_module("head", nn::Conv2d(conv_options(cfg_.c1, 1, 1)));
  } else {
    lift = register_module(
        "lift", nn::Sequential(nn::Conv2d(conv_options(c_in, cfg_.c1, 1)),
                               nn::BatchNorm2d(cfg_.c1), nn::Mish()));
    int state = cfg_.c1;
    if (cfg_.use_gru) {
      gru = register_module("gru", ConvGru(cfg_.c1, cfg_.gru_width));
      state = cfg_.gru_width;
    }
    head = register_module("head", nn::Conv2d(conv_options(state, 1, 1)));
  }
  initialize(*this, cfg_.init_seed);
}

void BlastNetImpl::check_input(const Tensor& w) const {
  if (w.dim() != 5) {
    throw ContractError("input window must be 5-D (B, T, C, H, W), got " +
                        std::to_string(w.dim()) + "-D");
  }
  if (w.size(1) != cfg_.window) {
    throw ContractError("input dimension T is " + std::to_string(w.size(1)) +
                        ", expected " + std::to_string(cfg_.window));
  }
  if (w.size(2) != cfg_.input_channels) {
    throw ContractError("input dimension C is " + std::to_string(w.size(2)) +
                        ", expected " + std::to_string(cfg_.input_channels));
  }
  if (w.size(3) % 4 != 0 || w.size(3) == 0) {
    throw ContractError("input dimension H is " + std::to_string(w.size(3)) +
                        ", must be a positive multiple of 4");
  }
  if (w.size(4) % 4 != 0 || w.size(4) == 0) {
    throw ContractError("input dimension W is " + std::to_string(w.size(4)) +
                        ", must be a positive multiple of 4");
  }
}

Encoded BlastNetImpl::encode(const Tensor& frames) {
  Tensor x = frames;
  if (!std::all_of(cfg_.channel_mask.begin(), cfg_.channel_mask.end(),
                   [](bool b) { return b; })) {
    std::vector<double> keep(cfg_.channel_mask.begin(), cfg_.channel_mask.end());
    x = x * torch::tensor(keep, x.options()).view({1, -1, 1, 1});
  }
  Encoded e;
  if (!cfg_.use_encoder_decoder) {
    e.latent = lift->forward(x);
    return e;
  }
  e.skip1 = enc1(x);
  e.skip2 = enc2(red1(e.skip1));
  e.latent = red2(e.skip2);
  return e;
}

Tensor BlastNetImpl::temporal(const Tensor& latents) {
  if (cfg_.use_gru) return gru(latents);
  return latents.select(1, latents.size(1) - 1);
}

Tensor BlastNetImpl::decode(const Tensor& state, const Encoded& last) {
  if (!cfg_.use_encoder_decoder) return head(state);
  return head(dec2(dec1(state, last.skip2), last.skip1));
}

Tensor BlastNetImpl::forward(const Tensor& window) {
  check_input(window);
  const auto b = window.size(0);
  const auto t = window.size(1);
  const Encoded e = encode(window.flatten(0, 1));
  auto unflatten = [&](const Tensor& v) {
    return v.view({b, t, v.size(1), v.size(2), v.size(3)});
  };
  Encoded last;
  last.latent = unflatten(e.latent).select(1, t - 1);
  if (cfg_.use_encoder_decoder) {
    last.skip1 = unflatten(e.skip1).select(1, t - 1);
    last.skip2 = unflatten(e.skip2).select(1, t - 1);
  }
  return decode(temporal(unflatten(e.latent)), last);
}

// ----------------------------------------------------- initialization

void initialize(nn::Module& module, std::uint64_t seed) {
  torch::NoGradGuard no_grad;
  auto gen = at::detail::createCPUGenerator(seed);
  std::vector<nn::Module*> all = {&module};
  for (auto& child : module.modules(/*include_self=*/false)) all.push_back(child.get());
  for (nn::Module* child : all) {
    if (auto* conv = child->as<nn::Conv2d>()) {
      const Tensor& w = conv->weight;
      const double fan_in = static_cast<double>(w.size(1) * w.size(2) * w.size(3));
      const double bound = std::sqrt(3.0 / fan_in);
      w.uniform_(-bound, bound, gen);
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* bn = child->as<nn::BatchNorm2d>()) {
      bn->weight.fill_(1.0);
      bn->bias.zero_();
      bn->running_mean.zero_();
      bn->running_var.fill_(1.0);
    }
  }
}

std::int64_t parameter_count(nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

std::vector<std::pair<std::string, Tensor>> named_state(nn::Module& module) {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& p : module.named_parameters()) out.emplace_back(p.key(), p.value());
  for (const auto& b : module.named_buffers()) {
    if (b.value().is_floating_point()) out.emplace_back(b.key(), b.value());
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

// --------------------------------------------------------- checkpoint

namespace {

constexpr char kMagic[] = "BLCKPT01";

}  // namespace

std::string checkpoint_bytes(BlastNet& model) {
  std::string out(kMagic, 8);
  const std::string config = to_json(model->config()).dump();
  io::append_u32(out, static_cast<std::uint32_t>(config.size()));
  out += config;
  const auto state = named_state(*model);
  io::append_u32(out, static_cast<std::uint32_t>(state.size()));
  for (const auto& [name, tensor] : state) {
    io::append_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    io::append_u32(out, static_cast<std::uint32_t>(tensor.dim()));
    for (int64_t d : tensor.sizes()) io::append_i64(out, d);
    const Tensor flat = tensor.detach().to(torch::kCPU, torch::kFloat32).contiguous();
    const float* data = flat.data_ptr<float>();
    for (int64_t k = 0; k < flat.numel(); ++k) io::append_f32(out, data[k]);
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, BlastNet& model) {
  io::write_file(path, checkpoint_bytes(model));
}

BlastNet load_checkpoint(const std::filesystem::path& path) {
  return model_from_checkpoint_bytes(io::read_file(path), path.string());
}

BlastNet model_from_checkpoint_bytes(std::string_view bytes,
                                     const std::string& origin) {
  io::ByteReader in(bytes);
  if (bytes.size() < 8 || in.take(8) != std::string_view(kMagic, 8)) {
    throw CorruptDatasetError("not a checkpoint: " + origin);
  }
  ModelConfig cfg;
  try {
    const auto len = in.u32();
    cfg = model_config_from_json(nlohmann::json::parse(in.take(len)));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptDatasetError("checkpoint config unreadable: " + std::string(e.what()));
  }
  BlastNet model(cfg);
  std::map<std::string, Tensor> expected;
  for (auto& [name, t] : named_state(*model)) expected.emplace(name, t);

  const auto count = in.u32();
  if (count != expected.size()) {
    throw CorruptDatasetError("checkpoint holds " + std::to_string(count) +
                              " tensors, model expects " +
                              std::to_string(expected.size()));
  }
  torch::NoGradGuard no_grad;
  for (std::uint32_t n = 0; n < count; ++n) {
    const std::string name(in.take(in.u32()));
    const auto it = expected.find(name);
    if (it == expected.end()) {
      throw CorruptDatasetError("checkpoint tensor '" + name + "' is unknown");
    }
    const auto ndim = in.u32();
    std::vector<int64_t> dims(ndim);
    for (auto& d : dims) d = in.i64();
    if (it->second.sizes() != torch::IntArrayRef(dims)) {
      throw CorruptDatasetError("checkpoint tensor '" + name + "' has shape " +
                                c10::str(torch::IntArrayRef(dims)) + ", expected " +
                                c10::str(it->second.sizes()));
    }
    Tensor values = torch::empty(dims, torch::kFloat32);
    float* data = values.data_ptr<float>();
    for (int64_t k = 0; k < values.numel(); ++k) data[k] = in.f32();
    it->second.copy_(values);
  }
  if (!in.done()) throw CorruptDatasetError("trailing bytes in checkpoint");
  return model;
}

}  // namespace blastcast::net
