#include "dvos/model.hpp"

#include <cstring>

namespace dvos::model {

namespace F = torch::nn::functional;

namespace {

torch::nn::Conv2d conv3x3(int in, int out, int stride = 1) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

torch::nn::GroupNorm group_norm(int groups, int channels) {
  if (groups <= 0 || channels % groups != 0) {
    throw Error("invalid_config", "group norm: " + std::to_string(channels) + " channels not divisible by " +
                                      std::to_string(groups) + " groups");
  }
  return torch::nn::GroupNorm(torch::nn::GroupNormOptions(groups, channels));
}

}  // namespace

void NetworkConfig::validate() const {
  if (tau < 1) throw Error("invalid_config", "tau must be positive");
  if (channels.empty()) throw Error("invalid_config", "need at least one level");
  if (level_scheduler.n_levels != levels()) {
    throw Error("invalid_config", "level scheduler has " + std::to_string(level_scheduler.n_levels) +
                                      " levels, network has " + std::to_string(levels()));
  }
  level_scheduler.validate();
  for (int c : channels) {
    if (c <= 0 || c % gn_groups != 0) {
      throw Error("invalid_config", "channel width " + std::to_string(c) + " not divisible by gn_groups " +
                                        std::to_string(gn_groups));
    }
    if ((c * tau) % attention_reduction != 0 || (c * tau) / attention_reduction < 1) {
      throw Error("invalid_config", "attention reduction must divide tau * channels");
    }
  }
  if (input_size <= 0 || input_size % (1 << levels()) != 0) {
    throw Error("invalid_config", "input_size " + std::to_string(input_size) + " must be divisible by 2^" +
                                      std::to_string(levels()));
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw Error("invalid_config", "dropout_p must lie in [0, 1)");
  schedule();  // validates the schedule parameters
}

ResidualBlockImpl::ResidualBlockImpl(int in_channels, int out_channels, int groups) {
  norm1 = register_module("norm1", group_norm(groups, in_channels));
  conv1 = register_module("conv1", conv3x3(in_channels, out_channels));
  norm2 = register_module("norm2", group_norm(groups, out_channels));
  conv2 = register_module("conv2", conv3x3(out_channels, out_channels));
  if (in_channels != out_channels) {
    projection = register_module("projection", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 1)));
  }
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  auto h = conv1(F::silu(norm1(x)));
  h = conv2(F::silu(norm2(h)));
  return (projection ? projection(x) : x) + h;
}

InitialBlockImpl::InitialBlockImpl(int in_channels, int out_channels, int groups) {
  conv = register_module("conv", conv3x3(in_channels, out_channels));
  res1 = register_module("res1", ResidualBlock(out_channels, out_channels, groups));
  res2 = register_module("res2", ResidualBlock(out_channels, out_channels, groups));
}

torch::Tensor InitialBlockImpl::forward(const torch::Tensor& x) { return res2(res1(conv(x))); }

ContractBlockImpl::ContractBlockImpl(int in_channels, int out_channels, int groups) {
  res1 = register_module("res1", ResidualBlock(in_channels, in_channels, groups));
  res2 = register_module("res2", ResidualBlock(in_channels, in_channels, groups));
  down = register_module("down", conv3x3(in_channels, out_channels, 2));
}

std::pair<torch::Tensor, torch::Tensor> ContractBlockImpl::forward(const torch::Tensor& x) {
  if (x.size(-1) % 2 != 0 || x.size(-2) % 2 != 0) {
    throw Error("shape_mismatch", "contract block needs even spatial dimensions");
  }
  auto skip = res2(res1(x));
  return {skip, down(skip)};
}

SeparableConvImpl::SeparableConvImpl(int channels, int dilation) {
  depthwise = register_module(
      "depthwise",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(dilation).dilation(dilation).groups(channels)));
  pointwise = register_module("pointwise", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 1)));
}

torch::Tensor SeparableConvImpl::forward(const torch::Tensor& x) { return pointwise(depthwise(x)); }

SpatiotemporalAttentionImpl::SpatiotemporalAttentionImpl(int channels, int groups, int reduction)
    : channels_(channels) {
  if (reduction <= 0 || channels % reduction != 0) {
    throw Error("invalid_config", "attention reduction must divide the channel count");
  }
  dsc1 = register_module("dsc1", SeparableConv(channels, 1));
  norm1 = register_module("norm1", group_norm(groups, channels));
  dsc2 = register_module("dsc2", SeparableConv(channels, 2));
  norm2 = register_module("norm2", group_norm(groups, channels));
  fc1 = register_module("fc1", torch::nn::Linear(channels, channels / reduction));
  fc2 = register_module("fc2", torch::nn::Linear(channels / reduction, channels));
}

SpatiotemporalAttentionImpl::Gates SpatiotemporalAttentionImpl::gates(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != channels_) {
    throw Error("shape_mismatch", "attention expects " + std::to_string(channels_) + " channels");
  }
  auto s = F::silu(norm1(dsc1(x)));
  s = torch::sigmoid(F::silu(norm2(dsc2(s))));
  auto pooled = F::adaptive_avg_pool2d(s, F::AdaptiveAvgPool2dFuncOptions(1)).flatten(1);
  auto t = torch::sigmoid(fc2(F::silu(fc1(pooled)))).view({x.size(0), channels_, 1, 1});
  return {s, t};
}

torch::Tensor SpatiotemporalAttentionImpl::forward(const torch::Tensor& x) {
  auto g = gates(x);
  return (g.temporal * g.spatial) * x;
}

SkipBlockImpl::SkipBlockImpl(int features, int tau, int level, bool latent, const NetworkConfig& config)
    : features_(features),
      tau_(tau),
      level_(level),
      latent_(latent),
      dropout_p_(config.dropout_p),
      scheduler_(config.level_scheduler),
      schedule_(config.schedule()) {
  attention = register_module(
      "attention", SpatiotemporalAttention(features * tau, config.gn_groups, config.attention_reduction));
}

torch::Tensor SkipBlockImpl::forward(const std::vector<torch::Tensor>& per_frame, Mode mode, Rng* rng) {
  if (static_cast<int>(per_frame.size()) != tau_) {
    throw Error("shape_mismatch", "skip block expects " + std::to_string(tau_) + " feature maps");
  }
  for (const auto& f : per_frame) {
    if (f.sizes() != per_frame.front().sizes()) throw Error("shape_mismatch", "per-frame feature maps differ in shape");
  }
  return forward(torch::stack(per_frame, 1), mode, rng);
}

torch::Tensor SkipBlockImpl::forward(const torch::Tensor& per_frame, Mode mode, Rng* rng) {
  if (per_frame.dim() != 5 || per_frame.size(1) != tau_ || per_frame.size(2) != features_) {
    throw Error("shape_mismatch", "skip block expects (B, " + std::to_string(tau_) + ", " +
                                      std::to_string(features_) + ", h, w)");
  }
  const auto b = per_frame.size(0), h = per_frame.size(3), w = per_frame.size(4);
  // Channel order after the reshape is frame-major: [frame0 F maps, frame1 F maps, ...].
  auto fused = attention(per_frame.reshape({b, tau_ * features_, h, w}));
  auto pooled = fused.view({b, tau_, features_, h, w}).mean(1);
  if (mode == Mode::eval || latent_) return pooled;

  if (rng == nullptr) throw Error("invalid_argument", "train mode needs an rng");
  last_timesteps_.assign(static_cast<std::size_t>(b), 0);
  for (auto& t : last_timesteps_) t = diffusion::sample_level_timestep(scheduler_, level_, schedule_.steps(), *rng);
  auto gen = rng->tensor_generator();
  auto eps = torch::randn(pooled.sizes(), gen, pooled.options());
  auto out = diffusion::forward_diffuse(pooled, last_timesteps_, eps, schedule_);
  if (dropout_p_ > 0.0) {
    auto keep = torch::bernoulli(torch::full({b, features_, 1, 1}, 1.0 - dropout_p_, pooled.options()), gen);
    out = out * keep / (1.0 - dropout_p_);
  }
  return out;
}

DecoderBlockImpl::DecoderBlockImpl(int lower_channels, int skip_channels, int groups) {
  up_conv = register_module("up_conv", conv3x3(lower_channels, skip_channels));
  res1 = register_module("res1", ResidualBlock(2 * skip_channels, skip_channels, groups));
  res2 = register_module("res2", ResidualBlock(skip_channels, skip_channels, groups));
}

torch::Tensor DecoderBlockImpl::forward(const torch::Tensor& lower, const torch::Tensor& skip) {
  if (lower.size(-2) * 2 != skip.size(-2) || lower.size(-1) * 2 != skip.size(-1)) {
    throw Error("shape_mismatch", "decoder: lower map must be half the skip resolution");
  }
  auto up = F::interpolate(lower, F::InterpolateFuncOptions()
                                      .size(std::vector<int64_t>{skip.size(-2), skip.size(-1)})
                                      .mode(torch::kNearest));
  up = up_conv(up);
  return res2(res1(torch::cat({up, skip}, 1)));
}

HeadImpl::HeadImpl(int channels, int out_channels, int groups) {
  blocks = register_module("blocks", torch::nn::Sequential(ResidualBlock(channels, channels, groups),
                                                           ResidualBlock(channels, channels, groups),
                                                           ResidualBlock(channels, channels, groups)));
  out = register_module("out", conv3x3(channels, out_channels));
}

torch::Tensor HeadImpl::forward(const torch::Tensor& x) { return out(blocks->forward(x)); }

DvosNetImpl::DvosNetImpl(NetworkConfig config) : config_(std::move(config)) {
  config_.validate();
  const int levels = config_.levels();
  const auto& ch = config_.channels;
  const int g = config_.gn_groups;
  auto width_below = [&](int i) { return i + 1 < levels ? ch[static_cast<std::size_t>(i + 1)] : ch.back(); };

  initial = register_module("initial", InitialBlock(3, ch.front(), g));
  contract = register_module("contract", torch::nn::ModuleList());
  skips = register_module("skip", torch::nn::ModuleList());
  decoder = register_module("decoder", torch::nn::ModuleList());
  for (int i = 0; i < levels; ++i) {
    const int width = ch[static_cast<std::size_t>(i)];
    contract->push_back(ContractBlock(width, width_below(i), g));
    // Skip level index counts from the latent side.
    skips->push_back(SkipBlock(width, config_.tau, levels - 1 - i, false, config_));
    decoder->push_back(DecoderBlock(width_below(i), width, g));
  }
  latent = register_module("latent", SkipBlock(ch.back(), config_.tau, 0, true, config_));
  recon_head = register_module("recon_head", Head(ch.front(), 3, g));
  seg_head = register_module("seg_head", Head(ch.front(), 1, g));
}

NetworkOutput DvosNetImpl::forward(const torch::Tensor& references, Mode mode, Rng* rng) {
  if (references.dim() != 5 || references.size(2) != 3) {
    throw Error("shape_mismatch", "references must be (B, tau, 3, H, W)");
  }
  if (references.size(1) != config_.tau) {
    throw Error("shape_mismatch", "expected tau = " + std::to_string(config_.tau) + " reference frames, got " +
                                      std::to_string(references.size(1)));
  }
  if (references.size(3) != config_.input_size || references.size(4) != config_.input_size) {
    throw Error("shape_mismatch", "expected " + std::to_string(config_.input_size) + "x" +
                                      std::to_string(config_.input_size) + " input");
  }
  if (mode == Mode::train && rng == nullptr) throw Error("invalid_argument", "train mode needs an rng");

  const auto b = references.size(0);
  const int64_t tau = config_.tau;
  auto per_frame = [&](const torch::Tensor& t) {
    return t.view({b, tau, t.size(1), t.size(2), t.size(3)});
  };

  // Shared-weight encoder over all b * tau frames at once.
  auto x = initial(references.reshape({b * tau, 3, references.size(3), references.size(4)}));
  std::vector<torch::Tensor> fused(static_cast<std::size_t>(config_.levels()));
  for (int i = 0; i < config_.levels(); ++i) {
    auto [skip, down] = contract[static_cast<std::size_t>(i)]->as<ContractBlockImpl>()->forward(x);
    fused[static_cast<std::size_t>(i)] =
        skips[static_cast<std::size_t>(i)]->as<SkipBlockImpl>()->forward(per_frame(skip), mode, rng);
    x = down;
  }
  auto y = latent->forward(per_frame(x), mode, rng);
  for (int i = config_.levels() - 1; i >= 0; --i) {
    y = decoder[static_cast<std::size_t>(i)]->as<DecoderBlockImpl>()->forward(y, fused[static_cast<std::size_t>(i)]);
  }
  return {recon_head(y), seg_head(y)};
}

std::uint64_t parameter_hash(const torch::nn::Module& module) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : module.parameters()) {
    auto t = p.detach().to(torch::kCPU).contiguous();
    const auto* bytes = static_cast<const unsigned char*>(t.data_ptr());
    const std::size_t n = static_cast<std::size_t>(t.numel()) * t.element_size();
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace dvos::model
