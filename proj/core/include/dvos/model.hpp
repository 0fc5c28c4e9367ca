#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "dvos/common.hpp"
#include "dvos/diffusion.hpp"

namespace dvos::model {

enum class Mode { train, eval };

struct NetworkConfig {
  int tau = 4;
  /// Feature width per encoder level, highest resolution first. The latent
  /// keeps the last width.
  std::vector<int> channels{32, 64, 128, 256, 512, 512};
  int gn_groups = 8;
  double dropout_p = 0.1;
  int input_size = 256;
  /// Bottleneck ratio of the temporal attention stream.
  int attention_reduction = 4;
  diffusion::LevelScheduler level_scheduler{};
  int diffusion_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  int levels() const { return static_cast<int>(channels.size()); }
  int latent_size() const { return input_size >> levels(); }
  diffusion::VarianceSchedule schedule() const { return {diffusion_steps, beta_start, beta_end}; }
  void validate() const;

  bool operator==(const NetworkConfig&) const = default;
};

/// (GN -> Swish -> 3x3 conv) twice plus an identity (or 1x1 projection) skip.
class ResidualBlockImpl : public torch::nn::Module {
 public:
  ResidualBlockImpl(int in_channels, int out_channels, int groups);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::GroupNorm norm1{nullptr}, norm2{nullptr};
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
  torch::nn::Conv2d projection{nullptr};  // only when widths differ
};
TORCH_MODULE(ResidualBlock);

/// 3x3 conv (stride 1, pad 1) followed by two residual blocks.
class InitialBlockImpl : public torch::nn::Module {
 public:
  InitialBlockImpl(int in_channels, int out_channels, int groups);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv{nullptr};
  ResidualBlock res1{nullptr}, res2{nullptr};
};
TORCH_MODULE(InitialBlock);

/// Two residual blocks then a stride-2 3x3 conv. Returns (skip, downsampled).
class ContractBlockImpl : public torch::nn::Module {
 public:
  ContractBlockImpl(int in_channels, int out_channels, int groups);
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& x);

  ResidualBlock res1{nullptr}, res2{nullptr};
  torch::nn::Conv2d down{nullptr};
};
TORCH_MODULE(ContractBlock);

/// Depth-wise 3x3 conv at a given dilation followed by a point-wise 1x1 conv.
class SeparableConvImpl : public torch::nn::Module {
 public:
  SeparableConvImpl(int channels, int dilation);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d depthwise{nullptr}, pointwise{nullptr};
};
TORCH_MODULE(SeparableConv);

/// Spatial stream S = sigmoid(Sa2(Sa1(x))) with Sa = Swish(GN(DSC(.)))
/// (dilation 1 then 2); temporal stream T = sigmoid(FC(Swish(FC(AvgPool(S)))))
/// gives one weight per channel. Output (T * S) * x, same shape as x.
class SpatiotemporalAttentionImpl : public torch::nn::Module {
 public:
  SpatiotemporalAttentionImpl(int channels, int groups, int reduction);

  torch::Tensor forward(const torch::Tensor& x);

  struct Gates {
    torch::Tensor spatial;   // (B, C, H, W)
    torch::Tensor temporal;  // (B, C, 1, 1)
  };
  Gates gates(const torch::Tensor& x);

  int channels() const { return channels_; }

  SeparableConv dsc1{nullptr}, dsc2{nullptr};
  torch::nn::GroupNorm norm1{nullptr}, norm2{nullptr};
  torch::nn::Linear fc1{nullptr}, fc2{nullptr};

 private:
  int channels_;
};
TORCH_MODULE(SpatiotemporalAttention);

/// Fuses the tau per-frame maps of one level into a single F-channel map:
/// concat -> attention -> mean over the tau grouping; in train mode (and
/// unless this is the latent connection) adds level-scheduled forward
/// diffusion and channel-wise dropout.
class SkipBlockImpl : public torch::nn::Module {
 public:
  SkipBlockImpl(int features, int tau, int level, bool latent, const NetworkConfig& config);

  /// `per_frame` is (B, tau, F, h, w).
  torch::Tensor forward(const torch::Tensor& per_frame, Mode mode, Rng* rng);
  torch::Tensor forward(const std::vector<torch::Tensor>& per_frame, Mode mode, Rng* rng);

  /// Diffusion steps drawn by the last train-mode call (one per sample).
  const std::vector<int>& last_timesteps() const { return last_timesteps_; }
  int level() const { return level_; }
  bool is_latent() const { return latent_; }

  SpatiotemporalAttention attention{nullptr};

 private:
  int features_;
  int tau_;
  int level_;
  bool latent_;
  double dropout_p_;
  diffusion::LevelScheduler scheduler_;
  diffusion::VarianceSchedule schedule_;
  std::vector<int> last_timesteps_;
};
TORCH_MODULE(SkipBlock);

/// Nearest 2x upsample, 3x3 conv, concat with the skip, two residual blocks.
class DecoderBlockImpl : public torch::nn::Module {
 public:
  DecoderBlockImpl(int lower_channels, int skip_channels, int groups);
  torch::Tensor forward(const torch::Tensor& lower, const torch::Tensor& skip);

  torch::nn::Conv2d up_conv{nullptr};
  ResidualBlock res1{nullptr}, res2{nullptr};
};
TORCH_MODULE(DecoderBlock);

/// Three residual blocks and a final 3x3 conv; no output activation.
class HeadImpl : public torch::nn::Module {
 public:
  HeadImpl(int channels, int out_channels, int groups);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Sequential blocks{nullptr};
  torch::nn::Conv2d out{nullptr};
};
TORCH_MODULE(Head);

struct NetworkOutput {
  torch::Tensor recon;       // (B, 3, H, W)
  torch::Tensor seg_logits;  // (B, 1, H, W)
};

class DvosNetImpl : public torch::nn::Module {
 public:
  explicit DvosNetImpl(NetworkConfig config);

  /// `references` is (B, tau, 3, H, W) with H = W = input_size. Train mode
  /// needs an rng for skip diffusion and dropout.
  NetworkOutput forward(const torch::Tensor& references, Mode mode, Rng* rng = nullptr);

  const NetworkConfig& config() const { return config_; }

  InitialBlock initial{nullptr};
  torch::nn::ModuleList contract{nullptr};
  torch::nn::ModuleList skips{nullptr};
  SkipBlock latent{nullptr};
  torch::nn::ModuleList decoder{nullptr};
  Head recon_head{nullptr}, seg_head{nullptr};

 private:
  NetworkConfig config_;
};
TORCH_MODULE(DvosNet);

/// FNV-1a over all parameter bytes in registration order.
std::uint64_t parameter_hash(const torch::nn::Module& module);

}  // namespace dvos::model
