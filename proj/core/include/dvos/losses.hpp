#pragma once

#include <torch/types.h>

namespace dvos::train {

struct LossWeights {
  double mse = 1.0;
  double ssim = 1.0;
  double bce = 1.0;
  double dice = 1.0;

  bool operator==(const LossWeights&) const = default;
};

/// Scalar loss tensors (autograd-enabled) for the segmentation head.
struct SegLoss {
  torch::Tensor bce;   // mean binary cross-entropy on sigmoid(logits)
  torch::Tensor dice;  // 1 - soft Dice, averaged over the batch
};

/// `logits` and `mask` are (B, 1, H, W); mask must be binary.
SegLoss seg_loss(const torch::Tensor& logits, const torch::Tensor& mask, double smooth = 1.0);

/// Per-sample soft Dice (2|P.G| + s) / (|P| + |G| + s) with P = sigmoid(logits).
torch::Tensor soft_dice_score(const torch::Tensor& logits, const torch::Tensor& mask, double smooth = 1.0);

struct ReconLoss {
  torch::Tensor mse;
  torch::Tensor ssim;  // 1 - SSIM, in [0, 2]
};

/// `pred` and `target` are (B, C, H, W) with H, W >= 11.
ReconLoss recon_loss(const torch::Tensor& pred, const torch::Tensor& target);

/// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1.
torch::Tensor ssim(const torch::Tensor& x, const torch::Tensor& y);

/// 11-tap normalised Gaussian (sigma 1.5) as a (11, 11) tensor.
torch::Tensor gaussian_window(int size = 11, double sigma = 1.5);

/// Plain-number view of one step's losses.
struct LossBundle {
  double recon_mse = 0.0;
  double recon_ssim = 0.0;
  double seg_bce = 0.0;
  double seg_dice = 0.0;
  LossWeights weights{};
  double total = 0.0;
};

}  // namespace dvos::train
