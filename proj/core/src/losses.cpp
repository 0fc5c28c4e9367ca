#include "dvos/losses.hpp"

#include <cmath>

#include <torch/torch.h>

#include "dvos/common.hpp"

namespace dvos::train {

namespace F = torch::nn::functional;

torch::Tensor soft_dice_score(const torch::Tensor& logits, const torch::Tensor& mask, double smooth) {
  auto p = torch::sigmoid(logits).flatten(1);
  auto g = mask.to(logits.scalar_type()).flatten(1);
  auto inter = (p * g).sum(1);
  return (2.0 * inter + smooth) / (p.sum(1) + g.sum(1) + smooth);
}

SegLoss seg_loss(const torch::Tensor& logits, const torch::Tensor& mask, double smooth) {
  if (logits.sizes() != mask.sizes()) throw Error("shape_mismatch", "logits and mask shapes differ");
  if (!((mask == 0) | (mask == 1)).all().item<bool>()) throw Error("invalid_argument", "mask must be binary");
  auto target = mask.to(logits.scalar_type());
  SegLoss out;
  out.bce = F::binary_cross_entropy_with_logits(logits, target);
  out.dice = 1.0 - soft_dice_score(logits, target, smooth).mean();
  return out;
}

torch::Tensor gaussian_window(int size, double sigma) {
  auto coords = torch::arange(size, torch::kFloat64) - (size - 1) / 2.0;
  auto g = torch::exp(-(coords * coords) / (2.0 * sigma * sigma));
  g = g / g.sum();
  return torch::outer(g, g);
}

torch::Tensor ssim(const torch::Tensor& x, const torch::Tensor& y) {
  if (x.sizes() != y.sizes()) throw Error("shape_mismatch", "ssim inputs differ in shape");
  if (x.dim() != 4) throw Error("shape_mismatch", "ssim expects (B, C, H, W)");
  constexpr int kWindow = 11;
  if (x.size(2) < kWindow || x.size(3) < kWindow) throw Error("shape_mismatch", "ssim needs at least 11x11 inputs");
  const auto channels = x.size(1);
  auto w = gaussian_window(kWindow, 1.5).to(x.options()).expand({channels, 1, kWindow, kWindow}).contiguous();
  auto filt = [&](const torch::Tensor& t) {
    return F::conv2d(t, w, F::Conv2dFuncOptions().groups(channels));
  };
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  auto mu_x = filt(x), mu_y = filt(y);
  auto sxx = filt(x * x) - mu_x * mu_x;
  auto syy = filt(y * y) - mu_y * mu_y;
  auto sxy = filt(x * y) - mu_x * mu_y;
  auto map = ((2 * mu_x * mu_y + c1) * (2 * sxy + c2)) / ((mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2));
  return map.mean();
}

ReconLoss recon_loss(const torch::Tensor& pred, const torch::Tensor& target) {
  if (pred.sizes() != target.sizes()) throw Error("shape_mismatch", "prediction and target shapes differ");
  ReconLoss out;
  out.mse = F::mse_loss(pred, target);
  out.ssim = 1.0 - ssim(pred, target);
  return out;
}

}  // namespace dvos::train
