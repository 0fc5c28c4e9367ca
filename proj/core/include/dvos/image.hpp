#pragma once

#include <filesystem>

#include <opencv2/core.hpp>
#include <torch/types.h>

namespace dvos {

/// RGB frame, CV_32FC3 with values in [0,1].
struct Frame {
  cv::Mat pixels;

  Frame() = default;
  explicit Frame(cv::Mat rgb);

  int height() const { return pixels.rows; }
  int width() const { return pixels.cols; }
  bool empty() const { return pixels.empty(); }
  Frame clone() const { return Frame(pixels.clone()); }
};

/// Binary mask, CV_8UC1 with values in {0,1}.
struct Mask {
  cv::Mat pixels;

  Mask() = default;
  explicit Mask(cv::Mat binary);

  int height() const { return pixels.rows; }
  int width() const { return pixels.cols; }
  bool empty() const { return pixels.empty(); }
  Mask clone() const { return Mask(pixels.clone()); }
  long long count() const;

  static Mask zeros(int height, int width);
};

Frame load_frame(const std::filesystem::path& path);
/// Stored as 8-bit RGB PNG; values are rounded to the nearest 1/255.
void save_frame(const std::filesystem::path& path, const Frame& frame);

/// Any stored value > 127 becomes 1.
Mask load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const Mask& mask);

/// Thresholds a single-channel image at `threshold` into a Mask.
Mask binarize(const cv::Mat& values, double threshold);

/// (3,H,W) float tensor.
torch::Tensor to_tensor(const Frame& frame);
/// (1,H,W) float tensor of {0,1}.
torch::Tensor to_tensor(const Mask& mask);
/// Accepts (3,H,W); values are clamped to [0,1].
Frame frame_from_tensor(const torch::Tensor& chw);
/// Accepts (1,H,W) or (H,W); nonzero entries become 1.
Mask mask_from_tensor(const torch::Tensor& hw);

}  // namespace dvos
