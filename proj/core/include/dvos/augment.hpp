#pragma once

#include <opencv2/core.hpp>

#include "dvos/common.hpp"
#include "dvos/data.hpp"

namespace dvos::train {

struct AugmentConfig {
  int crop_min = 400;
  int crop_max = 750;
  int output_size = 256;
  double max_rotation_deg = 10.0;
  double brightness = 0.1;
  double contrast = 0.1;
  double saturation = 0.1;
  double blur_probability = 0.3;
  double blur_sigma_max = 1.5;
  bool color = true;

  void validate() const;
};

/// One square crop of side `crop` at top-left `origin`, rotated by
/// `angle_deg` about its centre and resampled to output_size.
struct SpatialParams {
  double angle_deg = 0.0;
  int crop = 0;
  cv::Point origin;
};

SpatialParams draw_spatial(int height, int width, Rng& rng, const AugmentConfig& config);

/// Inverse map (output pixel -> source pixel) for warpAffine.
cv::Matx23d spatial_matrix(const SpatialParams& params, int output_size);

Frame apply_spatial(const Frame& frame, const SpatialParams& params, int output_size);
/// Nearest-neighbour resampling, re-binarized.
Mask apply_spatial(const Mask& mask, const SpatialParams& params, int output_size);

/// Light brightness/contrast/saturation jitter plus optional Gaussian blur.
Frame color_augment(const Frame& frame, Rng& rng, const AugmentConfig& config);

/// Colour stage on each reference independently, then one shared spatial
/// transform for references, query frame and query mask.
Sample augment_sample(const Sample& sample, Rng& rng, const AugmentConfig& config);

/// Evaluation protocol: centred `eval_crop` window resized to output_size.
Sample eval_transform(const Sample& sample, int eval_crop, int output_size);

}  // namespace dvos::train
