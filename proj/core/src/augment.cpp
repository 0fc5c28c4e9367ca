#include "dvos/augment.hpp"

#include <cmath>
#include <numbers>

#include <opencv2/imgproc.hpp>

namespace dvos::train {

void AugmentConfig::validate() const {
  if (crop_min <= 0 || crop_min > crop_max) throw Error("invalid_config", "need 0 < crop_min <= crop_max");
  if (output_size <= 0) throw Error("invalid_config", "output_size must be positive");
  if (max_rotation_deg < 0) throw Error("invalid_config", "max_rotation_deg must be non-negative");
}

SpatialParams draw_spatial(int height, int width, Rng& rng, const AugmentConfig& config) {
  config.validate();
  if (std::min(height, width) < config.crop_min) {
    throw Error("frame_too_small", "source " + std::to_string(height) + "x" + std::to_string(width) +
                                       " smaller than the minimum crop " + std::to_string(config.crop_min));
  }
  SpatialParams p;
  const int largest = std::min({config.crop_max, height, width});
  p.crop = static_cast<int>(rng.uniform_int(config.crop_min, largest));
  p.origin.x = static_cast<int>(rng.uniform_int(0, width - p.crop));
  p.origin.y = static_cast<int>(rng.uniform_int(0, height - p.crop));
  p.angle_deg = config.max_rotation_deg > 0 ? rng.uniform(-config.max_rotation_deg, config.max_rotation_deg) : 0.0;
  return p;
}

cv::Matx23d spatial_matrix(const SpatialParams& params, int output_size) {
  const double k = static_cast<double>(params.crop) / output_size;
  const double theta = params.angle_deg * std::numbers::pi / 180.0;
  const double a = k * std::cos(theta), b = k * std::sin(theta);
  const double cx = params.origin.x + (params.crop - 1) / 2.0;
  const double cy = params.origin.y + (params.crop - 1) / 2.0;
  const double oc = (output_size - 1) / 2.0;
  // src = centre + R(theta) * k * (dst - output_centre)
  return {a, -b, cx - a * oc + b * oc,  //
          b, a, cy - b * oc - a * oc};
}

Frame apply_spatial(const Frame& frame, const SpatialParams& params, int output_size) {
  cv::Mat out;
  cv::warpAffine(frame.pixels, out, cv::Mat(spatial_matrix(params, output_size)), cv::Size(output_size, output_size),
                 cv::INTER_LINEAR | cv::WARP_INVERSE_MAP, cv::BORDER_REFLECT_101);
  return Frame(out);
}

Mask apply_spatial(const Mask& mask, const SpatialParams& params, int output_size) {
  cv::Mat out;
  cv::warpAffine(mask.pixels, out, cv::Mat(spatial_matrix(params, output_size)), cv::Size(output_size, output_size),
                 cv::INTER_NEAREST | cv::WARP_INVERSE_MAP, cv::BORDER_REFLECT_101);
  cv::threshold(out, out, 0, 1, cv::THRESH_BINARY);
  return Mask(out);
}

Frame color_augment(const Frame& frame, Rng& rng, const AugmentConfig& config) {
  cv::Mat img = frame.pixels.clone();
  const double brightness = 1.0 + rng.uniform(-config.brightness, config.brightness);
  const double contrast = 1.0 + rng.uniform(-config.contrast, config.contrast);
  const double saturation = 1.0 + rng.uniform(-config.saturation, config.saturation);
  img *= brightness;
  const cv::Scalar mean = cv::mean(img);
  const double gray_mean = (mean[0] + mean[1] + mean[2]) / 3.0;
  img = (img - cv::Scalar::all(gray_mean)) * contrast + cv::Scalar::all(gray_mean);
  cv::Mat gray, gray3;
  cv::cvtColor(img, gray, cv::COLOR_RGB2GRAY);
  cv::cvtColor(gray, gray3, cv::COLOR_GRAY2RGB);
  cv::addWeighted(img, saturation, gray3, 1.0 - saturation, 0.0, img);
  if (rng.bernoulli(config.blur_probability)) {
    const double sigma = rng.uniform(0.0, config.blur_sigma_max);
    if (sigma > 0.1) cv::GaussianBlur(img, img, cv::Size(0, 0), sigma, sigma, cv::BORDER_REFLECT_101);
  }
  cv::min(cv::max(img, 0.0), 1.0, img);
  return Frame(img);
}

Sample augment_sample(const Sample& sample, Rng& rng, const AugmentConfig& config) {
  sample.validate();
  Sample out;
  out.video_id = sample.video_id;
  out.query_index = sample.query_index;
  std::vector<Frame> colored;
  colored.reserve(sample.references.size());
  for (const auto& r : sample.references) colored.push_back(config.color ? color_augment(r, rng, config) : r);

  const SpatialParams p = draw_spatial(sample.query_frame.height(), sample.query_frame.width(), rng, config);
  for (const auto& r : colored) out.references.push_back(apply_spatial(r, p, config.output_size));
  out.query_frame = apply_spatial(sample.query_frame, p, config.output_size);
  if (sample.query_mask) out.query_mask = apply_spatial(*sample.query_mask, p, config.output_size);
  return out;
}

Sample eval_transform(const Sample& sample, int eval_crop, int output_size) {
  sample.validate();
  const Frame& shape_ref = sample.query_frame.empty() ? sample.references.front() : sample.query_frame;
  const cv::Rect roi = center_crop_rect(shape_ref.height(), shape_ref.width(), eval_crop);
  auto frame_op = [&](const Frame& f) {
    cv::Mat crop = f.pixels(roi);
    cv::Mat out;
    if (eval_crop == output_size) {
      out = crop.clone();
    } else {
      cv::resize(crop, out, cv::Size(output_size, output_size), 0, 0,
                 eval_crop > output_size ? cv::INTER_AREA : cv::INTER_LINEAR);
    }
    return Frame(out);
  };
  Sample out;
  out.video_id = sample.video_id;
  out.query_index = sample.query_index;
  for (const auto& r : sample.references) out.references.push_back(frame_op(r));
  if (!sample.query_frame.empty()) out.query_frame = frame_op(sample.query_frame);
  if (sample.query_mask) {
    cv::Mat crop = sample.query_mask->pixels(roi);
    cv::Mat m;
    if (eval_crop == output_size) {
      m = crop.clone();
    } else {
      cv::resize(crop, m, cv::Size(output_size, output_size), 0, 0, cv::INTER_NEAREST);
    }
    out.query_mask = Mask(m);
  }
  return out;
}

}  // namespace dvos::train
