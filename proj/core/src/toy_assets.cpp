#include "dvos/toy_assets.hpp"

#include <cmath>
#include <numbers>

#include <opencv2/imgproc.hpp>

#include "dvos/common.hpp"

namespace dvos::toy {

namespace {

cv::Mat texture(int height, int width, const cv::Vec3f& base, const cv::Vec3f& spread, double grain, Rng& rng) {
  cv::Mat out(height, width, CV_32FC3);
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;
  for (int k = 0; k < 6; ++k) {
    waves.push_back({rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25), rng.uniform(0.0, 2 * std::numbers::pi),
                     rng.uniform(0.3, 1.0)});
  }
  for (int y = 0; y < height; ++y) {
    auto* row = out.ptr<cv::Vec3f>(y);
    for (int x = 0; x < width; ++x) {
      double v = 0.0;
      for (const auto& w : waves) v += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
      v /= 3.0;
      const double n = rng.normal(0.0, grain);
      for (int c = 0; c < 3; ++c) {
        row[x][c] = static_cast<float>(std::clamp(base[c] + spread[c] * v + n, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace

std::vector<Frame> background_clip(int length, int height, int width, std::uint64_t seed) {
  Rng rng(seed);
  const int margin = 8;
  const cv::Vec3f base(static_cast<float>(rng.uniform(0.35, 0.5)), static_cast<float>(rng.uniform(0.28, 0.4)),
                       static_cast<float>(rng.uniform(0.18, 0.28)));
  const cv::Mat big = texture(height + 2 * margin, width + 2 * margin, base, cv::Vec3f(0.12f, 0.1f, 0.08f), 0.03, rng);
  const double drift_x = rng.uniform(-0.2, 0.2);
  const double drift_y = rng.uniform(-0.2, 0.2);
  std::vector<Frame> frames;
  for (int t = 0; t < length; ++t) {
    const double ox = margin + std::fmod(drift_x * t, margin - 1.0);
    const double oy = margin + std::fmod(drift_y * t, margin - 1.0);
    const cv::Mat shift = (cv::Mat_<double>(2, 3) << 1, 0, -ox, 0, 1, -oy);
    cv::Mat f;
    cv::warpAffine(big, f, shift, cv::Size(width, height), cv::INTER_LINEAR, cv::BORDER_REFLECT);
    f *= 1.0 + 0.02 * std::sin(0.3 * t);
    cv::min(cv::max(f, 0.0), 1.0, f);
    frames.emplace_back(f);
  }
  return frames;
}

AnnotatedFrame annotated_frame(int height, int width, int n_heads, double head_minor, double head_major,
                               std::uint64_t seed) {
  Rng rng(seed);
  cv::Mat img = texture(height, width, cv::Vec3f(0.25f, 0.45f, 0.2f), cv::Vec3f(0.08f, 0.12f, 0.06f), 0.03, rng);
  cv::Mat mask = cv::Mat::zeros(height, width, CV_8UC1);
  for (int i = 0; i < n_heads; ++i) {
    const double a = rng.uniform(head_minor, head_minor * 1.4);
    const double b = rng.uniform(head_major, head_major * 1.4);
    const double cx = rng.uniform(b, width - b);
    const double cy = rng.uniform(b, height - b);
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const bool mature = rng.bernoulli(0.5);
    const cv::Vec3f tint = mature ? cv::Vec3f(0.85f, 0.75f, 0.35f) : cv::Vec3f(0.55f, 0.75f, 0.3f);
    const double ct = std::cos(theta), st = std::sin(theta);
    const int x0 = std::max(0, static_cast<int>(cx - b - 1)), x1 = std::min(width - 1, static_cast<int>(cx + b + 1));
    const int y0 = std::max(0, static_cast<int>(cy - b - 1)), y1 = std::min(height - 1, static_cast<int>(cy + b + 1));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double u = ct * dx + st * dy;   // along the major axis
        const double v = -st * dx + ct * dy;  // across
        if ((u * u) / (b * b) + (v * v) / (a * a) > 1.0) continue;
        const double stripe = 0.85 + 0.15 * std::cos(u * 2.2);
        auto& px = img.at<cv::Vec3f>(y, x);
        for (int c = 0; c < 3; ++c) px[c] = static_cast<float>(std::clamp(tint[c] * stripe, 0.0, 1.0));
        mask.at<std::uint8_t>(y, x) = 1;
      }
    }
  }
  return {Frame(img), Mask(mask)};
}

}  // namespace dvos::toy
