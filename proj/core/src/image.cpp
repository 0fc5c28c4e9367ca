#include "dvos/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "dvos/common.hpp"

namespace dvos {

namespace fs = std::filesystem;

Frame::Frame(cv::Mat rgb) : pixels(std::move(rgb)) {
  if (!pixels.empty() && pixels.type() != CV_32FC3) {
    throw Error("invalid_argument", "Frame requires CV_32FC3 pixels");
  }
}

Mask::Mask(cv::Mat binary) : pixels(std::move(binary)) {
  if (!pixels.empty() && pixels.type() != CV_8UC1) {
    throw Error("invalid_argument", "Mask requires CV_8UC1 pixels");
  }
}

long long Mask::count() const { return pixels.empty() ? 0 : cv::countNonZero(pixels); }

Mask Mask::zeros(int height, int width) { return Mask(cv::Mat::zeros(height, width, CV_8UC1)); }

Frame load_frame(const fs::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error("io_error", "cannot read frame: " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  cv::Mat out;
  rgb.convertTo(out, CV_32FC3, 1.0 / 255.0);
  return Frame(out);
}

void save_frame(const fs::path& path, const Frame& frame) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  cv::Mat rgb8;
  frame.pixels.convertTo(rgb8, CV_8UC3, 255.0);
  cv::Mat bgr;
  cv::cvtColor(rgb8, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), bgr)) throw Error("io_error", "cannot write frame: " + path.string());
}

Mask load_mask(const fs::path& path) {
  cv::Mat gray = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (gray.empty()) throw Error("io_error", "cannot read mask: " + path.string());
  cv::Mat bin;
  cv::threshold(gray, bin, 127, 1, cv::THRESH_BINARY);
  return Mask(bin);
}

void save_mask(const fs::path& path, const Mask& mask) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  cv::Mat out = mask.pixels * 255;
  if (!cv::imwrite(path.string(), out)) throw Error("io_error", "cannot write mask: " + path.string());
}

Mask binarize(const cv::Mat& values, double threshold) {
  cv::Mat f;
  values.convertTo(f, CV_32F);
  cv::Mat bin = f >= threshold;  // 0 / 255
  bin /= 255;
  return Mask(bin);
}

torch::Tensor to_tensor(const Frame& frame) {
  cv::Mat contiguous = frame.pixels.isContinuous() ? frame.pixels : frame.pixels.clone();
  auto hwc = torch::from_blob(contiguous.data, {frame.height(), frame.width(), 3}, torch::kFloat32);
  return hwc.permute({2, 0, 1}).contiguous().clone();
}

torch::Tensor to_tensor(const Mask& mask) {
  cv::Mat contiguous = mask.pixels.isContinuous() ? mask.pixels : mask.pixels.clone();
  auto hw = torch::from_blob(contiguous.data, {mask.height(), mask.width()}, torch::kUInt8);
  return hw.to(torch::kFloat32).unsqueeze(0).clone();
}

Frame frame_from_tensor(const torch::Tensor& chw) {
  if (chw.dim() != 3 || chw.size(0) != 3) throw Error("shape_mismatch", "expected (3,H,W) tensor");
  auto hwc = chw.detach().to(torch::kCPU, torch::kFloat32).clamp(0.0, 1.0).permute({1, 2, 0}).contiguous();
  cv::Mat view(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_32FC3, hwc.data_ptr<float>());
  return Frame(view.clone());
}

Mask mask_from_tensor(const torch::Tensor& hw) {
  auto t = hw.detach().to(torch::kCPU);
  if (t.dim() == 3 && t.size(0) == 1) t = t.squeeze(0);
  if (t.dim() != 2) throw Error("shape_mismatch", "expected (1,H,W) or (H,W) tensor");
  auto u8 = (t != 0).to(torch::kUInt8).contiguous();
  cv::Mat view(static_cast<int>(u8.size(0)), static_cast<int>(u8.size(1)), CV_8UC1, u8.data_ptr<std::uint8_t>());
  return Mask(view.clone());
}

}  // namespace dvos
