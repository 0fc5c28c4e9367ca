#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "dvos/data.hpp"
#include "dvos/image.hpp"
#include "dvos/model.hpp"

namespace testing {

// Fresh scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("dvos_test_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline dvos::Frame solid_frame(int h, int w, float v) {
  return dvos::Frame(cv::Mat(h, w, CV_32FC3, cv::Scalar::all(v)));
}

inline dvos::Frame random_frame(int h, int w, int seed) {
  cv::Mat m(h, w, CV_32FC3);
  cv::RNG rng(static_cast<std::uint64_t>(seed) + 1);
  rng.fill(m, cv::RNG::UNIFORM, 0.0, 1.0);
  return dvos::Frame(m);
}

// Frames whose pixel value encodes the frame index, for ordering checks.
inline std::shared_ptr<dvos::MemoryClip> indexed_clip(const std::string& id, int length, int size = 8,
                                                      bool masks = true) {
  std::vector<dvos::Frame> frames;
  std::vector<dvos::Mask> ms;
  for (int i = 0; i < length; ++i) {
    frames.push_back(solid_frame(size, size, static_cast<float>(i) / 255.f));
    if (masks) {
      cv::Mat m = cv::Mat::zeros(size, size, CV_8UC1);
      m(cv::Rect(0, 0, 1 + i % size, 1)).setTo(1);
      ms.emplace_back(m);
    }
  }
  return std::make_shared<dvos::MemoryClip>(id, frames, ms);
}

inline dvos::model::NetworkConfig tiny_config(int size = 16) {
  dvos::model::NetworkConfig c;
  c.tau = 4;
  c.channels = {8, 16};
  c.gn_groups = 4;
  c.input_size = size;
  c.level_scheduler.n_levels = 2;
  return c;
}

}  // namespace testing
