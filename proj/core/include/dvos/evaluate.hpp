#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "dvos/data.hpp"
#include "dvos/metrics.hpp"
#include "dvos/model.hpp"

namespace dvos::eval {

/// Maps (B, tau, 3, H, W) references to the network outputs. Lets tests
/// substitute stubs for a trained network.
using Predictor = std::function<model::NetworkOutput(const torch::Tensor& references)>;

/// Eval-mode forward of `net` without gradients.
Predictor make_predictor(model::DvosNet net);

struct EvalConfig {
  int eval_crop = 512;
  int input_size = 256;
  double threshold = 0.5;
  /// Drop samples whose prediction and ground truth are both empty instead
  /// of scoring them (1, 1).
  bool exclude_empty = false;
  std::size_t batch_size = 8;
};

struct EvaluationResult {
  MetricReport dataset;
  MetricReport per_video;
  std::vector<SampleMetrics> samples;
};

/// Centre-crop protocol over every sample, in dataset order.
EvaluationResult evaluate(const Predictor& predictor, const SampleDataset& dataset, const EvalConfig& config);

EvaluationResult evaluate(const std::filesystem::path& checkpoint, const SampleDataset& dataset,
                          const EvalConfig& config);

/// Colour used for mask overlays (RGB).
inline const cv::Vec3f kOverlayPink{255.f / 255.f, 105.f / 255.f, 180.f / 255.f};

/// Blends `color` over `frame` with weight `alpha` wherever mask is 1.
Frame overlay(const Frame& frame, const Mask& mask, const cv::Vec3f& color = kOverlayPink, double alpha = 0.5);

struct PredictionImages {
  Mask mask;
  Frame recon;
  Frame overlay;
};

/// Runs the predictor on the sample's references (eval preprocessing) and
/// writes mask.png, recon.png and overlay.png to `out_dir` when non-empty.
/// The overlay is drawn on the query frame when the sample has one and on
/// the predicted frame otherwise.
PredictionImages predict_and_overlay(const Predictor& predictor, const Sample& sample, const EvalConfig& config,
                                     const std::filesystem::path& out_dir = {});

/// Loads a sample directory: `frames/frame_%06d.png` holding tau references,
/// optionally followed by the query frame, and an optional `mask.png`.
Sample load_sample_dir(const std::filesystem::path& dir, std::size_t tau);

}  // namespace dvos::eval
