#include "dvos/evaluate.hpp"

#include <algorithm>
#include <regex>

#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "dvos/augment.hpp"
#include "dvos/batch.hpp"
#include "dvos/checkpoint.hpp"

namespace dvos::eval {

namespace fs = std::filesystem;

Predictor make_predictor(model::DvosNet net) {
  return [net](const torch::Tensor& references) mutable {
    torch::NoGradGuard no_grad;
    net->eval();
    return net->forward(references, model::Mode::eval);
  };
}

namespace {

std::vector<double> per_sample_mse(const torch::Tensor& a, const torch::Tensor& b) {
  auto d = (a - b).pow(2).flatten(1).mean(1).to(torch::kDouble).contiguous();
  return {d.data_ptr<double>(), d.data_ptr<double>() + d.numel()};
}

}  // namespace

EvaluationResult evaluate(const Predictor& predictor, const SampleDataset& dataset, const EvalConfig& config) {
  if (config.eval_crop <= 0 || config.input_size <= 0) throw Error("invalid_config", "eval sizes must be positive");
  if (config.batch_size == 0) throw Error("invalid_config", "batch_size must be >= 1");
  if (!dataset.labeled()) throw Error("unlabeled", "evaluation needs ground-truth masks");

  EvaluationResult result;
  for (std::size_t start = 0; start < dataset.size(); start += config.batch_size) {
    const std::size_t stop = std::min(dataset.size(), start + config.batch_size);
    std::vector<Sample> samples;
    for (std::size_t i = start; i < stop; ++i) {
      samples.push_back(train::eval_transform(dataset.get(i), config.eval_crop, config.input_size));
    }
    const Batch batch = collate(samples);
    const model::NetworkOutput out = predictor(batch.references);
    const auto scores = dice_iou_batch(out.seg_logits, batch.mask, config.threshold);
    const auto recon = per_sample_mse(out.recon.clamp(0.0, 1.0), batch.query);
    const auto last = batch.references.select(1, batch.references.size(1) - 1);
    const auto copy_last = per_sample_mse(last, batch.query);
    const auto pred_counts = (torch::sigmoid(out.seg_logits) > config.threshold).flatten(1).sum(1);
    const auto gt_counts = batch.mask.flatten(1).sum(1);

    for (std::size_t k = 0; k < samples.size(); ++k) {
      SampleMetrics m;
      m.video_id = batch.video_ids[k];
      m.query_index = batch.query_indices[k];
      m.scores = scores[k];
      m.recon_mse = recon[k];
      m.copy_last_mse = copy_last[k];
      const auto idx = static_cast<std::int64_t>(k);
      m.empty_pair = pred_counts[idx].item<std::int64_t>() == 0 && gt_counts[idx].item<double>() == 0.0;
      if (config.exclude_empty && m.empty_pair) continue;
      result.samples.push_back(std::move(m));
    }
  }
  result.dataset = aggregate_dataset(result.samples, config.threshold);
  result.per_video = aggregate_per_video(result.samples, config.threshold);
  return result;
}

EvaluationResult evaluate(const fs::path& checkpoint, const SampleDataset& dataset, const EvalConfig& config) {
  auto loaded = model::load_checkpoint(checkpoint);
  if (static_cast<std::size_t>(loaded.config.tau) != dataset.tau()) {
    throw Error("config_mismatch", "checkpoint tau differs from the dataset window length");
  }
  EvalConfig c = config;
  c.input_size = loaded.config.input_size;
  return evaluate(make_predictor(loaded.net), dataset, c);
}

Frame overlay(const Frame& frame, const Mask& mask, const cv::Vec3f& color, double alpha) {
  if (frame.height() != mask.height() || frame.width() != mask.width()) {
    throw Error("shape_mismatch", "overlay frame and mask differ in size");
  }
  cv::Mat out = frame.pixels.clone();
  const cv::Mat tint(out.size(), CV_32FC3, cv::Scalar(color[0], color[1], color[2]));
  cv::Mat blended;
  cv::addWeighted(out, 1.0 - alpha, tint, alpha, 0.0, blended);
  blended.copyTo(out, mask.pixels);
  return Frame(out);
}

PredictionImages predict_and_overlay(const Predictor& predictor, const Sample& sample, const EvalConfig& config,
                                     const fs::path& out_dir) {
  const Sample s = train::eval_transform(sample, config.eval_crop, config.input_size);
  std::vector<torch::Tensor> refs;
  for (const auto& f : s.references) refs.push_back(to_tensor(f));
  const auto out = predictor(torch::stack(refs).unsqueeze(0));

  PredictionImages images;
  images.mask = mask_from_tensor((torch::sigmoid(out.seg_logits[0]) > config.threshold).to(torch::kUInt8));
  images.recon = frame_from_tensor(out.recon[0]);
  images.overlay = overlay(s.query_frame.empty() ? images.recon : s.query_frame, images.mask);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    save_mask(out_dir / "mask.png", images.mask);
    save_frame(out_dir / "recon.png", images.recon);
    save_frame(out_dir / "overlay.png", images.overlay);
  }
  return images;
}

Sample load_sample_dir(const fs::path& dir, std::size_t tau) {
  const fs::path frames_dir = dir / "frames";
  if (!fs::is_directory(frames_dir)) throw Error("io_error", "missing directory " + frames_dir.string());
  static const std::regex pattern(R"(frame_\d{6}\.png)");
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(frames_dir)) {
    if (std::regex_match(entry.path().filename().string(), pattern)) paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.size() != tau && paths.size() != tau + 1) {
    throw Error("invalid_sample", "expected " + std::to_string(tau) + " or " + std::to_string(tau + 1) +
                                      " frames in " + frames_dir.string() + ", found " + std::to_string(paths.size()));
  }
  Sample s;
  s.video_id = dir.filename().string();
  s.query_index = tau;
  for (std::size_t i = 0; i < tau; ++i) s.references.push_back(load_frame(paths[i]));
  if (paths.size() == tau + 1) s.query_frame = load_frame(paths[tau]);
  if (fs::exists(dir / "mask.png")) {
    if (s.query_frame.empty()) throw Error("invalid_sample", "mask.png given without a query frame");
    s.query_mask = load_mask(dir / "mask.png");
  }
  s.validate();
  return s;
}

}  // namespace dvos::eval
