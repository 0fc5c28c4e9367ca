#pragma once

#include <string>
#include <vector>

#include <torch/types.h>

namespace dvos::eval {

struct DiceIou {
  double dice = 0.0;
  double iou = 0.0;
};

/// Dice and IoU from set counts. Both empty gives (1, 1); exactly one empty
/// gives (0, 0).
DiceIou dice_iou_from_counts(long long intersection, long long predicted, long long truth);

/// P = sigmoid(logits) > threshold against a binary ground truth of the same
/// shape; the whole tensor is treated as one sample.
DiceIou dice_iou(const torch::Tensor& pred_logits, const torch::Tensor& gt_mask, double threshold = 0.5);

/// Per-sample variant for (B, ...) tensors.
std::vector<DiceIou> dice_iou_batch(const torch::Tensor& pred_logits, const torch::Tensor& gt_mask,
                                    double threshold = 0.5);

/// Dice implied by an IoU value for a single sample: 2 iou / (1 + iou).
double dice_from_iou(double iou);

enum class ReportScope { dataset, per_video };

struct ReportRow {
  std::string name;
  std::size_t n_samples = 0;
  double mean_iou = 0.0;
  double mean_dice = 0.0;
  double mean_recon_mse = 0.0;
  double mean_copy_last_mse = 0.0;
};

struct MetricReport {
  ReportScope scope = ReportScope::dataset;
  std::vector<ReportRow> rows;
  double threshold = 0.5;
};

/// Per-sample record kept by evaluation, in sample order.
struct SampleMetrics {
  std::string video_id;
  std::size_t query_index = 0;
  DiceIou scores;
  double recon_mse = 0.0;
  double copy_last_mse = 0.0;
  bool empty_pair = false;  // prediction and ground truth both empty
};

MetricReport aggregate_dataset(const std::vector<SampleMetrics>& samples, double threshold,
                               const std::string& name = "all");
/// One row per video, ordered by first appearance.
MetricReport aggregate_per_video(const std::vector<SampleMetrics>& samples, double threshold);

std::string to_json(const MetricReport& report, int indent = 2);
std::string to_text_table(const MetricReport& report);

}  // namespace dvos::eval
