#include "dvos/metrics.hpp"

#include <iomanip>
#include <map>
#include <sstream>

#include <torch/torch.h>

#include "dvos/common.hpp"
#include "json.hpp"

namespace dvos::eval {

DiceIou dice_iou_from_counts(long long intersection, long long predicted, long long truth) {
  if (predicted == 0 && truth == 0) return {1.0, 1.0};
  if (predicted == 0 || truth == 0) return {0.0, 0.0};
  const double inter = static_cast<double>(intersection);
  const double uni = static_cast<double>(predicted + truth - intersection);
  return {2.0 * inter / static_cast<double>(predicted + truth), inter / uni};
}

DiceIou dice_iou(const torch::Tensor& pred_logits, const torch::Tensor& gt_mask, double threshold) {
  if (pred_logits.sizes() != gt_mask.sizes()) throw Error("shape_mismatch", "prediction and mask shapes differ");
  if (!((gt_mask == 0) | (gt_mask == 1)).all().item<bool>()) throw Error("invalid_argument", "mask must be binary");
  auto p = torch::sigmoid(pred_logits.detach()) > threshold;
  auto g = gt_mask.detach() != 0;
  return dice_iou_from_counts((p & g).sum().item<std::int64_t>(), p.sum().item<std::int64_t>(), g.sum().item<std::int64_t>());
}

std::vector<DiceIou> dice_iou_batch(const torch::Tensor& pred_logits, const torch::Tensor& gt_mask,
                                    double threshold) {
  if (pred_logits.sizes() != gt_mask.sizes()) throw Error("shape_mismatch", "prediction and mask shapes differ");
  std::vector<DiceIou> out;
  for (int64_t i = 0; i < pred_logits.size(0); ++i) out.push_back(dice_iou(pred_logits[i], gt_mask[i], threshold));
  return out;
}

double dice_from_iou(double iou) { return 2.0 * iou / (1.0 + iou); }

namespace {

ReportRow summarize(const std::string& name, const std::vector<const SampleMetrics*>& members) {
  ReportRow row;
  row.name = name;
  row.n_samples = members.size();
  if (members.empty()) return row;
  for (const auto* m : members) {
    row.mean_iou += m->scores.iou;
    row.mean_dice += m->scores.dice;
    row.mean_recon_mse += m->recon_mse;
    row.mean_copy_last_mse += m->copy_last_mse;
  }
  const double n = static_cast<double>(members.size());
  row.mean_iou /= n;
  row.mean_dice /= n;
  row.mean_recon_mse /= n;
  row.mean_copy_last_mse /= n;
  return row;
}

}  // namespace

MetricReport aggregate_dataset(const std::vector<SampleMetrics>& samples, double threshold, const std::string& name) {
  std::vector<const SampleMetrics*> all;
  for (const auto& s : samples) all.push_back(&s);
  return {ReportScope::dataset, {summarize(name, all)}, threshold};
}

MetricReport aggregate_per_video(const std::vector<SampleMetrics>& samples, double threshold) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const SampleMetrics*>> groups;
  for (const auto& s : samples) {
    auto [it, inserted] = groups.try_emplace(s.video_id);
    if (inserted) order.push_back(s.video_id);
    it->second.push_back(&s);
  }
  MetricReport report{ReportScope::per_video, {}, threshold};
  for (const auto& v : order) report.rows.push_back(summarize(v, groups[v]));
  return report;
}

std::string to_json(const MetricReport& report, int indent) {
  nlohmann::json j;
  j["scope"] = report.scope == ReportScope::dataset ? "dataset" : "per_video";
  j["threshold"] = report.threshold;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : report.rows) {
    j["rows"].push_back({{"name", r.name},
                         {"n_samples", r.n_samples},
                         {"mean_iou", r.mean_iou},
                         {"mean_dice", r.mean_dice},
                         {"mean_recon_mse", r.mean_recon_mse},
                         {"mean_copy_last_mse", r.mean_copy_last_mse}});
  }
  return j.dump(indent);
}

std::string to_text_table(const MetricReport& report) {
  std::size_t name_width = 5;
  for (const auto& r : report.rows) name_width = std::max(name_width, r.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(name_width)) << "Video" << "  " << std::right << std::setw(7) << "N"
     << "  " << std::setw(7) << "IoU" << "  " << std::setw(7) << "Dice" << "  " << std::setw(10) << "MSE" << "  "
     << std::setw(10) << "CopyMSE" << '\n';
  os << std::string(name_width + 2 + 7 + 2 + 7 + 2 + 7 + 2 + 10 + 2 + 10, '-') << '\n';
  os << std::fixed;
  for (const auto& r : report.rows) {
    os << std::left << std::setw(static_cast<int>(name_width)) << r.name << "  " << std::right << std::setw(7)
       << r.n_samples << "  " << std::setprecision(3) << std::setw(7) << r.mean_iou << "  " << std::setw(7)
       << r.mean_dice << "  " << std::setprecision(5) << std::setw(10) << r.mean_recon_mse << "  " << std::setw(10)
       << r.mean_copy_last_mse << '\n';
  }
  return os.str();
}

}  // namespace dvos::eval
