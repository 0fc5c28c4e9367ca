#include "dvos/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dvos/checkpoint.hpp"
#include "dvos/diffusion.hpp"

namespace dvos::train {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (epochs < 1) throw Error("invalid_config", "epochs must be >= 1");
  if (lr < 0.0 || weight_decay < 0.0) throw Error("invalid_config", "lr and weight_decay must be non-negative");
  if (crop_min <= 0 || crop_min > crop_max) throw Error("invalid_config", "need 0 < crop_min <= crop_max");
  if (train_size <= 0 || train_size > crop_min) {
    throw Error("invalid_config", "train_size must be positive and not exceed crop_min");
  }
  if (eval_crop <= 0) throw Error("invalid_config", "eval_crop must be positive");
  if (!(patch_diffusion_p >= 0.0 && patch_diffusion_p <= 1.0)) {
    throw Error("invalid_config", "patch_diffusion_p must lie in [0, 1]");
  }
  if (patch_diffusion_max_step < 1) throw Error("invalid_config", "patch_diffusion_max_step must be >= 1");
  if (batch_size < 1) throw Error("invalid_config", "batch_size must be >= 1");
  if (stride < 1) throw Error("invalid_config", "stride must be >= 1");
}

AugmentConfig TrainConfig::augment_config() const {
  AugmentConfig a;
  a.crop_min = crop_min;
  a.crop_max = crop_max;
  a.output_size = train_size;
  a.max_rotation_deg = max_rotation_deg;
  a.blur_probability = blur_probability;
  return a;
}

eval::EvalConfig TrainConfig::eval_config() const {
  eval::EvalConfig e;
  e.eval_crop = eval_crop;
  e.input_size = train_size;
  e.threshold = eval_threshold;
  e.batch_size = static_cast<std::size_t>(batch_size);
  return e;
}

TrainConfig TrainConfig::for_phase(Phase phase) {
  TrainConfig c;
  c.phase = phase;
  c.weight_decay = phase == Phase::synthetic ? 1e-5 : 0.0;
  return c;
}

TrainConfig TrainConfig::scaled_for_canvas(int canvas, int train_size) {
  TrainConfig c;
  const double k = static_cast<double>(canvas) / 1024.0;
  c.crop_min = static_cast<int>(std::lround(400 * k));
  c.crop_max = static_cast<int>(std::lround(750 * k));
  c.eval_crop = static_cast<int>(std::lround(512 * k));
  c.train_size = train_size;
  return c;
}

Rng sample_rng(std::uint64_t seed, std::size_t sample_id, int epoch) {
  return Rng(mix_seed(mix_seed(seed, sample_id), static_cast<std::uint64_t>(epoch)));
}

Sample training_view(const SampleDataset& dataset, std::size_t index, const TrainConfig& config, int epoch) {
  Sample s = dataset.get(index);
  if (config.augment) {
    Rng rng = sample_rng(config.seed, index, epoch);
    return augment_sample(s, rng, config.augment_config());
  }
  const int side = std::min(s.query_frame.height(), s.query_frame.width());
  return eval_transform(s, side, config.train_size);
}

StepLoss compute_losses(model::DvosNet& net, const Batch& batch, const TrainConfig& config, Rng& rng) {
  if (!batch.mask.defined()) throw Error("unlabeled", "training batch has no masks");
  const auto schedule = net->config().schedule();
  auto refs = diffusion::patch_diffuse_batch(batch.references, config.patch_diffusion_p, schedule, rng,
                                             config.patch_diffusion_max_step)
                  .frames;
  auto out = net->forward(refs, model::Mode::train, &rng);
  auto seg = seg_loss(out.seg_logits, batch.mask);
  auto rec = recon_loss(out.recon, batch.query);
  const LossWeights& w = config.weights;
  StepLoss s;
  s.total = w.mse * rec.mse + w.ssim * rec.ssim + w.bce * seg.bce + w.dice * seg.dice;
  s.values = {rec.mse.item<double>(), rec.ssim.item<double>(), seg.bce.item<double>(), seg.dice.item<double>(), w,
              s.total.item<double>()};
  return s;
}

torch::optim::AdamW make_optimizer(model::DvosNet& net, const TrainConfig& config) {
  return torch::optim::AdamW(net->parameters(),
                             torch::optim::AdamWOptions(config.lr).weight_decay(config.weight_decay));
}

double optimizer_weight_decay(const torch::optim::AdamW& optimizer) {
  const auto& groups = optimizer.param_groups();
  if (groups.empty()) return 0.0;
  return static_cast<const torch::optim::AdamWOptions&>(groups.front().options()).weight_decay();
}

EpochStats train_epoch(model::DvosNet& net, torch::optim::AdamW& optimizer, const SampleDataset& dataset,
                       const TrainConfig& config, int epoch) {
  config.validate();
  if (dataset.empty()) throw Error("empty_dataset", "training dataset is empty");
  net->train();

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(mix_seed(config.seed ^ 0x5A5A5A5AULL, static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

  EpochStats stats;
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    if (config.max_steps_per_epoch > 0 && stats.steps >= static_cast<std::size_t>(config.max_steps_per_epoch)) break;
    const std::size_t stop = std::min(order.size(), start + batch_size);
    std::vector<std::size_t> ids(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(stop));
    std::vector<Sample> samples;
    samples.reserve(ids.size());
    for (std::size_t id : ids) samples.push_back(training_view(dataset, id, config, epoch));
    const Batch batch = collate(samples);

    Rng step_rng(mix_seed(mix_seed(config.seed ^ 0xD1FFULL, static_cast<std::uint64_t>(epoch)), stats.steps));
    StepLoss loss = compute_losses(net, batch, config, step_rng);
    if (!std::isfinite(loss.values.total)) {
      std::ostringstream os;
      os << "non-finite loss at epoch " << epoch << ", step " << stats.steps << "; batch sample ids:";
      for (std::size_t id : ids) os << ' ' << id << " (" << dataset.video_id(id) << ")";
      throw TrainingError(os.str(), ids);
    }
    optimizer.zero_grad();
    loss.total.backward();
    if (config.grad_clip > 0.0) torch::nn::utils::clip_grad_norm_(net->parameters(), config.grad_clip);
    optimizer.step();

    const double n = static_cast<double>(ids.size());
    stats.recon_mse += loss.values.recon_mse * n;
    stats.recon_ssim += loss.values.recon_ssim * n;
    stats.seg_bce += loss.values.seg_bce * n;
    stats.seg_dice += loss.values.seg_dice * n;
    stats.total += loss.values.total * n;
    stats.samples += ids.size();
    stats.steps += 1;
  }
  if (stats.samples > 0) {
    const double n = static_cast<double>(stats.samples);
    stats.recon_mse /= n;
    stats.recon_ssim /= n;
    stats.seg_bce /= n;
    stats.seg_dice /= n;
    stats.total /= n;
  }
  return stats;
}

void append_metrics_row(const fs::path& log, const EpochRecord& r) {
  const bool fresh = !fs::exists(log);
  if (log.has_parent_path()) fs::create_directories(log.parent_path());
  std::ofstream out(log, std::ios::app);
  if (!out) throw Error("io_error", "cannot append to " + log.string());
  if (fresh) out << "phase\tepoch\tmse\tssim_loss\tbce\tdice_loss\ttotal\tval_dice\tval_iou\n";
  out << r.phase << '\t' << r.epoch << '\t' << r.stats.recon_mse << '\t' << r.stats.recon_ssim << '\t'
      << r.stats.seg_bce << '\t' << r.stats.seg_dice << '\t' << r.stats.total << '\t' << r.val_dice << '\t'
      << r.val_iou << '\n';
}

PhaseResult fit_phase(const model::NetworkConfig& net_config, const std::optional<fs::path>& init_checkpoint,
                      const SampleDataset& train_set, const SampleDataset& val_set, const TrainConfig& config,
                      const fs::path& out_dir) {
  config.validate();
  if (!val_set.labeled() || val_set.empty()) throw Error("unlabeled", "validation set needs masks");
  if (net_config.input_size != config.train_size) {
    throw Error("invalid_config", "network input_size must equal train_size");
  }
  const int phase = static_cast<int>(config.phase);

  model::DvosNet net{nullptr};
  if (init_checkpoint) {
    net = model::load_checkpoint(*init_checkpoint, &net_config).net;
  } else {
    torch::manual_seed(config.seed);
    net = model::DvosNet(net_config);
  }
  auto optimizer = make_optimizer(net, config);

  PhaseResult result;
  result.init_hash = model::parameter_hash(*net);
  fs::create_directories(out_dir);
  const fs::path best_path = out_dir / ("phase" + std::to_string(phase) + "_best.ckpt");

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord record;
    record.phase = phase;
    record.epoch = epoch;
    record.stats = train_epoch(net, optimizer, train_set, config, epoch);

    const auto val = eval::evaluate(eval::make_predictor(net), val_set, config.eval_config());
    record.val_dice = val.dataset.rows.front().mean_dice;
    record.val_iou = val.dataset.rows.front().mean_iou;
    result.history.push_back(record);
    append_metrics_row(out_dir / "metrics.tsv", record);

    const model::CheckpointMeta meta{phase, epoch, record.val_dice, result.init_hash};
    const fs::path epoch_path =
        out_dir / ("phase" + std::to_string(phase) + "_epoch" + std::to_string(epoch) + ".ckpt");
    model::save_checkpoint(epoch_path, net, meta);
    result.epoch_checkpoints.push_back(epoch_path);
    if (record.val_dice > result.best_val_dice) {
      result.best_val_dice = record.val_dice;
      result.best_epoch = epoch;
      result.best_hash = model::parameter_hash(*net);
      fs::copy_file(epoch_path, best_path, fs::copy_options::overwrite_existing);
    }
  }
  result.best_checkpoint = best_path;
  return result;
}

TwoPhaseResult fit_two_phase(const model::NetworkConfig& net_config, const SampleDataset& synthetic_set,
                             const SampleDataset& weak_set, const SampleDataset& val_set,
                             const TrainConfig& base_config, const fs::path& out_dir) {
  if (!val_set.labeled()) throw Error("unlabeled", "validation set needs masks");
  TrainConfig first = base_config;
  first.phase = Phase::synthetic;
  first.weight_decay = 1e-5;
  TwoPhaseResult out;
  out.phase1 = fit_phase(net_config, std::nullopt, synthetic_set, val_set, first, out_dir);

  TrainConfig second = base_config;
  second.phase = Phase::weak;
  second.weight_decay = 0.0;
  out.phase2 = fit_phase(net_config, out.phase1.best_checkpoint, weak_set, val_set, second, out_dir);
  return out;
}

}  // namespace dvos::train
