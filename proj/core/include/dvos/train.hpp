#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <torch/torch.h>

#include "dvos/augment.hpp"
#include "dvos/batch.hpp"
#include "dvos/data.hpp"
#include "dvos/evaluate.hpp"
#include "dvos/losses.hpp"
#include "dvos/model.hpp"

namespace dvos::train {

enum class Phase { synthetic = 1, weak = 2 };

struct TrainConfig {
  Phase phase = Phase::synthetic;
  int epochs = 15;
  double lr = 1e-4;
  /// Phase 1 uses 1e-5; phase 2 runs without decay.
  double weight_decay = 1e-5;
  int crop_min = 400;
  int crop_max = 750;
  int train_size = 256;
  int eval_crop = 512;
  double patch_diffusion_p = 0.5;
  int patch_diffusion_max_step = 1000;
  int batch_size = 8;
  std::size_t stride = 1;
  std::uint64_t seed = 0;
  LossWeights weights{};
  /// Global-norm clip; <= 0 disables it.
  double grad_clip = 1.0;
  bool augment = true;
  double max_rotation_deg = 10.0;
  double blur_probability = 0.3;
  double eval_threshold = 0.5;
  /// Stop an epoch after this many optimizer steps (0 = full epoch).
  int max_steps_per_epoch = 0;

  void validate() const;
  AugmentConfig augment_config() const;
  eval::EvalConfig eval_config() const;

  /// Phase defaults: phase 2 turns weight decay off.
  static TrainConfig for_phase(Phase phase);
  /// Crop sizes scaled by canvas/1024 for small desk-scale canvases.
  static TrainConfig scaled_for_canvas(int canvas, int train_size);

  bool operator==(const TrainConfig&) const = default;
};

struct EpochStats {
  double recon_mse = 0.0;
  double recon_ssim = 0.0;
  double seg_bce = 0.0;
  double seg_dice = 0.0;
  double total = 0.0;
  std::size_t steps = 0;
  std::size_t samples = 0;
};

/// A non-finite loss; carries the offending batch's sample ids.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& message, std::vector<std::size_t> batch_ids)
      : Error("non_finite_loss", message), batch_ids_(std::move(batch_ids)) {}
  const std::vector<std::size_t>& batch_ids() const { return batch_ids_; }

 private:
  std::vector<std::size_t> batch_ids_;
};

/// Independent stream per (seed, sample, epoch).
Rng sample_rng(std::uint64_t seed, std::size_t sample_id, int epoch);

/// Training view of one sample: augmented (or centre-cropped when
/// augmentation is off) at train_size.
Sample training_view(const SampleDataset& dataset, std::size_t index, const TrainConfig& config, int epoch);

/// Losses for one batch in train mode (references already prepared).
struct StepLoss {
  torch::Tensor total;
  LossBundle values;
};
StepLoss compute_losses(model::DvosNet& net, const Batch& batch, const TrainConfig& config, Rng& rng);

torch::optim::AdamW make_optimizer(model::DvosNet& net, const TrainConfig& config);

/// Weight decay currently set in the optimizer (first param group).
double optimizer_weight_decay(const torch::optim::AdamW& optimizer);

/// One pass over the (shuffled) dataset. Per batch: augment, patch-diffuse
/// references, train-mode forward, weighted loss, optimizer step.
EpochStats train_epoch(model::DvosNet& net, torch::optim::AdamW& optimizer, const SampleDataset& dataset,
                       const TrainConfig& config, int epoch);

/// One row of the append-only metrics log.
struct EpochRecord {
  int phase = 1;
  int epoch = 0;
  EpochStats stats;
  double val_dice = 0.0;
  double val_iou = 0.0;
};

void append_metrics_row(const std::filesystem::path& log, const EpochRecord& record);

struct PhaseResult {
  std::filesystem::path best_checkpoint;
  int best_epoch = 0;
  double best_val_dice = -1.0;
  std::vector<EpochRecord> history;
  std::uint64_t init_hash = 0;
  std::uint64_t best_hash = 0;
  std::vector<std::filesystem::path> epoch_checkpoints;
};

/// Trains one phase. Starts from `init_checkpoint` when given, else from a
/// fresh network. Every epoch is validated in eval mode with the centre-crop
/// protocol and checkpointed; the best validation Dice is kept as
/// phase{N}_best.ckpt in `out_dir`.
PhaseResult fit_phase(const model::NetworkConfig& net_config, const std::optional<std::filesystem::path>& init_checkpoint,
                      const SampleDataset& train_set, const SampleDataset& val_set, const TrainConfig& config,
                      const std::filesystem::path& out_dir);

struct TwoPhaseResult {
  PhaseResult phase1;
  PhaseResult phase2;
};

/// Phase 1 on synthetic data from scratch (weight decay 1e-5), then phase 2
/// on weakly labelled data from the phase-1 best checkpoint (no decay).
TwoPhaseResult fit_two_phase(const model::NetworkConfig& net_config, const SampleDataset& synthetic_set,
                             const SampleDataset& weak_set, const SampleDataset& val_set,
                             const TrainConfig& base_config, const std::filesystem::path& out_dir);

}  // namespace dvos::train
