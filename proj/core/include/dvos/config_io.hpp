#pragma once

#include <filesystem>
#include <string>

#include "dvos/model.hpp"
#include "dvos/synth.hpp"
#include "dvos/train.hpp"

namespace dvos {

// JSON (de)serialisation of the configuration structs. Missing keys keep
// their defaults; unknown keys are rejected so typos fail loudly.

std::string network_config_to_json(const model::NetworkConfig& config);
model::NetworkConfig network_config_from_json(const std::string& text);

std::string synth_config_to_json(const synth::SynthConfig& config);
synth::SynthConfig synth_config_from_json(const std::string& text);

std::string train_config_to_json(const train::TrainConfig& config);
train::TrainConfig train_config_from_json(const std::string& text);

/// Everything the `train` command needs, from one file:
/// { "network": {...}, "train": {...}, "data": {...} }.
struct TrainingJob {
  model::NetworkConfig network;
  train::TrainConfig train;
  std::filesystem::path train_manifest;
  std::filesystem::path val_manifest;
  std::filesystem::path out_dir = "runs";
  /// Phase 2 starting point; defaults to <out_dir>/phase1_best.ckpt.
  std::filesystem::path init_checkpoint;
  bool cache_frames = true;
};

/// Relative paths in the "data" section resolve against the file's directory.
TrainingJob load_training_job(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

/// Lists the differing top-level keys of two configs, empty when equal.
std::string describe_config_difference(const model::NetworkConfig& a, const model::NetworkConfig& b);

}  // namespace dvos
