#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>

#include "dvos/model.hpp"

namespace dvos::model {

struct CheckpointMeta {
  int phase = 0;
  int epoch = 0;
  double val_dice = std::numeric_limits<double>::quiet_NaN();
  /// Parameter hash of the network this training phase started from.
  std::uint64_t init_hash = 0;
};

/// Parameters plus the full NetworkConfig (schedule parameters included).
void save_checkpoint(const std::filesystem::path& path, DvosNet& net, const CheckpointMeta& meta = {});

struct LoadedCheckpoint {
  DvosNet net{nullptr};
  NetworkConfig config;
  CheckpointMeta meta;
};

/// Rebuilds the network from the stored config. When `expected` is given,
/// any difference from the stored config is an error.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const NetworkConfig* expected = nullptr);

}  // namespace dvos::model
