#pragma once

#include <vector>

#include <torch/types.h>

#include "dvos/data.hpp"

namespace dvos {

/// Stacked tensors of equally sized samples.
struct Batch {
  torch::Tensor references;  // (B, tau, 3, H, W)
  torch::Tensor query;       // (B, 3, H, W)
  torch::Tensor mask;        // (B, 1, H, W); undefined when unlabeled
  std::vector<std::string> video_ids;
  std::vector<std::size_t> query_indices;
};

Batch collate(const std::vector<Sample>& samples);

}  // namespace dvos
