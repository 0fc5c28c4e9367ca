#include "dvos/batch.hpp"

#include <torch/torch.h>

namespace dvos {

Batch collate(const std::vector<Sample>& samples) {
  if (samples.empty()) throw Error("invalid_argument", "cannot collate an empty batch");
  const bool labeled = samples.front().query_mask.has_value();
  std::vector<torch::Tensor> refs, queries, masks;
  Batch b;
  for (const auto& s : samples) {
    s.validate();
    if (s.tau() != samples.front().tau()) throw Error("shape_mismatch", "samples differ in tau");
    if (s.query_mask.has_value() != labeled) throw Error("invalid_argument", "mixed labeled and unlabeled samples");
    std::vector<torch::Tensor> r;
    for (const auto& f : s.references) r.push_back(to_tensor(f));
    refs.push_back(torch::stack(r));
    queries.push_back(to_tensor(s.query_frame));
    if (labeled) masks.push_back(to_tensor(*s.query_mask));
    b.video_ids.push_back(s.video_id);
    b.query_indices.push_back(s.query_index);
  }
  b.references = torch::stack(refs);
  b.query = torch::stack(queries);
  if (labeled) b.mask = torch::stack(masks);
  return b;
}

}  // namespace dvos
