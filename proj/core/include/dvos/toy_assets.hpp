#pragma once

#include <cstdint>
#include <vector>

#include "dvos/image.hpp"

namespace dvos::toy {

// Procedural stand-ins for field footage: used by the demo assets command,
// the tests and the desk-scale acceptance runs.

/// Soil-like texture with slow camera drift and brightness flicker.
std::vector<Frame> background_clip(int length, int height, int width, std::uint64_t seed);

struct AnnotatedFrame {
  Frame frame;
  Mask mask;
};

/// Canopy texture with `n_heads` striped elliptical "heads" and their mask.
/// Head semi-axes are drawn from [head_minor, head_minor*1.4] and
/// [head_major, head_major*1.4].
AnnotatedFrame annotated_frame(int height, int width, int n_heads, double head_minor, double head_major,
                               std::uint64_t seed);

}  // namespace dvos::toy
