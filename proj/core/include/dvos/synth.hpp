#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "dvos/common.hpp"
#include "dvos/data.hpp"
#include "dvos/image.hpp"

namespace dvos::synth {

enum class CutoutKind { real, fake };

/// Object silhouette with its colours. The alpha bounding box is tight.
struct Cutout {
  cv::Mat color;  // CV_32FC3, RGB in [0,1]
  cv::Mat alpha;  // CV_8UC1 in {0,1}
  CutoutKind kind = CutoutKind::real;
  std::string source_id;

  int height() const { return alpha.rows; }
  int width() const { return alpha.cols; }
  long long area() const { return cv::countNonZero(alpha); }
};

struct CutoutBank {
  std::vector<Cutout> real;
  std::vector<Cutout> fake;

  int max_dimension() const;
};

/// One cutout per 8-connected component of `mask`.
std::vector<Cutout> extract_cutouts(const Frame& frame, const Mask& mask, const std::string& source_id = "");

/// Uses each shape's alpha as a cookie-cutter on `frame` at a random spot
/// that does not touch `real_mask`. Shapes without a valid spot after
/// `max_trials` attempts are skipped with a warning.
std::vector<Cutout> extract_fake_cutouts(const Frame& frame, const Mask& real_mask, const std::vector<Cutout>& shapes,
                                         std::uint64_t seed, Warnings* warnings = nullptr, int max_trials = 100);

void save_bank(const std::filesystem::path& dir, const CutoutBank& bank);
CutoutBank load_bank(const std::filesystem::path& dir);

struct IntRange {
  int min = 0;
  int max = 0;
};

struct RealRange {
  double min = 0.0;
  double max = 0.0;
};

struct SynthConfig {
  int clip_length = 60;
  int canvas = 1024;
  IntRange n_real{60, 140};
  IntRange n_fake{20, 60};
  RealRange speed{0.0, 2.0};             // px/frame
  double direction_jitter_deg = 5.0;     // stddev per frame
  RealRange angular_rate{-2.0, 2.0};     // deg/frame
  RealRange scale{0.8, 1.2};
  RealRange global_amplitude{0.0, 3.0};  // px/frame
  RealRange global_period{30.0, 90.0};   // frames
  double color_jitter = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  /// Object counts of the 1024-canvas defaults scaled by (canvas/1024)^2.
  static SynthConfig for_canvas(int canvas);
};

struct ObjectState {
  CutoutKind kind = CutoutKind::real;
  std::size_t cutout_index = 0;  // into bank.real or bank.fake
  cv::Point2d position;          // cutout centre, canvas pixels
  cv::Point2d velocity;          // px/frame
  double orientation_deg = 0.0;
  double angular_rate_deg = 0.0;
  double scale = 1.0;
  std::uint64_t color_jitter_seed = 0;
};

struct SceneState {
  std::vector<ObjectState> objects;  // composited in order: fakes, then reals
  cv::Point2d global_velocity;
  double global_phase = 0.0;
  double global_phase_rate = 0.0;  // radians/frame
  int frame_index = 0;
  Rng rng;

  /// Frame-level displacement applied at the next step.
  cv::Point2d global_displacement() const;
};

SceneState init_scene(const SynthConfig& config, const CutoutBank& bank, std::uint64_t seed);

/// Advances one frame: per-object motion, frame-level sway, direction jitter
/// and respawn of objects whose silhouette has left the canvas.
SceneState step_scene(const SceneState& state, const SynthConfig& config, const CutoutBank& bank);

/// A cutout after rotation, scaling and colour jitter, positioned on the
/// canvas. `roi` is already clipped to the canvas; patches match its size.
struct RenderedObject {
  cv::Rect roi;
  cv::Mat color;  // CV_32FC3
  cv::Mat alpha;  // CV_8UC1 {0,1}
  CutoutKind kind = CutoutKind::real;
};

/// Canvas-space bounding box of the transformed cutout (unclipped).
cv::Rect2d object_bounds(const Cutout& cutout, const ObjectState& object);

RenderedObject render_object(const Cutout& cutout, const ObjectState& object, int canvas_height, int canvas_width,
                             double color_jitter);

const Cutout& cutout_for(const CutoutBank& bank, const ObjectState& object);

struct CompositeResult {
  Frame frame;
  Mask mask;
};

/// Draws every object over `background` (fakes below reals). The mask is the
/// union of real silhouettes only.
CompositeResult composite(const Frame& background, const SceneState& state, const CutoutBank& bank,
                          double color_jitter);

struct SynthClip {
  std::vector<Frame> frames;
  std::vector<Mask> masks;
};

SynthClip synthesize_clip(const std::vector<Frame>& backgrounds, const CutoutBank& bank, const SynthConfig& config,
                          std::uint64_t seed);

/// `n_windows` runs of `tau_clip` consecutive canvas x canvas crops; one crop
/// origin and start index per run.
std::vector<std::vector<Frame>> extract_background_windows(const ClipSource& clip, int tau_clip, int canvas,
                                                           int n_windows, std::uint64_t seed);

/// Real cutouts from every labelled frame, plus fakes cut from the same frame
/// with that frame's real silhouettes.
CutoutBank build_bank(const std::vector<std::shared_ptr<const ClipSource>>& annotated, std::uint64_t seed,
                      Warnings* warnings = nullptr);

struct IndexedClip {
  std::string clip_id;       // synth_%05d
  std::string source_group;  // id of the background clip it was cut from
  SynthClip clip;
};

/// Clip number `index` of a synthetic dataset: a background window picked
/// from `backgrounds` and a scene seeded from (seed, index).
IndexedClip synthesize_indexed_clip(const std::vector<std::shared_ptr<const ClipSource>>& backgrounds,
                                    const CutoutBank& bank, const SynthConfig& config, std::size_t index,
                                    std::uint64_t seed);

/// Writes `n_clips` clips under `out_root` (label_kind synthetic) and saves
/// `out_root/manifest.json`.
DatasetManifest synthesize_dataset(const std::vector<std::shared_ptr<const ClipSource>>& backgrounds,
                                   const CutoutBank& bank, const SynthConfig& config, std::size_t n_clips,
                                   std::uint64_t seed, const std::filesystem::path& out_root);

}  // namespace dvos::synth
