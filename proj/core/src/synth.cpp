#include "dvos/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "json.hpp"

namespace dvos::synth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void check_range(const char* name, double lo, double hi) {
  if (lo > hi) throw Error("invalid_config", std::string(name) + ": min exceeds max");
}

// Forward affine map from cutout pixel coordinates to canvas coordinates.
cv::Matx23d object_transform(const Cutout& cutout, const ObjectState& object) {
  const double theta = object.orientation_deg * kDegToRad;
  const double c = std::cos(theta) * object.scale;
  const double s = std::sin(theta) * object.scale;
  const double cx = (cutout.width() - 1) / 2.0;
  const double cy = (cutout.height() - 1) / 2.0;
  return {c, -s, object.position.x - (c * cx - s * cy),  //
          s, c, object.position.y - (s * cx + c * cy)};
}

cv::Matx33f hue_rotation(double radians) {
  // Rotation of the chroma plane in YIQ space.
  const cv::Matx33f to_yiq(0.299f, 0.587f, 0.114f,     //
                           0.596f, -0.274f, -0.322f,   //
                           0.211f, -0.523f, 0.312f);
  const cv::Matx33f rot(1.f, 0.f, 0.f,                                                             //
                        0.f, static_cast<float>(std::cos(radians)), static_cast<float>(-std::sin(radians)),  //
                        0.f, static_cast<float>(std::sin(radians)), static_cast<float>(std::cos(radians)));
  return to_yiq.inv() * rot * to_yiq;
}

double draw(Rng& rng, RealRange r) { return r.max > r.min ? rng.uniform(r.min, r.max) : r.min; }

ObjectState sample_object(CutoutKind kind, const SynthConfig& config, const CutoutBank& bank, Rng& rng) {
  const auto& pool = kind == CutoutKind::real ? bank.real : bank.fake;
  ObjectState o;
  o.kind = kind;
  o.cutout_index = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1));
  o.position = {rng.uniform(0.0, config.canvas), rng.uniform(0.0, config.canvas)};
  const double speed = draw(rng, config.speed);
  const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  o.velocity = {speed * std::cos(heading), speed * std::sin(heading)};
  o.orientation_deg = rng.uniform(0.0, 360.0);
  o.angular_rate_deg = draw(rng, config.angular_rate);
  o.scale = draw(rng, config.scale);
  o.color_jitter_seed = rng.next_u64();
  return o;
}

bool visible(const Cutout& cutout, const ObjectState& object, int canvas) {
  const cv::Rect2d b = object_bounds(cutout, object);
  if (b.x + b.width < 0 || b.y + b.height < 0 || b.x > canvas || b.y > canvas) return false;
  const RenderedObject r = render_object(cutout, object, canvas, canvas, 0.0);
  return !r.alpha.empty() && cv::countNonZero(r.alpha) > 0;
}

}  // namespace

int CutoutBank::max_dimension() const {
  int m = 0;
  for (const auto* pool : {&real, &fake}) {
    for (const auto& c : *pool) m = std::max({m, c.width(), c.height()});
  }
  return m;
}

std::vector<Cutout> extract_cutouts(const Frame& frame, const Mask& mask, const std::string& source_id) {
  if (frame.pixels.size() != mask.pixels.size()) throw Error("shape_mismatch", "frame and mask sizes differ");
  std::vector<Cutout> out;
  if (mask.count() == 0) return out;
  cv::Mat labels, stats, centroids;
  const int n = cv::connectedComponentsWithStats(mask.pixels, labels, stats, centroids, 8, CV_32S);
  for (int k = 1; k < n; ++k) {
    const cv::Rect box(stats.at<int>(k, cv::CC_STAT_LEFT), stats.at<int>(k, cv::CC_STAT_TOP),
                       stats.at<int>(k, cv::CC_STAT_WIDTH), stats.at<int>(k, cv::CC_STAT_HEIGHT));
    Cutout c;
    c.kind = CutoutKind::real;
    c.source_id = source_id.empty() ? "component" + std::to_string(k) : source_id + "#" + std::to_string(k);
    c.color = frame.pixels(box).clone();
    cv::Mat component = labels(box) == k;
    c.alpha = component / 255;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Cutout> extract_fake_cutouts(const Frame& frame, const Mask& real_mask, const std::vector<Cutout>& shapes,
                                         std::uint64_t seed, Warnings* warnings, int max_trials) {
  if (frame.pixels.size() != real_mask.pixels.size()) throw Error("shape_mismatch", "frame and mask sizes differ");
  Rng rng(seed);
  std::vector<Cutout> out;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const Cutout& shape = shapes[i];
    bool placed = false;
    if (shape.width() < frame.width() && shape.height() < frame.height()) {
      for (int trial = 0; trial < max_trials && !placed; ++trial) {
        const int x = static_cast<int>(rng.uniform_int(0, frame.width() - shape.width()));
        const int y = static_cast<int>(rng.uniform_int(0, frame.height() - shape.height()));
        const cv::Rect roi(x, y, shape.width(), shape.height());
        cv::Mat overlap = real_mask.pixels(roi) & shape.alpha;
        if (cv::countNonZero(overlap) != 0) continue;
        Cutout fake;
        fake.kind = CutoutKind::fake;
        fake.source_id = shape.source_id + "/fake";
        fake.color = frame.pixels(roi).clone();
        fake.alpha = shape.alpha.clone();
        out.push_back(std::move(fake));
        placed = true;
      }
    }
    if (!placed && warnings) {
      warnings->push_back({"fake_placement_failed",
                           "no placement for shape " + std::to_string(i) + " ('" + shape.source_id + "') after " +
                               std::to_string(max_trials) + " trials"});
    }
  }
  return out;
}

void save_bank(const fs::path& dir, const CutoutBank& bank) {
  fs::create_directories(dir);
  json index;
  for (const auto& [name, pool] : {std::pair{"real", &bank.real}, std::pair{"fake", &bank.fake}}) {
    index[name] = json::array();
    for (std::size_t i = 0; i < pool->size(); ++i) {
      const Cutout& c = (*pool)[i];
      const std::string file = std::string(name) + "_" + std::to_string(i) + ".png";
      cv::Mat rgb8, bgr8, alpha8, bgra;
      c.color.convertTo(rgb8, CV_8UC3, 255.0);
      cv::cvtColor(rgb8, bgr8, cv::COLOR_RGB2BGR);
      alpha8 = c.alpha * 255;
      std::vector<cv::Mat> channels;
      cv::split(bgr8, channels);
      channels.push_back(alpha8);
      cv::merge(channels, bgra);
      if (!cv::imwrite((dir / file).string(), bgra)) throw Error("io_error", "cannot write " + file);
      index[name].push_back({{"file", file}, {"source_id", c.source_id}});
    }
  }
  std::ofstream out(dir / "bank.json");
  out << index.dump(2) << '\n';
}

CutoutBank load_bank(const fs::path& dir) {
  std::ifstream in(dir / "bank.json");
  if (!in) throw Error("io_error", "cannot open " + (dir / "bank.json").string());
  json index;
  in >> index;
  CutoutBank bank;
  for (const auto& [name, kind] : {std::pair{"real", CutoutKind::real}, std::pair{"fake", CutoutKind::fake}}) {
    auto& pool = kind == CutoutKind::real ? bank.real : bank.fake;
    for (const auto& entry : index.value(name, json::array())) {
      const fs::path file = dir / entry.at("file").get<std::string>();
      cv::Mat bgra = cv::imread(file.string(), cv::IMREAD_UNCHANGED);
      if (bgra.empty() || bgra.channels() != 4) throw Error("io_error", "cannot read RGBA cutout " + file.string());
      std::vector<cv::Mat> ch;
      cv::split(bgra, ch);
      cv::Mat bgr, rgb;
      cv::merge(std::vector<cv::Mat>{ch[0], ch[1], ch[2]}, bgr);
      cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
      Cutout c;
      c.kind = kind;
      c.source_id = entry.value("source_id", std::string());
      rgb.convertTo(c.color, CV_32FC3, 1.0 / 255.0);
      cv::threshold(ch[3], c.alpha, 127, 1, cv::THRESH_BINARY);
      pool.push_back(std::move(c));
    }
  }
  return bank;
}

void SynthConfig::validate() const {
  if (clip_length < 2) throw Error("invalid_config", "clip_length must be >= 2");
  if (canvas <= 0) throw Error("invalid_config", "canvas must be positive");
  if (n_real.min < 0 || n_fake.min < 0) throw Error("invalid_config", "object counts must be non-negative");
  check_range("n_real", n_real.min, n_real.max);
  check_range("n_fake", n_fake.min, n_fake.max);
  check_range("speed", speed.min, speed.max);
  check_range("angular_rate", angular_rate.min, angular_rate.max);
  check_range("scale", scale.min, scale.max);
  check_range("global_amplitude", global_amplitude.min, global_amplitude.max);
  check_range("global_period", global_period.min, global_period.max);
  if (scale.min < 0.5 || scale.max > 1.5) throw Error("invalid_config", "scale must lie within [0.5, 1.5]");
  if (global_period.min <= 0) throw Error("invalid_config", "global_period must be positive");
  if (direction_jitter_deg < 0 || color_jitter < 0) throw Error("invalid_config", "jitter must be non-negative");
}

SynthConfig SynthConfig::for_canvas(int canvas) {
  SynthConfig c;
  c.canvas = canvas;
  const double area = (static_cast<double>(canvas) / 1024.0) * (static_cast<double>(canvas) / 1024.0);
  auto scaled = [area](IntRange r) {
    IntRange out{static_cast<int>(std::lround(r.min * area)), static_cast<int>(std::lround(r.max * area))};
    out.max = std::max(out.max, 1);
    return out;
  };
  c.n_real = scaled(c.n_real);
  c.n_fake = scaled(c.n_fake);
  return c;
}

cv::Point2d SceneState::global_displacement() const { return global_velocity * std::cos(global_phase); }

const Cutout& cutout_for(const CutoutBank& bank, const ObjectState& object) {
  const auto& pool = object.kind == CutoutKind::real ? bank.real : bank.fake;
  if (object.cutout_index >= pool.size()) throw Error("out_of_range", "object references a missing cutout");
  return pool[object.cutout_index];
}

SceneState init_scene(const SynthConfig& config, const CutoutBank& bank, std::uint64_t seed) {
  config.validate();
  if (config.n_real.max > 0 && bank.real.empty()) throw Error("empty_bank", "real cutout bank is empty");
  if (config.n_fake.max > 0 && bank.fake.empty()) throw Error("empty_bank", "fake cutout bank is empty");
  if (config.canvas <= bank.max_dimension()) {
    throw Error("invalid_config", "canvas must exceed the largest cutout dimension");
  }
  SceneState s{.objects = {}, .global_velocity = {}, .rng = Rng(seed)};
  Rng& rng = s.rng;
  const int n_fake = static_cast<int>(rng.uniform_int(config.n_fake.min, config.n_fake.max));
  const int n_real = static_cast<int>(rng.uniform_int(config.n_real.min, config.n_real.max));
  for (int i = 0; i < n_fake; ++i) s.objects.push_back(sample_object(CutoutKind::fake, config, bank, rng));
  for (int i = 0; i < n_real; ++i) s.objects.push_back(sample_object(CutoutKind::real, config, bank, rng));
  const double amplitude =
      draw(rng, config.global_amplitude);
  const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  s.global_velocity = {amplitude * std::cos(heading), amplitude * std::sin(heading)};
  const double period = draw(rng, config.global_period);
  s.global_phase_rate = 2.0 * std::numbers::pi / period;
  s.global_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return s;
}

SceneState step_scene(const SceneState& state, const SynthConfig& config, const CutoutBank& bank) {
  SceneState next = state;
  Rng& rng = next.rng;
  const cv::Point2d sway = state.global_displacement();
  for (auto& o : next.objects) {
    o.position += o.velocity + sway;
    o.orientation_deg += o.angular_rate_deg;
    if (config.direction_jitter_deg > 0.0) {
      const double d = rng.normal(0.0, config.direction_jitter_deg) * kDegToRad;
      const double c = std::cos(d), s = std::sin(d);
      o.velocity = {c * o.velocity.x - s * o.velocity.y, s * o.velocity.x + c * o.velocity.y};
    }
  }
  next.global_phase += next.global_phase_rate;
  next.frame_index += 1;

  // Objects that left the canvas are dropped from their slot and a new real
  // object is appended on top, so fakes stay below reals.
  std::vector<ObjectState> kept;
  std::size_t respawns = 0;
  kept.reserve(next.objects.size());
  for (const auto& o : next.objects) {
    if (visible(cutout_for(bank, o), o, config.canvas)) {
      kept.push_back(o);
    } else {
      ++respawns;
    }
  }
  if (respawns > 0) {
    if (bank.real.empty()) throw Error("empty_bank", "respawn needs real cutouts");
    for (std::size_t i = 0; i < respawns; ++i) kept.push_back(sample_object(CutoutKind::real, config, bank, rng));
    next.objects = std::move(kept);
  }
  return next;
}

cv::Rect2d object_bounds(const Cutout& cutout, const ObjectState& object) {
  const cv::Matx23d m = object_transform(cutout, object);
  const double w = cutout.width(), h = cutout.height();
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (const cv::Vec3d& q : {cv::Vec3d(-0.5, -0.5, 1), cv::Vec3d(w - 0.5, -0.5, 1), cv::Vec3d(-0.5, h - 0.5, 1),
                            cv::Vec3d(w - 0.5, h - 0.5, 1)}) {
    const cv::Vec2d p = m * q;
    x0 = std::min(x0, p[0]);
    y0 = std::min(y0, p[1]);
    x1 = std::max(x1, p[0]);
    y1 = std::max(y1, p[1]);
  }
  return {x0, y0, x1 - x0, y1 - y0};
}

RenderedObject render_object(const Cutout& cutout, const ObjectState& object, int canvas_height, int canvas_width,
                             double color_jitter) {
  RenderedObject r;
  r.kind = object.kind;
  const cv::Rect2d b = object_bounds(cutout, object);
  const int x0 = std::max(0, static_cast<int>(std::floor(b.x)));
  const int y0 = std::max(0, static_cast<int>(std::floor(b.y)));
  const int x1 = std::min(canvas_width, static_cast<int>(std::ceil(b.x + b.width)) + 1);
  const int y1 = std::min(canvas_height, static_cast<int>(std::ceil(b.y + b.height)) + 1);
  if (x1 <= x0 || y1 <= y0) {
    r.roi = cv::Rect(0, 0, 0, 0);
    return r;
  }
  r.roi = cv::Rect(x0, y0, x1 - x0, y1 - y0);

  cv::Matx23d m = object_transform(cutout, object);
  m(0, 2) -= x0;
  m(1, 2) -= y0;
  const cv::Mat affine(m);

  cv::warpAffine(cutout.alpha, r.alpha, affine, r.roi.size(), cv::INTER_NEAREST, cv::BORDER_CONSTANT, 0);
  cv::threshold(r.alpha, r.alpha, 0, 1, cv::THRESH_BINARY);  // nearest keeps {0,1}; re-binarize anyway

  cv::Mat color = cutout.color;
  if (color_jitter > 0.0) {
    Rng rng(object.color_jitter_seed);
    const double brightness = 1.0 + rng.uniform(-color_jitter, color_jitter);
    const double hue = rng.uniform(-color_jitter, color_jitter) * 2.0 * std::numbers::pi;
    cv::Mat adjusted, clamped;
    cv::transform(cutout.color, adjusted, hue_rotation(hue) * static_cast<float>(brightness));
    cv::min(cv::max(adjusted, 0.0), 1.0, clamped);
    color = clamped;
  }
  cv::warpAffine(color, r.color, affine, r.roi.size(), cv::INTER_LINEAR, cv::BORDER_REPLICATE);
  return r;
}

CompositeResult composite(const Frame& background, const SceneState& state, const CutoutBank& bank,
                          double color_jitter) {
  CompositeResult out{background.clone(), Mask::zeros(background.height(), background.width())};
  for (const auto& o : state.objects) {
    const RenderedObject r = render_object(cutout_for(bank, o), o, background.height(), background.width(),
                                           color_jitter);
    if (r.roi.area() == 0) continue;
    r.color.copyTo(out.frame.pixels(r.roi), r.alpha);
    if (o.kind == CutoutKind::real) {
      cv::Mat dst = out.mask.pixels(r.roi);
      cv::bitwise_or(dst, r.alpha, dst);
    }
  }
  return out;
}

SynthClip synthesize_clip(const std::vector<Frame>& backgrounds, const CutoutBank& bank, const SynthConfig& config,
                          std::uint64_t seed) {
  config.validate();
  if (static_cast<int>(backgrounds.size()) != config.clip_length) {
    throw Error("invalid_argument", "expected " + std::to_string(config.clip_length) + " background frames, got " +
                                        std::to_string(backgrounds.size()));
  }
  for (const auto& b : backgrounds) {
    if (b.height() != config.canvas || b.width() != config.canvas) {
      throw Error("shape_mismatch", "background frames must be canvas x canvas");
    }
  }
  SynthClip clip;
  SceneState state = init_scene(config, bank, seed);
  for (int i = 0; i < config.clip_length; ++i) {
    if (i > 0) state = step_scene(state, config, bank);
    CompositeResult frame = composite(backgrounds[static_cast<std::size_t>(i)], state, bank, config.color_jitter);
    clip.frames.push_back(std::move(frame.frame));
    clip.masks.push_back(std::move(frame.mask));
  }
  return clip;
}

std::vector<std::vector<Frame>> extract_background_windows(const ClipSource& clip, int tau_clip, int canvas,
                                                           int n_windows, std::uint64_t seed) {
  if (tau_clip < 1 || n_windows < 0) throw Error("invalid_argument", "tau_clip must be positive");
  if (static_cast<int>(clip.size()) < tau_clip) {
    throw Error("clip_too_short", "background clip '" + clip.id() + "' has " + std::to_string(clip.size()) +
                                      " frames; need " + std::to_string(tau_clip));
  }
  const Frame first = clip.frame(0);
  if (first.height() < canvas || first.width() < canvas) {
    throw Error("frame_too_small", "background frame " + std::to_string(first.height()) + "x" +
                                       std::to_string(first.width()) + " smaller than canvas " +
                                       std::to_string(canvas));
  }
  Rng rng(seed);
  std::vector<std::vector<Frame>> out;
  for (int w = 0; w < n_windows; ++w) {
    const auto start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(clip.size()) - tau_clip));
    const int x = static_cast<int>(rng.uniform_int(0, first.width() - canvas));
    const int y = static_cast<int>(rng.uniform_int(0, first.height() - canvas));
    const cv::Rect roi(x, y, canvas, canvas);
    std::vector<Frame> window;
    window.reserve(static_cast<std::size_t>(tau_clip));
    for (int t = 0; t < tau_clip; ++t) {
      const Frame f = clip.frame(start + static_cast<std::size_t>(t));
      if (f.height() < canvas || f.width() < canvas) throw Error("frame_too_small", "background frame too small");
      window.push_back(Frame(f.pixels(roi).clone()));
    }
    out.push_back(std::move(window));
  }
  return out;
}

}  // namespace dvos::synth

namespace dvos::synth {

CutoutBank build_bank(const std::vector<std::shared_ptr<const ClipSource>>& annotated, std::uint64_t seed,
                      Warnings* warnings) {
  CutoutBank bank;
  std::uint64_t frame_counter = 0;
  for (const auto& clip : annotated) {
    if (!clip->has_masks()) continue;
    for (std::size_t i = 0; i < clip->size(); ++i) {
      const Frame frame = clip->frame(i);
      const Mask mask = clip->mask(i);
      const std::string source = clip->id() + "/" + frame_filename(i);
      auto real = extract_cutouts(frame, mask, source);
      auto fake = extract_fake_cutouts(frame, mask, real, mix_seed(seed, frame_counter++), warnings);
      bank.real.insert(bank.real.end(), real.begin(), real.end());
      bank.fake.insert(bank.fake.end(), fake.begin(), fake.end());
    }
  }
  if (bank.real.empty()) throw Error("empty_bank", "no labelled objects found for the cutout bank");
  return bank;
}

IndexedClip synthesize_indexed_clip(const std::vector<std::shared_ptr<const ClipSource>>& backgrounds,
                                    const CutoutBank& bank, const SynthConfig& config, std::size_t index,
                                    std::uint64_t seed) {
  if (backgrounds.empty()) throw Error("invalid_argument", "no background clips");
  Rng rng(mix_seed(seed, index));
  const auto& bg = backgrounds[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(backgrounds.size()) - 1))];
  auto windows = extract_background_windows(*bg, config.clip_length, config.canvas, 1, rng.next_u64());
  IndexedClip out;
  char id[32];
  std::snprintf(id, sizeof(id), "synth_%05zu", index);
  out.clip_id = id;
  out.source_group = bg->id();
  out.clip = synthesize_clip(windows.front(), bank, config, rng.next_u64());
  return out;
}

DatasetManifest synthesize_dataset(const std::vector<std::shared_ptr<const ClipSource>>& backgrounds,
                                   const CutoutBank& bank, const SynthConfig& config, std::size_t n_clips,
                                   std::uint64_t seed, const std::filesystem::path& out_root) {
  config.validate();
  DatasetManifest manifest;
  manifest.root = std::filesystem::absolute(out_root);
  for (std::size_t k = 0; k < n_clips; ++k) {
    IndexedClip c = synthesize_indexed_clip(backgrounds, bank, config, k, seed);
    manifest.clips.push_back(
        write_clip(manifest.root, c.clip_id, c.clip.frames, c.clip.masks, c.source_group, LabelKind::synthetic));
  }
  save_manifest(manifest.root / "manifest.json", manifest);
  return manifest;
}

}  // namespace dvos::synth
