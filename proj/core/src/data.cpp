#include "dvos/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <opencv2/imgproc.hpp>

#include "json.hpp"

namespace dvos {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(LabelKind kind) {
  switch (kind) {
    case LabelKind::manual: return "manual";
    case LabelKind::weak: return "weak";
    case LabelKind::synthetic: return "synthetic";
    case LabelKind::none: return "none";
  }
  return "none";
}

LabelKind label_kind_from_string(const std::string& text) {
  if (text == "manual") return LabelKind::manual;
  if (text == "weak") return LabelKind::weak;
  if (text == "synthetic") return LabelKind::synthetic;
  if (text == "none") return LabelKind::none;
  throw Error("invalid_manifest", "unknown label_kind '" + text + "'");
}

void ClipManifest::validate() const {
  if (clip_id.empty()) throw Error("invalid_manifest", "clip_id must not be empty");
  if (!mask_paths.empty() && mask_paths.size() != frame_paths.size()) {
    throw Error("invalid_manifest", "clip '" + clip_id + "': mask count " + std::to_string(mask_paths.size()) +
                                        " differs from frame count " + std::to_string(frame_paths.size()));
  }
}

void DatasetManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& c : clips) {
    c.validate();
    if (!seen.insert(c.clip_id).second) throw Error("invalid_manifest", "duplicate clip_id '" + c.clip_id + "'");
  }
}

const ClipManifest& DatasetManifest::clip(const std::string& clip_id) const {
  for (const auto& c : clips) {
    if (c.clip_id == clip_id) return c;
  }
  throw Error("not_found", "no clip '" + clip_id + "'");
}

namespace {

json clip_to_json(const ClipManifest& c) {
  return json{{"clip_id", c.clip_id},
              {"frame_paths", c.frame_paths},
              {"mask_paths", c.mask_paths},
              {"source_group", c.source_group},
              {"label_kind", to_string(c.label_kind)}};
}

ClipManifest clip_from_json(const json& j) {
  ClipManifest c;
  c.clip_id = j.at("clip_id").get<std::string>();
  c.frame_paths = j.at("frame_paths").get<std::vector<std::string>>();
  if (j.contains("mask_paths") && !j["mask_paths"].is_null()) {
    c.mask_paths = j["mask_paths"].get<std::vector<std::string>>();
  }
  c.source_group = j.value("source_group", c.clip_id);
  c.label_kind = label_kind_from_string(j.value("label_kind", std::string("none")));
  return c;
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open manifest: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("invalid_manifest", path.string() + ": " + e.what());
  }
  DatasetManifest m;
  fs::path base = fs::absolute(path).parent_path();
  m.root = (base / j.value("root", std::string("."))).lexically_normal();
  if (!m.root.has_filename()) m.root = m.root.parent_path();
  try {
    for (const auto& c : j.at("clips")) m.clips.push_back(clip_from_json(c));
  } catch (const json::exception& e) {
    throw Error("invalid_manifest", path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

void save_manifest(const fs::path& path, const DatasetManifest& manifest) {
  manifest.validate();
  fs::path abs_path = fs::absolute(path);
  fs::create_directories(abs_path.parent_path());
  fs::path root = manifest.root.empty() ? abs_path.parent_path() : fs::absolute(manifest.root);
  fs::path rel = root.lexically_relative(abs_path.parent_path());
  json j;
  j["root"] = rel.empty() ? root.string() : rel.string();
  j["clips"] = json::array();
  for (const auto& c : manifest.clips) j["clips"].push_back(clip_to_json(c));
  std::ofstream out(abs_path);
  if (!out) throw Error("io_error", "cannot write manifest: " + path.string());
  out << j.dump(2) << '\n';
}

std::string frame_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06zu.png", index);
  return buf;
}

ClipManifest write_clip(const fs::path& root, const std::string& clip_id, const std::vector<Frame>& frames,
                        const std::vector<Mask>& masks, const std::string& source_group, LabelKind kind) {
  if (!masks.empty() && masks.size() != frames.size()) {
    throw Error("invalid_argument", "write_clip: mask count differs from frame count");
  }
  ClipManifest c;
  c.clip_id = clip_id;
  c.source_group = source_group;
  c.label_kind = kind;
  const fs::path clip_dir = fs::path("clips") / clip_id;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    fs::path rel = clip_dir / "frames" / frame_filename(i);
    save_frame(root / rel, frames[i]);
    c.frame_paths.push_back(rel.generic_string());
  }
  for (std::size_t i = 0; i < masks.size(); ++i) {
    fs::path rel = clip_dir / "masks" / frame_filename(i);
    save_mask(root / rel, masks[i]);
    c.mask_paths.push_back(rel.generic_string());
  }
  return c;
}

DiskClip::DiskClip(ClipManifest clip, fs::path root) : clip_(std::move(clip)), root_(std::move(root)) {
  clip_.validate();
}

Frame DiskClip::frame(std::size_t index) const { return load_frame(root_ / clip_.frame_paths.at(index)); }

Mask DiskClip::mask(std::size_t index) const {
  if (!has_masks()) throw Error("unlabeled", "clip '" + clip_.clip_id + "' has no masks");
  return load_mask(root_ / clip_.mask_paths.at(index));
}

MemoryClip::MemoryClip(std::string id, std::vector<Frame> frames, std::vector<Mask> masks)
    : id_(std::move(id)), frames_(std::move(frames)), masks_(std::move(masks)) {
  if (!masks_.empty() && masks_.size() != frames_.size()) {
    throw Error("invalid_argument", "MemoryClip: mask count differs from frame count");
  }
}

Frame MemoryClip::frame(std::size_t index) const { return frames_.at(index).clone(); }

Mask MemoryClip::mask(std::size_t index) const {
  if (masks_.empty()) throw Error("unlabeled", "clip '" + id_ + "' has no masks");
  return masks_.at(index).clone();
}

void Sample::validate() const {
  if (references.empty()) throw Error("invalid_sample", "sample needs at least one reference frame");
  const cv::Size size = query_frame.empty() ? references.front().pixels.size() : query_frame.pixels.size();
  for (const auto& r : references) {
    if (r.pixels.size() != size) throw Error("shape_mismatch", "reference frame sizes differ");
  }
  if (query_mask && query_frame.empty()) throw Error("invalid_sample", "query mask without query frame");
  if (query_mask && query_mask->pixels.size() != size) {
    throw Error("shape_mismatch", "query mask size differs from query frame");
  }
}

std::vector<std::size_t> window_query_indices(std::size_t clip_length, std::size_t tau, std::size_t stride) {
  if (tau == 0) throw Error("invalid_argument", "tau must be positive");
  if (stride == 0) throw Error("invalid_argument", "stride must be positive");
  std::vector<std::size_t> out;
  for (std::size_t t = tau; t < clip_length; t += stride) out.push_back(t);
  return out;
}

Sample make_sample(const ClipSource& clip, std::size_t query_index, std::size_t tau) {
  if (query_index < tau || query_index >= clip.size()) {
    throw Error("out_of_range", "query index " + std::to_string(query_index) + " invalid for tau " +
                                    std::to_string(tau) + " in clip of length " + std::to_string(clip.size()));
  }
  Sample s;
  s.video_id = clip.id();
  s.query_index = query_index;
  s.references.reserve(tau);
  for (std::size_t r = query_index - tau; r < query_index; ++r) s.references.push_back(clip.frame(r));
  s.query_frame = clip.frame(query_index);
  if (clip.has_masks()) s.query_mask = clip.mask(query_index);
  s.validate();
  return s;
}

SampleSequence window_samples(std::shared_ptr<const ClipSource> clip, std::size_t tau, std::size_t stride,
                              Warnings* warnings) {
  auto indices = window_query_indices(clip->size(), tau, stride);
  if (indices.empty() && warnings) {
    warnings->push_back({"clip_too_short", "clip '" + clip->id() + "' has " + std::to_string(clip->size()) +
                                               " frames; need at least " + std::to_string(tau + 1)});
  }
  return SampleSequence(std::move(clip), tau, std::move(indices));
}

SplitResult group_split(const std::vector<ClipManifest>& manifests, const std::array<double, 3>& fractions,
                        std::uint64_t seed) {
  for (double f : fractions) {
    if (!(f > 0.0)) throw Error("invalid_argument", "split fractions must be positive");
  }
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-6) throw Error("invalid_argument", "split fractions must sum to 1");

  std::map<std::string, std::vector<std::size_t>> by_group;
  for (std::size_t i = 0; i < manifests.size(); ++i) by_group[manifests[i].source_group].push_back(i);
  if (by_group.size() < 3) {
    throw Error("too_few_groups", "group split needs at least 3 distinct source groups, got " +
                                      std::to_string(by_group.size()) + " (short by " +
                                      std::to_string(3 - by_group.size()) + ")");
  }

  std::vector<std::string> groups;
  for (const auto& [g, _] : by_group) groups.push_back(g);
  Rng rng(seed);
  std::shuffle(groups.begin(), groups.end(), rng.engine());

  const double n = static_cast<double>(manifests.size());
  std::array<double, 3> counts{0, 0, 0};
  std::array<std::vector<std::string>, 3> assigned;
  auto assign = [&](std::size_t part, const std::string& g) {
    assigned[part].push_back(g);
    counts[part] += static_cast<double>(by_group[g].size());
  };
  // Every partition gets one group first, then each group goes to the
  // partition furthest below its target share.
  for (std::size_t p = 0; p < 3; ++p) assign(p, groups[p]);
  for (std::size_t k = 3; k < groups.size(); ++k) {
    std::size_t best = 0;
    double best_deficit = -1e300;
    for (std::size_t p = 0; p < 3; ++p) {
      double deficit = fractions[p] * n - counts[p];
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = p;
      }
    }
    assign(best, groups[k]);
  }

  SplitResult out;
  std::array<std::vector<ClipManifest>*, 3> parts{&out.train, &out.valid, &out.test};
  for (std::size_t p = 0; p < 3; ++p) {
    for (const auto& g : assigned[p]) {
      for (std::size_t idx : by_group[g]) parts[p]->push_back(manifests[idx]);
    }
  }
  return out;
}

cv::Rect center_crop_rect(int height, int width, int crop) {
  if (crop <= 0 || crop > height || crop > width) {
    throw Error("invalid_argument", "crop " + std::to_string(crop) + " does not fit in " + std::to_string(height) +
                                        "x" + std::to_string(width));
  }
  return {(width - crop) / 2, (height - crop) / 2, crop, crop};
}

Frame resize_then_center_crop(const Frame& frame, int target_height, int crop) {
  if (frame.empty()) throw Error("invalid_argument", "empty frame");
  if (crop <= 0 || target_height < crop) {
    throw Error("invalid_argument", "need 0 < crop <= target_height");
  }
  const int scaled_width = static_cast<int>(
      std::lround(static_cast<double>(frame.width()) * target_height / static_cast<double>(frame.height())));
  if (scaled_width < crop) {
    throw Error("invalid_argument", "scaled width " + std::to_string(scaled_width) + " smaller than crop " +
                                        std::to_string(crop));
  }
  cv::Mat scaled;
  if (scaled_width == frame.width() && target_height == frame.height()) {
    scaled = frame.pixels;
  } else {
    cv::resize(frame.pixels, scaled, cv::Size(scaled_width, target_height), 0, 0, cv::INTER_LINEAR);
  }
  return Frame(scaled(center_crop_rect(target_height, scaled_width, crop)).clone());
}

SampleDataset::SampleDataset(const DatasetManifest& manifest, std::size_t tau, std::size_t stride,
                             Warnings* warnings)
    : tau_(tau) {
  for (const auto& c : manifest.clips) clips_.push_back(std::make_shared<DiskClip>(c, manifest.root));
  build(stride, warnings);
}

SampleDataset::SampleDataset(std::vector<std::shared_ptr<const ClipSource>> clips, std::size_t tau,
                             std::size_t stride, Warnings* warnings)
    : clips_(std::move(clips)), tau_(tau) {
  build(stride, warnings);
}

void SampleDataset::build(std::size_t stride, Warnings* warnings) {
  for (std::size_t c = 0; c < clips_.size(); ++c) {
    auto seq = window_samples(clips_[c], tau_, stride, warnings);
    for (std::size_t q : seq.query_indices()) entries_.push_back({c, q, clips_[c]->id()});
  }
}

bool SampleDataset::labeled() const {
  return std::all_of(clips_.begin(), clips_.end(), [](const auto& c) { return c->has_masks(); });
}

Sample SampleDataset::get(std::size_t index) const {
  const Entry& e = entries_.at(index);
  return make_sample(*clips_[e.clip], e.query_index, tau_);
}

const std::string& SampleDataset::video_id(std::size_t index) const { return entries_.at(index).video_id; }

std::vector<std::shared_ptr<const ClipSource>> load_clips_into_memory(const DatasetManifest& manifest) {
  std::vector<std::shared_ptr<const ClipSource>> out;
  out.reserve(manifest.clips.size());
  for (const auto& c : manifest.clips) {
    DiskClip disk(c, manifest.root);
    std::vector<Frame> frames;
    std::vector<Mask> masks;
    for (std::size_t i = 0; i < disk.size(); ++i) {
      frames.push_back(disk.frame(i));
      if (disk.has_masks()) masks.push_back(disk.mask(i));
    }
    out.push_back(std::make_shared<MemoryClip>(c.clip_id, std::move(frames), std::move(masks)));
  }
  return out;
}

}  // namespace dvos
