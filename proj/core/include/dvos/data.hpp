#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dvos/common.hpp"
#include "dvos/image.hpp"

namespace dvos {

enum class LabelKind { manual, weak, synthetic, none };

std::string to_string(LabelKind kind);
LabelKind label_kind_from_string(const std::string& text);

/// One clip as listed in a dataset manifest. Paths are relative to the
/// dataset root.
struct ClipManifest {
  std::string clip_id;
  std::vector<std::string> frame_paths;
  std::vector<std::string> mask_paths;  // empty or one per frame
  std::string source_group;
  LabelKind label_kind = LabelKind::none;

  bool has_masks() const { return !mask_paths.empty(); }
  void validate() const;
};

struct DatasetManifest {
  std::filesystem::path root;  // absolute once loaded
  std::vector<ClipManifest> clips;

  void validate() const;
  const ClipManifest& clip(const std::string& clip_id) const;
};

/// Reads a manifest JSON; `root` inside the file is resolved against the
/// manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
/// Writes `root` relative to the manifest's directory when possible.
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// `frame_%06d.png`
std::string frame_filename(std::size_t index);

/// Writes frames (and masks, when given) under `root/clips/<clip_id>/` and
/// returns the manifest entry.
ClipManifest write_clip(const std::filesystem::path& root, const std::string& clip_id,
                        const std::vector<Frame>& frames, const std::vector<Mask>& masks,
                        const std::string& source_group, LabelKind kind);

/// Random-access view of one clip's frames.
class ClipSource {
 public:
  virtual ~ClipSource() = default;
  virtual std::size_t size() const = 0;
  virtual bool has_masks() const = 0;
  virtual Frame frame(std::size_t index) const = 0;
  virtual Mask mask(std::size_t index) const = 0;
  virtual std::string id() const = 0;
};

class DiskClip final : public ClipSource {
 public:
  DiskClip(ClipManifest clip, std::filesystem::path root);

  std::size_t size() const override { return clip_.frame_paths.size(); }
  bool has_masks() const override { return clip_.has_masks(); }
  Frame frame(std::size_t index) const override;
  Mask mask(std::size_t index) const override;
  std::string id() const override { return clip_.clip_id; }

  const ClipManifest& manifest() const { return clip_; }

 private:
  ClipManifest clip_;
  std::filesystem::path root_;
};

class MemoryClip final : public ClipSource {
 public:
  MemoryClip(std::string id, std::vector<Frame> frames, std::vector<Mask> masks = {});

  std::size_t size() const override { return frames_.size(); }
  bool has_masks() const override { return !masks_.empty(); }
  Frame frame(std::size_t index) const override;
  Mask mask(std::size_t index) const override;
  std::string id() const override { return id_; }

 private:
  std::string id_;
  std::vector<Frame> frames_;
  std::vector<Mask> masks_;
};

/// tau reference frames (oldest first) plus the query frame that follows them.
struct Sample {
  std::vector<Frame> references;
  Frame query_frame;  // empty for reference-only inference
  std::optional<Mask> query_mask;
  std::string video_id;
  std::size_t query_index = 0;

  std::size_t tau() const { return references.size(); }
  void validate() const;
};

/// Query indices t in [tau, T-1] stepping by stride.
std::vector<std::size_t> window_query_indices(std::size_t clip_length, std::size_t tau, std::size_t stride);

Sample make_sample(const ClipSource& clip, std::size_t query_index, std::size_t tau);

/// Lazily windowed samples of one clip. Frames are read on dereference.
class SampleSequence {
 public:
  class iterator {
   public:
    using value_type = Sample;
    using difference_type = std::ptrdiff_t;

    iterator() = default;
    iterator(const SampleSequence* seq, std::size_t pos) : seq_(seq), pos_(pos) {}

    Sample operator*() const { return seq_->at(pos_); }
    iterator& operator++() {
      ++pos_;
      return *this;
    }
    iterator operator++(int) {
      iterator tmp = *this;
      ++pos_;
      return tmp;
    }
    bool operator==(const iterator& other) const { return pos_ == other.pos_; }

   private:
    const SampleSequence* seq_ = nullptr;
    std::size_t pos_ = 0;
  };

  SampleSequence(std::shared_ptr<const ClipSource> clip, std::size_t tau, std::vector<std::size_t> query_indices)
      : clip_(std::move(clip)), tau_(tau), indices_(std::move(query_indices)) {}

  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  const std::vector<std::size_t>& query_indices() const { return indices_; }
  Sample at(std::size_t i) const { return make_sample(*clip_, indices_.at(i), tau_); }

  iterator begin() const { return {this, 0}; }
  iterator end() const { return {this, indices_.size()}; }

 private:
  std::shared_ptr<const ClipSource> clip_;
  std::size_t tau_;
  std::vector<std::size_t> indices_;
};

/// Clips shorter than tau+1 yield an empty sequence and append a warning.
SampleSequence window_samples(std::shared_ptr<const ClipSource> clip, std::size_t tau, std::size_t stride,
                              Warnings* warnings = nullptr);

struct SplitResult {
  std::vector<ClipManifest> train;
  std::vector<ClipManifest> valid;
  std::vector<ClipManifest> test;
};

/// Group-wise split: all clips of a source_group land in one partition.
/// Partition sizes follow `fractions` by clip count; deterministic in seed.
SplitResult group_split(const std::vector<ClipManifest>& manifests, const std::array<double, 3>& fractions,
                        std::uint64_t seed);

/// Scales height to target_height (aspect preserved, width rounded to the
/// nearest integer) then takes a centered crop x crop window.
Frame resize_then_center_crop(const Frame& frame, int target_height, int crop);

/// Centered crop; when the margin is odd the extra pixel goes to the
/// bottom/right (window biased toward the top-left).
cv::Rect center_crop_rect(int height, int width, int crop);

/// Indexed samples over a whole dataset, optionally caching decoded frames.
class SampleDataset {
 public:
  SampleDataset(const DatasetManifest& manifest, std::size_t tau, std::size_t stride, Warnings* warnings = nullptr);
  SampleDataset(std::vector<std::shared_ptr<const ClipSource>> clips, std::size_t tau, std::size_t stride,
                Warnings* warnings = nullptr);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t tau() const { return tau_; }
  bool labeled() const;

  Sample get(std::size_t index) const;
  const std::string& video_id(std::size_t index) const;

 private:
  struct Entry {
    std::size_t clip;
    std::size_t query_index;
    std::string video_id;
  };

  void build(std::size_t stride, Warnings* warnings);

  std::vector<std::shared_ptr<const ClipSource>> clips_;
  std::vector<Entry> entries_;
  std::size_t tau_;
};

/// Loads every frame of every clip into memory (8-bit quantized exactly as
/// on disk) so repeated epochs skip decoding.
std::vector<std::shared_ptr<const ClipSource>> load_clips_into_memory(const DatasetManifest& manifest);

}  // namespace dvos
