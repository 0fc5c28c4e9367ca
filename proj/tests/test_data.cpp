#include <set>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "dvos/batch.hpp"
#include "dvos/data.hpp"
#include "support.hpp"
#include "unit.hpp"

using namespace dvos;

TEST_CASE("window indices cover [tau, T-1]") {
  auto idx = window_query_indices(60, 4, 1);
  REQUIRE(idx.size() == 56);
  CHECK(idx.front() == 4);
  CHECK(idx.back() == 59);
  CHECK(window_query_indices(5, 4, 1) == std::vector<std::size_t>{4});
  CHECK(window_query_indices(4, 4, 1).empty());
}

TEST_CASE("window count law") {
  for (std::size_t T = 1; T < 40; ++T) {
    for (std::size_t tau = 1; tau < 6; ++tau) {
      for (std::size_t stride = 1; stride < 5; ++stride) {
        const auto n = window_query_indices(T, tau, stride).size();
        const std::size_t expected = T >= tau + 1 ? (T - tau - 1) / stride + 1 : 0;
        CHECK(n == expected);
      }
    }
  }
}

TEST_CASE("window_samples yields ordered references and masks") {
  auto clip = testing::indexed_clip("c", 10);
  Warnings w;
  auto seq = window_samples(clip, 4, 2, &w);
  CHECK(w.empty());
  REQUIRE(seq.size() == 3);
  std::size_t expected_query = 4;
  for (const Sample& s : seq) {
    CHECK(s.query_index == expected_query);
    REQUIRE(s.tau() == 4);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(s.references[k].pixels.at<cv::Vec3f>(0, 0)[0] ==
            doctest::Approx((expected_query - 4 + k) / 255.0));
    }
    CHECK(s.query_frame.pixels.at<cv::Vec3f>(0, 0)[0] == doctest::Approx(expected_query / 255.0));
    REQUIRE(s.query_mask.has_value());
    CHECK(s.query_mask->count() == static_cast<long long>(1 + expected_query % 8));
    expected_query += 2;
  }
}

TEST_CASE("short clip gives an empty sequence and a warning") {
  Warnings w;
  auto seq = window_samples(testing::indexed_clip("short", 4), 4, 1, &w);
  CHECK(seq.empty());
  REQUIRE(w.size() == 1);
  CHECK(w.front().code == "clip_too_short");
}

TEST_CASE("unlabelled clip gives samples without masks") {
  auto seq = window_samples(testing::indexed_clip("u", 6, 8, false), 4, 1);
  REQUIRE(seq.size() == 2);
  CHECK_FALSE(seq.at(0).query_mask.has_value());
}

namespace {

std::vector<ClipManifest> clips_in_groups(const std::vector<int>& group_of_clip) {
  std::vector<ClipManifest> out;
  for (std::size_t i = 0; i < group_of_clip.size(); ++i) {
    ClipManifest c;
    c.clip_id = "clip" + std::to_string(i);
    c.frame_paths = {"f.png"};
    c.source_group = "g" + std::to_string(group_of_clip[i]);
    out.push_back(c);
  }
  return out;
}

std::set<std::string> groups(const std::vector<ClipManifest>& clips) {
  std::set<std::string> s;
  for (const auto& c : clips) s.insert(c.source_group);
  return s;
}

}  // namespace

TEST_CASE("group split reproduces the 8/4/5 shape") {
  std::vector<int> g(17);
  for (int i = 0; i < 17; ++i) g[i] = i;
  const auto clips = clips_in_groups(g);
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 12345ULL}) {
    const auto s = group_split(clips, {8.0 / 17, 4.0 / 17, 5.0 / 17}, seed);
    CHECK(s.train.size() == 8);
    CHECK(s.valid.size() == 4);
    CHECK(s.test.size() == 5);
  }
}

TEST_CASE("group split keeps groups whole and is deterministic") {
  std::vector<int> g;
  for (int i = 0; i < 40; ++i) g.push_back((i * 7) % 9);
  const auto clips = clips_in_groups(g);
  const auto a = group_split(clips, {0.6, 0.2, 0.2}, 9);
  const auto b = group_split(clips, {0.6, 0.2, 0.2}, 9);
  CHECK(a.train.size() + a.valid.size() + a.test.size() == clips.size());
  const auto gt = groups(a.train), gv = groups(a.valid), gs = groups(a.test);
  for (const auto& x : gt) {
    CHECK_FALSE(gv.count(x));
    CHECK_FALSE(gs.count(x));
  }
  for (const auto& x : gv) CHECK_FALSE(gs.count(x));
  auto ids = [](const std::vector<ClipManifest>& v) {
    std::vector<std::string> out;
    for (const auto& c : v) out.push_back(c.clip_id);
    return out;
  };
  CHECK(ids(a.train) == ids(b.train));
  CHECK(ids(a.valid) == ids(b.valid));
  CHECK(ids(a.test) == ids(b.test));
}

TEST_CASE("group split rejects too few groups") {
  const auto one = clips_in_groups({0, 0, 0, 0});
  CHECK_THROWS_AS(group_split(one, {0.6, 0.2, 0.2}, 0), Error);
  try {
    group_split(clips_in_groups({0, 1, 1}), {0.6, 0.2, 0.2}, 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == "too_few_groups");
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  CHECK_THROWS_AS(group_split(clips_in_groups({0, 1, 2}), {0.5, 0.5, 0.0}, 0), Error);
}

TEST_CASE("resize_then_center_crop shapes") {
  const Frame big = testing::solid_frame(2160, 3840, 0.5f);
  const Frame out = resize_then_center_crop(big, 1024, 1024);
  CHECK(out.height() == 1024);
  CHECK(out.width() == 1024);
  // 3840 * 1024 / 2160 = 1820.44 -> 1820; the 796 px margin splits 398/398.
  CHECK(center_crop_rect(1024, 1820, 1024) == cv::Rect(398, 0, 1024, 1024));

  const Frame same = testing::random_frame(64, 64, 3);
  const Frame id = resize_then_center_crop(same, 64, 64);
  CHECK(cv::norm(id.pixels, same.pixels, cv::NORM_INF) == 0.0);

  CHECK_THROWS_AS(resize_then_center_crop(testing::solid_frame(100, 50, 0.f), 100, 80), Error);
}

TEST_CASE("resize_then_center_crop 2x downscale matches a reference resize") {
  const Frame f = testing::random_frame(512, 512, 7);
  const Frame out = resize_then_center_crop(f, 256, 256);
  cv::Mat ref;
  cv::resize(f.pixels, ref, cv::Size(256, 256), 0, 0, cv::INTER_LINEAR);
  CHECK(cv::norm(out.pixels, ref, cv::NORM_INF) < 1e-6);
  // Bilinear 2x at half-pixel centres is the 2x2 box mean.
  const auto& p = f.pixels;
  const cv::Vec3f box = (p.at<cv::Vec3f>(20, 30) + p.at<cv::Vec3f>(20, 31) + p.at<cv::Vec3f>(21, 30) +
                         p.at<cv::Vec3f>(21, 31)) * 0.25f;
  CHECK(out.pixels.at<cv::Vec3f>(10, 15)[1] == doctest::Approx(box[1]).epsilon(1e-5));
}

TEST_CASE("center crop ties go to the top-left") {
  CHECK(center_crop_rect(11, 11, 10) == cv::Rect(0, 0, 10, 10));
  CHECK(center_crop_rect(13, 12, 10) == cv::Rect(1, 1, 10, 10));
  CHECK_THROWS_AS(center_crop_rect(8, 8, 10), Error);
}

TEST_CASE("frame and mask round trip through PNG") {
  testing::TempDir dir("png");
  const Frame f = testing::random_frame(17, 23, 1);
  save_frame(dir.path() / "f.png", f);
  const Frame g = load_frame(dir.path() / "f.png");
  CHECK(g.height() == 17);
  CHECK(g.width() == 23);
  CHECK(cv::norm(f.pixels, g.pixels, cv::NORM_INF) <= 0.5 / 255.0 + 1e-6);

  cv::Mat m = cv::Mat::zeros(9, 5, CV_8UC1);
  m.at<std::uint8_t>(3, 2) = 1;
  m.at<std::uint8_t>(8, 4) = 1;
  save_mask(dir.path() / "m.png", Mask(m));
  const Mask back = load_mask(dir.path() / "m.png");
  CHECK(cv::countNonZero(back.pixels != m) == 0);
}

TEST_CASE("mask binarization threshold on load") {
  testing::TempDir dir("binarize");
  cv::Mat raw(1, 3, CV_8UC1);
  raw.at<std::uint8_t>(0, 0) = 127;
  raw.at<std::uint8_t>(0, 1) = 128;
  raw.at<std::uint8_t>(0, 2) = 255;
  cv::imwrite((dir.path() / "m.png").string(), raw);
  const Mask m = load_mask(dir.path() / "m.png");
  CHECK(m.pixels.at<std::uint8_t>(0, 0) == 0);
  CHECK(m.pixels.at<std::uint8_t>(0, 1) == 1);
  CHECK(m.pixels.at<std::uint8_t>(0, 2) == 1);
}

TEST_CASE("manifest round trip and disk clips") {
  testing::TempDir dir("manifest");
  std::vector<Frame> frames;
  std::vector<Mask> masks;
  for (int i = 0; i < 6; ++i) {
    frames.push_back(testing::random_frame(12, 12, i));
    masks.push_back(Mask::zeros(12, 12));
  }
  DatasetManifest m;
  m.root = dir.path() / "data";
  m.clips.push_back(write_clip(m.root, "a", frames, masks, "ga", LabelKind::weak));
  m.clips.push_back(write_clip(m.root, "b", frames, {}, "gb", LabelKind::none));
  CHECK(m.clips[0].frame_paths[2] == "clips/a/frames/frame_000002.png");
  CHECK(m.clips[0].mask_paths[5] == "clips/a/masks/frame_000005.png");
  save_manifest(dir.path() / "data" / "manifest.json", m);

  const DatasetManifest back = load_manifest(dir.path() / "data" / "manifest.json");
  REQUIRE(back.clips.size() == 2);
  CHECK(back.root == m.root);
  CHECK(back.clips[0].label_kind == LabelKind::weak);
  CHECK(back.clips[1].label_kind == LabelKind::none);
  CHECK(back.clips[0].source_group == "ga");
  CHECK(back.clips[0].frame_paths == m.clips[0].frame_paths);

  const SampleDataset ds(back, 4, 1);
  CHECK(ds.size() == 4);
  CHECK_FALSE(ds.labeled());
  const Sample s = ds.get(0);
  CHECK(s.video_id == "a");
  CHECK(cv::norm(s.query_frame.pixels, frames[4].pixels, cv::NORM_INF) <= 0.5 / 255.0 + 1e-6);
}

TEST_CASE("manifest validation") {
  ClipManifest c;
  c.clip_id = "x";
  c.frame_paths = {"a.png", "b.png"};
  c.mask_paths = {"a.png"};
  CHECK_THROWS_AS(c.validate(), Error);
  DatasetManifest m;
  ClipManifest ok;
  ok.clip_id = "dup";
  ok.frame_paths = {"a.png"};
  m.clips = {ok, ok};
  CHECK_THROWS_AS(m.validate(), Error);
  CHECK_THROWS_AS(label_kind_from_string("bogus"), Error);
  for (auto k : {LabelKind::manual, LabelKind::weak, LabelKind::synthetic, LabelKind::none}) {
    CHECK(label_kind_from_string(to_string(k)) == k);
  }
}

TEST_CASE("collate stacks samples") {
  auto clip = testing::indexed_clip("c", 8);
  std::vector<Sample> samples{make_sample(*clip, 4, 4), make_sample(*clip, 6, 4)};
  const Batch b = collate(samples);
  CHECK(b.references.sizes() == torch::IntArrayRef({2, 4, 3, 8, 8}));
  CHECK(b.query.sizes() == torch::IntArrayRef({2, 3, 8, 8}));
  CHECK(b.mask.sizes() == torch::IntArrayRef({2, 1, 8, 8}));
  CHECK(b.references[1][3][0][0][0].item<float>() == doctest::Approx(5.0 / 255.0));
  CHECK(b.query_indices == std::vector<std::size_t>{4, 6});

  std::vector<Sample> mixed{make_sample(*clip, 4, 4), make_sample(*clip, 5, 3)};
  CHECK_THROWS_AS(collate(mixed), Error);
}

TEST_CASE("sample validation") {
  Sample s;
  CHECK_THROWS_AS(s.validate(), Error);
  s.references = {testing::solid_frame(4, 4, 0.f), testing::solid_frame(4, 5, 0.f)};
  CHECK_THROWS_AS(s.validate(), Error);
  s.references = {testing::solid_frame(4, 4, 0.f)};
  s.query_frame = testing::solid_frame(4, 4, 0.f);
  s.query_mask = Mask::zeros(3, 4);
  CHECK_THROWS_AS(s.validate(), Error);
}
