#include <opencv2/imgproc.hpp>

#include "dvos/synth.hpp"
#include "support.hpp"
#include "unit.hpp"

using namespace dvos;
using namespace dvos::synth;

namespace {

Cutout square_cutout(int size, cv::Vec3f color, CutoutKind kind = CutoutKind::real) {
  Cutout c;
  c.color = cv::Mat(size, size, CV_32FC3, cv::Scalar(color[0], color[1], color[2]));
  c.alpha = cv::Mat::ones(size, size, CV_8UC1);
  c.kind = kind;
  return c;
}

// Motionless scene with every random range collapsed.
SynthConfig still_config(int canvas) {
  SynthConfig c = SynthConfig::for_canvas(canvas);
  c.clip_length = 2;
  c.speed = {0.0, 0.0};
  c.angular_rate = {0.0, 0.0};
  c.scale = {1.0, 1.0};
  c.global_amplitude = {0.0, 0.0};
  c.direction_jitter_deg = 0.0;
  c.color_jitter = 0.0;
  return c;
}

ObjectState placed(CutoutKind kind, std::size_t index, cv::Point2d position) {
  ObjectState o;
  o.kind = kind;
  o.cutout_index = index;
  o.position = position;
  return o;
}

cv::Point2d mask_centroid(const Mask& m) {
  const cv::Moments mo = cv::moments(m.pixels, true);
  return {mo.m10 / mo.m00, mo.m01 / mo.m00};
}

// Pixel (x, y) stores (x, y, 0) / 255 so a copied patch reveals its origin.
Frame coordinate_frame(int h, int w) {
  cv::Mat m(h, w, CV_32FC3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m.at<cv::Vec3f>(y, x) = cv::Vec3f(x / 255.f, y / 255.f, 0.f);
  }
  return Frame(m);
}

}  // namespace

TEST_CASE("extract_cutouts splits 8-connected components") {
  const Frame frame = testing::random_frame(40, 40, 3);
  cv::Mat m = cv::Mat::zeros(40, 40, CV_8UC1);
  m(cv::Rect(2, 2, 10, 10)).setTo(1);
  cv::circle(m, {28, 28}, 6, cv::Scalar(1), cv::FILLED);
  m.at<std::uint8_t>(20, 5) = 1;
  m.at<std::uint8_t>(21, 6) = 1;  // diagonal neighbour, same component
  const auto cuts = extract_cutouts(frame, Mask(m), "f");
  REQUIRE(cuts.size() == 3);
  long long total = 0;
  for (const auto& c : cuts) {
    total += c.area();
    CHECK(c.kind == CutoutKind::real);
    CHECK(c.color.size() == c.alpha.size());
  }
  CHECK(total == cv::countNonZero(m));

  const auto& sq = cuts[0];
  CHECK(sq.width() == 10);
  CHECK(sq.height() == 10);
  CHECK(sq.area() == 100);
  CHECK(cv::norm(sq.color, frame.pixels(cv::Rect(2, 2, 10, 10)), cv::NORM_INF) == 0.0);
  CHECK(cuts[1].area() == 2);
  CHECK(extract_cutouts(frame, Mask::zeros(40, 40)).empty());
  CHECK_THROWS_AS(extract_cutouts(frame, Mask::zeros(10, 40)), Error);
}

TEST_CASE("fake cutouts reuse shapes away from real objects") {
  const Frame frame = coordinate_frame(64, 64);
  cv::Mat real = cv::Mat::zeros(64, 64, CV_8UC1);
  real(cv::Rect(0, 0, 32, 64)).setTo(1);
  std::vector<Cutout> shapes;
  for (int i = 0; i < 5; ++i) shapes.push_back(square_cutout(6 + i, {1, 1, 1}));
  Warnings w;
  const auto fakes = extract_fake_cutouts(frame, Mask(real), shapes, 11, &w);
  CHECK(w.empty());
  REQUIRE(fakes.size() == 5);
  for (std::size_t i = 0; i < fakes.size(); ++i) {
    CHECK(fakes[i].kind == CutoutKind::fake);
    CHECK(cv::norm(fakes[i].alpha, shapes[i].alpha, cv::NORM_INF) == 0.0);
    const cv::Vec3f origin = fakes[i].color.at<cv::Vec3f>(0, 0);
    const int x = static_cast<int>(std::lround(origin[0] * 255));
    CHECK(x >= 32);  // entirely in the unlabelled right half
  }
}

TEST_CASE("fake placement on an empty mask keeps the alpha") {
  const Frame frame = testing::random_frame(30, 30, 1);
  Cutout blob;
  blob.alpha = cv::Mat::zeros(7, 9, CV_8UC1);
  cv::ellipse(blob.alpha, {4, 3}, {4, 3}, 0, 0, 360, cv::Scalar(1), cv::FILLED);
  blob.color = cv::Mat::zeros(7, 9, CV_32FC3);
  const auto fakes = extract_fake_cutouts(frame, Mask::zeros(30, 30), {blob}, 3);
  REQUIRE(fakes.size() == 1);
  CHECK(cv::norm(fakes[0].alpha, blob.alpha, cv::NORM_INF) == 0.0);
}

TEST_CASE("oversized fake shape is skipped with a warning") {
  const Frame frame = testing::random_frame(20, 20, 1);
  Warnings w;
  const auto fakes = extract_fake_cutouts(frame, Mask::zeros(20, 20), {square_cutout(25, {0, 0, 0})}, 0, &w);
  CHECK(fakes.empty());
  REQUIRE(w.size() == 1);
  CHECK(w[0].code == "fake_placement_failed");

  cv::Mat full = cv::Mat::ones(20, 20, CV_8UC1);
  Warnings w2;
  CHECK(extract_fake_cutouts(frame, Mask(full), {square_cutout(4, {0, 0, 0})}, 0, &w2, 10).empty());
  CHECK(w2.size() == 1);
}

TEST_CASE("config validation and canvas scaling") {
  SynthConfig c;
  CHECK_NOTHROW(c.validate());
  c.scale = {0.4, 1.0};
  CHECK_THROWS_AS(c.validate(), Error);
  c = SynthConfig{};
  c.clip_length = 1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = SynthConfig{};
  c.n_real = {5, 4};
  CHECK_THROWS_AS(c.validate(), Error);
  c = SynthConfig{};
  c.global_period = {0.0, 10.0};
  CHECK_THROWS_AS(c.validate(), Error);

  const SynthConfig full = SynthConfig::for_canvas(1024);
  CHECK(full.n_real.min == 60);
  CHECK(full.n_real.max == 140);
  const SynthConfig half = SynthConfig::for_canvas(512);
  CHECK(half.n_real.min == 15);
  CHECK(half.n_real.max == 35);
  CHECK(half.n_fake.min == 5);
  CHECK(half.n_fake.max == 15);
  CHECK(SynthConfig::for_canvas(64).n_fake.max >= 1);
}

TEST_CASE("init_scene puts fakes first and honours degenerate counts") {
  CutoutBank bank;
  bank.real.push_back(square_cutout(5, {1, 0, 0}));
  bank.fake.push_back(square_cutout(5, {0, 1, 0}, CutoutKind::fake));
  SynthConfig c = still_config(32);
  c.n_real = {3, 3};
  c.n_fake = {2, 2};
  const SceneState s = init_scene(c, bank, 1);
  REQUIRE(s.objects.size() == 5);
  CHECK(s.objects[0].kind == CutoutKind::fake);
  CHECK(s.objects[1].kind == CutoutKind::fake);
  for (std::size_t i = 2; i < 5; ++i) CHECK(s.objects[i].kind == CutoutKind::real);

  c.n_real = {0, 0};
  c.n_fake = {0, 0};
  CHECK(init_scene(c, bank, 1).objects.empty());

  CutoutBank no_fakes;
  no_fakes.real = bank.real;
  c.n_fake = {1, 2};
  CHECK_THROWS_AS(init_scene(c, no_fakes, 0), Error);

  CutoutBank huge;
  huge.real.push_back(square_cutout(40, {1, 1, 1}));
  c.n_fake = {0, 0};
  c.n_real = {1, 1};
  CHECK_THROWS_AS(init_scene(c, huge, 0), Error);
}

TEST_CASE("init_scene is deterministic in the seed") {
  CutoutBank bank;
  bank.real.push_back(square_cutout(5, {1, 0, 0}));
  bank.fake.push_back(square_cutout(5, {0, 1, 0}, CutoutKind::fake));
  SynthConfig c = SynthConfig::for_canvas(64);
  c.n_real = {2, 6};
  const SceneState a = init_scene(c, bank, 77);
  const SceneState b = init_scene(c, bank, 77);
  REQUIRE(a.objects.size() == b.objects.size());
  for (std::size_t i = 0; i < a.objects.size(); ++i) CHECK(a.objects[i].position == b.objects[i].position);
}

TEST_CASE("step_scene without motion leaves objects in place") {
  CutoutBank bank;
  bank.real.push_back(square_cutout(6, {1, 0, 0}));
  SynthConfig c = still_config(48);
  c.n_real = {4, 4};
  c.n_fake = {0, 0};
  SceneState s = init_scene(c, bank, 5);
  for (auto& o : s.objects) o.position = {24.0, 24.0};
  const SceneState next = step_scene(s, c, bank);
  REQUIRE(next.objects.size() == 4);
  for (std::size_t i = 0; i < next.objects.size(); ++i) {
    CHECK(next.objects[i].position == cv::Point2d(24.0, 24.0));
    CHECK(next.objects[i].orientation_deg == s.objects[i].orientation_deg);
  }
  CHECK(next.frame_index == 1);
}

TEST_CASE("step_scene moves objects by their velocity") {
  CutoutBank bank;
  bank.real.push_back(square_cutout(4, {1, 0, 0}));
  SynthConfig c = still_config(64);
  c.n_fake = {0, 0};
  SceneState s;
  s.objects.push_back(placed(CutoutKind::real, 0, {10.0, 20.0}));
  s.objects[0].velocity = {3.0, 0.0};
  SceneState t = s;
  for (int k = 0; k < 5; ++k) t = step_scene(t, c, bank);
  CHECK(t.objects[0].position.x == doctest::Approx(25.0));
  CHECK(t.objects[0].position.y == doctest::Approx(20.0));

  // Frame-level sway adds the same displacement to every object.
  SceneState g = s;
  g.objects.push_back(placed(CutoutKind::real, 0, {40.0, 40.0}));
  g.global_velocity = {0.0, 2.0};
  g.global_phase = 0.0;
  const SceneState g1 = step_scene(g, c, bank);
  CHECK(g1.objects[0].position.y == doctest::Approx(22.0));
  CHECK(g1.objects[1].position.y == doctest::Approx(42.0));
}

TEST_CASE("objects leaving the canvas respawn as reals on top") {
  CutoutBank bank;
  bank.real.push_back(square_cutout(4, {1, 0, 0}));
  bank.fake.push_back(square_cutout(4, {0, 1, 0}, CutoutKind::fake));
  SynthConfig c = still_config(32);
  SceneState s;
  s.objects.push_back(placed(CutoutKind::fake, 0, {-50.0, 10.0}));
  s.objects.push_back(placed(CutoutKind::real, 0, {16.0, 16.0}));
  s.objects.push_back(placed(CutoutKind::real, 0, {16.0, 90.0}));
  const SceneState next = step_scene(s, c, bank);
  REQUIRE(next.objects.size() == 3);
  CHECK(next.objects[0].position == cv::Point2d(16.0, 16.0));
  CHECK(next.objects[1].kind == CutoutKind::real);
  CHECK(next.objects[2].kind == CutoutKind::real);
  for (const auto& o : next.objects) {
    CHECK(o.position.x >= 0.0);
    CHECK(o.position.x < 32.0);
    CHECK(o.position.y >= 0.0);
    CHECK(o.position.y < 32.0);
  }
}

TEST_CASE("composite draws a square exactly and masks reals only") {
  CutoutBank bank;
  bank.real.push_back(square_cutout(10, {1.f, 0.f, 0.f}));
  bank.fake.push_back(square_cutout(10, {0.f, 0.f, 1.f}, CutoutKind::fake));
  const Frame bg = testing::random_frame(40, 40, 9);

  SceneState s;
  // Centre at pixel 20.5 covers columns and rows 16..25.
  s.objects.push_back(placed(CutoutKind::real, 0, {20.5, 20.5}));
  const CompositeResult r = composite(bg, s, bank, 0.0);
  CHECK(r.mask.count() == 100);
  CHECK(cv::countNonZero(r.mask.pixels(cv::Rect(16, 16, 10, 10))) == 100);
  CHECK(r.frame.pixels.at<cv::Vec3f>(16, 16) == cv::Vec3f(1.f, 0.f, 0.f));
  CHECK(r.frame.pixels.at<cv::Vec3f>(25, 25) == cv::Vec3f(1.f, 0.f, 0.f));
  cv::Mat outside;
  cv::bitwise_not(r.mask.pixels * 255, outside);
  cv::Mat diff;
  cv::absdiff(r.frame.pixels, bg.pixels, diff);
  CHECK(cv::norm(diff, cv::NORM_INF, outside) == 0.0);

  SceneState fakes_only;
  fakes_only.objects.push_back(placed(CutoutKind::fake, 0, {10.5, 10.5}));
  fakes_only.objects.push_back(placed(CutoutKind::fake, 0, {30.5, 30.5}));
  const CompositeResult f = composite(bg, fakes_only, bank, 0.0);
  CHECK(f.mask.count() == 0);
  CHECK(f.frame.pixels.at<cv::Vec3f>(10, 10) == cv::Vec3f(0.f, 0.f, 1.f));

  // A real drawn above a fake wins the overlapping pixels.
  SceneState both;
  both.objects.push_back(placed(CutoutKind::fake, 0, {20.5, 20.5}));
  both.objects.push_back(placed(CutoutKind::real, 0, {24.5, 20.5}));
  const CompositeResult b = composite(bg, both, bank, 0.0);
  CHECK(b.frame.pixels.at<cv::Vec3f>(20, 22) == cv::Vec3f(1.f, 0.f, 0.f));
  CHECK(b.frame.pixels.at<cv::Vec3f>(20, 17) == cv::Vec3f(0.f, 0.f, 1.f));
  CHECK(b.mask.count() == 100);
}

TEST_CASE("composite mask centroid follows the object") {
  CutoutBank bank;
  Cutout disc;
  disc.alpha = cv::Mat::zeros(11, 11, CV_8UC1);
  cv::circle(disc.alpha, {5, 5}, 5, cv::Scalar(1), cv::FILLED);
  disc.color = cv::Mat(11, 11, CV_32FC3, cv::Scalar(0.2, 0.8, 0.3));
  bank.real.push_back(disc);
  const Frame bg = testing::solid_frame(48, 48, 0.f);
  SceneState s;
  s.objects.push_back(placed(CutoutKind::real, 0, {15.0, 20.0}));
  const cv::Point2d c0 = mask_centroid(composite(bg, s, bank, 0.0).mask);
  s.objects[0].position += cv::Point2d(3.0, -2.0);
  const cv::Point2d c1 = mask_centroid(composite(bg, s, bank, 0.0).mask);
  CHECK(c1.x - c0.x == doctest::Approx(3.0));
  CHECK(c1.y - c0.y == doctest::Approx(-2.0));
}

TEST_CASE("colour jitter is deterministic per object and bounded") {
  CutoutBank bank;
  bank.real.push_back(square_cutout(6, {0.9f, 0.5f, 0.1f}));
  ObjectState o = placed(CutoutKind::real, 0, {10.5, 10.5});
  o.color_jitter_seed = 1234;
  const RenderedObject a = render_object(bank.real[0], o, 20, 20, 0.1);
  const RenderedObject b = render_object(bank.real[0], o, 20, 20, 0.1);
  CHECK(cv::norm(a.color, b.color, cv::NORM_INF) == 0.0);
  double lo = 0, hi = 0;
  cv::minMaxLoc(a.color.reshape(1), &lo, &hi);
  CHECK(lo >= 0.0);
  CHECK(hi <= 1.0);
  // The bank cutout itself is never modified.
  CHECK(bank.real[0].color.at<cv::Vec3f>(0, 0) == cv::Vec3f(0.9f, 0.5f, 0.1f));
}

TEST_CASE("two-frame clip without motion repeats itself") {
  CutoutBank bank;
  bank.real.push_back(square_cutout(5, {1, 1, 0}));
  bank.fake.push_back(square_cutout(5, {0, 1, 1}, CutoutKind::fake));
  SynthConfig c = still_config(32);
  c.color_jitter = 0.1;
  c.n_real = {3, 3};
  c.n_fake = {1, 1};
  const Frame bg = testing::random_frame(32, 32, 4);
  const SynthClip clip = synthesize_clip({bg, bg}, bank, c, 8);
  REQUIRE(clip.frames.size() == 2);
  CHECK(cv::norm(clip.frames[0].pixels, clip.frames[1].pixels, cv::NORM_INF) == 0.0);
  CHECK(cv::norm(clip.masks[0].pixels, clip.masks[1].pixels, cv::NORM_INF) == 0.0);

  CHECK_THROWS_AS(synthesize_clip({bg}, bank, c, 8), Error);
  CHECK_THROWS_AS(synthesize_clip({bg, testing::random_frame(31, 32, 1)}, bank, c, 8), Error);
}

TEST_CASE("bank survives a save and load") {
  testing::TempDir dir("bank");
  CutoutBank bank;
  bank.real.push_back(square_cutout(4, {0.2f, 0.4f, 0.6f}));
  Cutout odd;
  odd.alpha = cv::Mat::zeros(5, 3, CV_8UC1);
  odd.alpha.at<std::uint8_t>(2, 1) = 1;
  odd.alpha.at<std::uint8_t>(4, 2) = 1;
  odd.color = testing::random_frame(5, 3, 2).pixels;
  odd.kind = CutoutKind::fake;
  bank.fake.push_back(odd);
  save_bank(dir.path(), bank);
  const CutoutBank back = load_bank(dir.path());
  REQUIRE(back.real.size() == 1);
  REQUIRE(back.fake.size() == 1);
  CHECK(back.fake[0].kind == CutoutKind::fake);
  CHECK(cv::norm(back.fake[0].alpha, odd.alpha, cv::NORM_INF) == 0.0);
  cv::Mat a = back.fake[0].color, b = odd.color;
  CHECK(cv::norm(a, b, cv::NORM_INF, odd.alpha) <= 0.5 / 255.0 + 1e-6);
  CHECK_THROWS_AS(load_bank(dir.path() / "missing"), Error);
}

TEST_CASE("background windows") {
  auto clip = testing::indexed_clip("bg", 10, 20, false);
  const auto a = extract_background_windows(*clip, 4, 16, 3, 21);
  const auto b = extract_background_windows(*clip, 4, 16, 3, 21);
  REQUIRE(a.size() == 3);
  for (std::size_t w = 0; w < a.size(); ++w) {
    REQUIRE(a[w].size() == 4);
    const float first = a[w][0].pixels.at<cv::Vec3f>(0, 0)[0];
    for (std::size_t t = 0; t < 4; ++t) {
      CHECK(a[w][t].height() == 16);
      CHECK(a[w][t].pixels.at<cv::Vec3f>(0, 0)[0] == doctest::Approx(first + t / 255.0));
      CHECK(cv::norm(a[w][t].pixels, b[w][t].pixels, cv::NORM_INF) == 0.0);
    }
  }
  CHECK_THROWS_AS(extract_background_windows(*clip, 11, 16, 1, 0), Error);
  CHECK_THROWS_AS(extract_background_windows(*clip, 4, 21, 1, 0), Error);
}

TEST_CASE("synthetic dataset is written with provenance groups") {
  testing::TempDir dir("synthds");
  std::vector<std::shared_ptr<const ClipSource>> annotated;
  {
    std::vector<Frame> frames{testing::random_frame(24, 24, 1)};
    cv::Mat m = cv::Mat::zeros(24, 24, CV_8UC1);
    cv::circle(m, {6, 6}, 3, cv::Scalar(1), cv::FILLED);
    cv::circle(m, {16, 16}, 2, cv::Scalar(1), cv::FILLED);
    annotated.push_back(std::make_shared<MemoryClip>("ann", frames, std::vector<Mask>{Mask(m)}));
  }
  const CutoutBank bank = build_bank(annotated, 3);
  CHECK(bank.real.size() == 2);
  CHECK(bank.fake.size() <= 2);

  std::vector<std::shared_ptr<const ClipSource>> backgrounds{testing::indexed_clip("bgA", 8, 40, false),
                                                             testing::indexed_clip("bgB", 8, 40, false)};
  SynthConfig c = SynthConfig::for_canvas(32);
  c.clip_length = 5;
  c.n_real = {1, 3};
  c.n_fake = {0, 1};
  const DatasetManifest m = synthesize_dataset(backgrounds, bank, c, 4, 9, dir.path() / "out");
  REQUIRE(m.clips.size() == 4);
  CHECK(m.clips[0].clip_id == "synth_00000");
  for (const auto& clip : m.clips) {
    CHECK(clip.label_kind == LabelKind::synthetic);
    CHECK(clip.frame_paths.size() == 5);
    CHECK(clip.mask_paths.size() == 5);
    CHECK((clip.source_group == "bgA" || clip.source_group == "bgB"));
  }
  CHECK(std::filesystem::exists(dir.path() / "out" / "manifest.json"));

  const IndexedClip again = synthesize_indexed_clip(backgrounds, bank, c, 2, 9);
  CHECK(again.clip_id == "synth_00002");
  CHECK(again.source_group == m.clips[2].source_group);

  CHECK_THROWS_AS(build_bank({testing::indexed_clip("nolabels", 3, 8, false)}, 0), Error);
}
