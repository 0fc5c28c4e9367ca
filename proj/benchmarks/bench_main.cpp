#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include <opencv2/imgproc.hpp>

#include "dvos/diffusion.hpp"
#include "dvos/losses.hpp"
#include "dvos/model.hpp"
#include "dvos/synth.hpp"
#include "dvos/toy_assets.hpp"

namespace {

dvos::synth::CutoutBank ellipse_bank(int n) {
  dvos::synth::CutoutBank bank;
  cv::RNG rng(1);
  for (int i = 0; i < n; ++i) {
    dvos::synth::Cutout c;
    const int w = 12 + rng.uniform(0, 10), h = 20 + rng.uniform(0, 12);
    c.alpha = cv::Mat::zeros(h, w, CV_8UC1);
    cv::ellipse(c.alpha, {w / 2, h / 2}, {w / 2 - 1, h / 2 - 1}, 0, 0, 360, cv::Scalar(1), cv::FILLED);
    c.color = cv::Mat(h, w, CV_32FC3, cv::Scalar(0.8, 0.7, 0.2));
    bank.real.push_back(c);
    c.kind = dvos::synth::CutoutKind::fake;
    bank.fake.push_back(c);
  }
  return bank;
}

void BM_Composite(benchmark::State& state) {
  const int canvas = static_cast<int>(state.range(0));
  const auto bank = ellipse_bank(32);
  const auto cfg = dvos::synth::SynthConfig::for_canvas(canvas);
  const auto scene = dvos::synth::init_scene(cfg, bank, 3);
  const dvos::Frame bg(cv::Mat(canvas, canvas, CV_32FC3, cv::Scalar::all(0.3)));
  for (auto _ : state) {
    auto out = dvos::synth::composite(bg, scene, bank, cfg.color_jitter);
    benchmark::DoNotOptimize(out.mask.pixels.data);
  }
  state.counters["objects"] = static_cast<double>(scene.objects.size());
}
BENCHMARK(BM_Composite)->Arg(256)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_StepScene(benchmark::State& state) {
  const auto bank = ellipse_bank(32);
  const auto cfg = dvos::synth::SynthConfig::for_canvas(1024);
  auto scene = dvos::synth::init_scene(cfg, bank, 4);
  for (auto _ : state) {
    scene = dvos::synth::step_scene(scene, cfg, bank);
    benchmark::DoNotOptimize(scene.objects.data());
  }
}
BENCHMARK(BM_StepScene)->Unit(benchmark::kMillisecond);

void BM_ForwardEval(benchmark::State& state) {
  torch::NoGradGuard guard;
  torch::manual_seed(0);
  dvos::model::NetworkConfig c;
  c.input_size = static_cast<int>(state.range(0));
  dvos::model::DvosNet net(c);
  net->eval();
  auto refs = torch::rand({1, c.tau, 3, c.input_size, c.input_size});
  for (auto _ : state) {
    auto out = net->forward(refs, dvos::model::Mode::eval);
    benchmark::DoNotOptimize(out.seg_logits.data_ptr());
  }
}
BENCHMARK(BM_ForwardEval)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Losses(benchmark::State& state) {
  auto pred = torch::rand({4, 3, 256, 256});
  auto target = torch::rand({4, 3, 256, 256});
  auto logits = torch::randn({4, 1, 256, 256});
  auto mask = (torch::rand({4, 1, 256, 256}) > 0.7).to(torch::kFloat32);
  for (auto _ : state) {
    auto r = dvos::train::recon_loss(pred, target);
    auto s = dvos::train::seg_loss(logits, mask);
    benchmark::DoNotOptimize((r.mse + r.ssim + s.bce + s.dice).item<float>());
  }
}
BENCHMARK(BM_Losses)->Unit(benchmark::kMillisecond);

void BM_PatchDiffusion(benchmark::State& state) {
  const auto schedule = dvos::diffusion::make_schedule(1000, 1e-4, 0.02);
  auto refs = torch::rand({8, 4, 3, 256, 256});
  dvos::Rng rng(0);
  for (auto _ : state) {
    auto out = dvos::diffusion::patch_diffuse_batch(refs, 0.5, schedule, rng);
    benchmark::DoNotOptimize(out.frames.data_ptr());
  }
}
BENCHMARK(BM_PatchDiffusion)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
