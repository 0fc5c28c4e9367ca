// dvos: command-line front end for synthesis, splitting, training,
// evaluation and prediction.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dvos/checkpoint.hpp"
#include "dvos/config_io.hpp"
#include "dvos/data.hpp"
#include "dvos/evaluate.hpp"
#include "dvos/synth.hpp"
#include "dvos/toy_assets.hpp"
#include "dvos/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using ClipList = std::vector<std::shared_ptr<const dvos::ClipSource>>;

ClipList disk_clips(const dvos::DatasetManifest& manifest) {
  ClipList clips;
  for (const auto& c : manifest.clips) clips.push_back(std::make_shared<dvos::DiskClip>(c, manifest.root));
  return clips;
}

// 512 on a 1024 frame; proportionally smaller for smaller frames.
int default_eval_crop(const dvos::DatasetManifest& manifest) {
  if (manifest.clips.empty()) return 512;
  const dvos::Frame f = dvos::load_frame(manifest.root / manifest.clips.front().frame_paths.front());
  const int side = std::min(f.height(), f.width());
  return std::min(512, static_cast<int>(std::lround(side * 512.0 / 1024.0)));
}

void print_warnings(const dvos::Warnings& warnings) {
  for (const auto& w : warnings) {
    std::cerr << json{{"warning", {{"code", w.code}, {"message", w.message}}}}.dump() << '\n';
  }
}

struct MakeAssetsArgs {
  fs::path out;
  int size = 64;
  int backgrounds = 4;
  int frames = 24;
  int annotated = 8;
  int heads = 10;
  double head_minor = 0.0;
  double head_major = 0.0;
  std::uint64_t seed = 0;
};

int run_make_assets(const MakeAssetsArgs& a) {
  const double minor = a.head_minor > 0 ? a.head_minor : a.size * 0.03;
  const double major = a.head_major > 0 ? a.head_major : a.size * 0.06;

  dvos::DatasetManifest bg;
  bg.root = fs::absolute(a.out / "backgrounds");
  for (int i = 0; i < a.backgrounds; ++i) {
    const auto frames = dvos::toy::background_clip(a.frames, a.size, a.size, dvos::mix_seed(a.seed, 2 * i));
    const std::string id = "background_" + std::to_string(i);
    bg.clips.push_back(dvos::write_clip(bg.root, id, frames, {}, id, dvos::LabelKind::none));
  }
  dvos::save_manifest(bg.root / "manifest.json", bg);

  dvos::DatasetManifest ann;
  ann.root = fs::absolute(a.out / "annotated");
  for (int i = 0; i < a.annotated; ++i) {
    const auto f = dvos::toy::annotated_frame(a.size, a.size, a.heads, minor, major, dvos::mix_seed(a.seed, 2 * i + 1));
    const std::string id = "annotated_" + std::to_string(i);
    ann.clips.push_back(dvos::write_clip(ann.root, id, {f.frame}, {f.mask}, id, dvos::LabelKind::manual));
  }
  dvos::save_manifest(ann.root / "manifest.json", ann);
  std::cout << json{{"backgrounds", (bg.root / "manifest.json").string()},
                    {"annotated", (ann.root / "manifest.json").string()}}
                   .dump(2)
            << '\n';
  return 0;
}

int run_bank(const fs::path& dataset, const fs::path& out, std::uint64_t seed) {
  const auto manifest = dvos::load_manifest(dataset);
  dvos::Warnings warnings;
  const auto bank = dvos::synth::build_bank(disk_clips(manifest), seed, &warnings);
  dvos::synth::save_bank(out, bank);
  print_warnings(warnings);
  std::cout << json{{"bank", out.string()}, {"real", bank.real.size()}, {"fake", bank.fake.size()}}.dump(2) << '\n';
  return 0;
}

int run_synth(const fs::path& config_path, const fs::path& bank_dir, const fs::path& backgrounds, const fs::path& out,
              std::size_t clips, std::optional<std::uint64_t> seed) {
  auto config = dvos::synth_config_from_json(dvos::read_text_file(config_path));
  if (seed) config.seed = *seed;
  const auto bank = dvos::synth::load_bank(bank_dir);
  const auto bg = dvos::load_manifest(backgrounds);
  const auto manifest = dvos::synth::synthesize_dataset(disk_clips(bg), bank, config, clips, config.seed, out);
  std::cout << json{{"manifest", (manifest.root / "manifest.json").string()}, {"clips", manifest.clips.size()}}.dump(2)
            << '\n';
  return 0;
}

int run_split(const fs::path& dataset, const std::vector<double>& fractions, std::uint64_t seed, const fs::path& out) {
  if (fractions.size() != 3) throw dvos::Error("invalid_argument", "--fractions takes three values");
  const auto manifest = dvos::load_manifest(dataset);
  const auto split = dvos::group_split(manifest.clips, {fractions[0], fractions[1], fractions[2]}, seed);
  json summary;
  auto write = [&](const char* name, const std::vector<dvos::ClipManifest>& clips) {
    dvos::DatasetManifest part{manifest.root, clips};
    const fs::path path = out / (std::string(name) + ".json");
    dvos::save_manifest(path, part);
    summary[name] = {{"manifest", path.string()}, {"clips", clips.size()}};
  };
  fs::create_directories(out);
  write("train", split.train);
  write("valid", split.valid);
  write("test", split.test);
  std::cout << summary.dump(2) << '\n';
  return 0;
}

dvos::SampleDataset open_dataset(const fs::path& manifest_path, std::size_t tau, std::size_t stride, bool cache,
                                 dvos::Warnings* warnings) {
  const auto manifest = dvos::load_manifest(manifest_path);
  if (cache) return dvos::SampleDataset(dvos::load_clips_into_memory(manifest), tau, stride, warnings);
  return dvos::SampleDataset(manifest, tau, stride, warnings);
}

int run_train(int phase, const fs::path& config_path) {
  auto job = dvos::load_training_job(config_path);
  if (job.train_manifest.empty() || job.val_manifest.empty()) {
    throw dvos::Error("invalid_config", "data.train_manifest and data.val_manifest are required");
  }
  job.train.phase = static_cast<dvos::train::Phase>(phase);
  if (phase == 2) job.train.weight_decay = 0.0;

  dvos::Warnings warnings;
  const auto tau = static_cast<std::size_t>(job.network.tau);
  const auto train_set = open_dataset(job.train_manifest, tau, job.train.stride, job.cache_frames, &warnings);
  const auto val_set = open_dataset(job.val_manifest, tau, 1, job.cache_frames, &warnings);
  print_warnings(warnings);

  std::optional<fs::path> init;
  if (phase == 2) init = job.init_checkpoint.empty() ? job.out_dir / "phase1_best.ckpt" : job.init_checkpoint;
  else if (!job.init_checkpoint.empty()) init = job.init_checkpoint;

  const auto result = dvos::train::fit_phase(job.network, init, train_set, val_set, job.train, job.out_dir);
  json history = json::array();
  for (const auto& r : result.history) {
    history.push_back({{"epoch", r.epoch}, {"loss", r.stats.total}, {"val_dice", r.val_dice}, {"val_iou", r.val_iou}});
  }
  std::cout << json{{"phase", phase},
                    {"best_checkpoint", result.best_checkpoint.string()},
                    {"best_epoch", result.best_epoch},
                    {"best_val_dice", result.best_val_dice},
                    {"history", history}}
                   .dump(2)
            << '\n';
  return 0;
}

struct EvalArgs {
  fs::path ckpt;
  fs::path dataset;
  bool per_video = false;
  double threshold = 0.5;
  int eval_crop = 0;
  bool exclude_empty = false;
  std::size_t stride = 1;
  fs::path out;
};

int run_eval(const EvalArgs& a) {
  const auto loaded = dvos::model::load_checkpoint(a.ckpt);
  const auto manifest = dvos::load_manifest(a.dataset);
  dvos::Warnings warnings;
  const dvos::SampleDataset ds(manifest, static_cast<std::size_t>(loaded.config.tau), a.stride, &warnings);
  print_warnings(warnings);

  dvos::eval::EvalConfig cfg;
  cfg.eval_crop = a.eval_crop > 0 ? a.eval_crop : default_eval_crop(manifest);
  cfg.input_size = loaded.config.input_size;
  cfg.threshold = a.threshold;
  cfg.exclude_empty = a.exclude_empty;
  const auto result = dvos::eval::evaluate(dvos::eval::make_predictor(loaded.net), ds, cfg);

  json report{{"eval_crop", cfg.eval_crop}, {"dataset", json::parse(dvos::eval::to_json(result.dataset))}};
  std::string table = dvos::eval::to_text_table(result.dataset);
  if (a.per_video) {
    report["per_video"] = json::parse(dvos::eval::to_json(result.per_video));
    table += '\n' + dvos::eval::to_text_table(result.per_video);
  }
  std::cout << report.dump(2) << '\n';
  std::cerr << table;
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    std::ofstream(a.out / "report.json") << report.dump(2) << '\n';
    std::ofstream(a.out / "report.txt") << table;
  }
  return 0;
}

int run_predict(const fs::path& ckpt, const fs::path& sample_dir, const fs::path& out, double threshold,
                int eval_crop) {
  const auto loaded = dvos::model::load_checkpoint(ckpt);
  const auto sample = dvos::eval::load_sample_dir(sample_dir, static_cast<std::size_t>(loaded.config.tau));
  dvos::eval::EvalConfig cfg;
  const dvos::Frame& f = sample.references.front();
  cfg.eval_crop = eval_crop > 0 ? eval_crop
                                : std::min(512, static_cast<int>(std::lround(std::min(f.height(), f.width()) / 2.0)));
  cfg.input_size = loaded.config.input_size;
  cfg.threshold = threshold;
  const auto images = dvos::eval::predict_and_overlay(dvos::eval::make_predictor(loaded.net), sample, cfg, out);
  std::cout << json{{"mask", (out / "mask.png").string()},
                    {"recon", (out / "recon.png").string()},
                    {"overlay", (out / "overlay.png").string()},
                    {"mask_pixels", images.mask.count()}}
                   .dump(2)
            << '\n';
  return 0;
}

int fail(const std::string& code, const std::string& message, int status = 1) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << '\n';
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense video object segmentation toolkit"};
  app.require_subcommand(1);

  MakeAssetsArgs assets;
  auto* make_assets = app.add_subcommand("make-assets", "Write procedural background clips and annotated frames");
  make_assets->add_option("--out", assets.out, "Output directory")->required();
  make_assets->add_option("--size", assets.size, "Frame side in pixels");
  make_assets->add_option("--backgrounds", assets.backgrounds, "Number of background clips");
  make_assets->add_option("--frames", assets.frames, "Frames per background clip");
  make_assets->add_option("--annotated", assets.annotated, "Number of annotated frames");
  make_assets->add_option("--heads", assets.heads, "Objects per annotated frame");
  make_assets->add_option("--head-minor", assets.head_minor, "Minor semi-axis (default 3% of size)");
  make_assets->add_option("--head-major", assets.head_major, "Major semi-axis (default 6% of size)");
  make_assets->add_option("--seed", assets.seed);

  fs::path bank_dataset, bank_out;
  std::uint64_t bank_seed = 0;
  auto* bank = app.add_subcommand("bank", "Extract a cutout bank from annotated frames");
  bank->add_option("--dataset", bank_dataset, "Manifest of annotated clips")->required()->check(CLI::ExistingFile);
  bank->add_option("--out", bank_out, "Bank directory")->required();
  bank->add_option("--seed", bank_seed);

  fs::path synth_config, synth_bank, synth_backgrounds, synth_out;
  std::size_t synth_clips = 1;
  std::optional<std::uint64_t> synth_seed;
  auto* synth = app.add_subcommand("synth", "Synthesize a dataset of composited clips");
  synth->add_option("--config", synth_config, "Synthesis config (JSON)")->required()->check(CLI::ExistingFile);
  synth->add_option("--bank", synth_bank, "Cutout bank directory")->required()->check(CLI::ExistingDirectory);
  synth->add_option("--backgrounds", synth_backgrounds, "Manifest of background clips")
      ->required()
      ->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "Output dataset root")->required();
  synth->add_option("--clips", synth_clips, "Number of clips")->required();
  synth->add_option("--seed", synth_seed, "Overrides the config seed");

  fs::path split_dataset, split_out;
  std::vector<double> fractions{0.7, 0.15, 0.15};
  std::uint64_t split_seed = 0;
  auto* split = app.add_subcommand("split", "Group-wise train/valid/test split of a manifest");
  split->add_option("--dataset", split_dataset)->required()->check(CLI::ExistingFile);
  split->add_option("--fractions", fractions, "train,valid,test")->delimiter(',')->expected(3);
  split->add_option("--seed", split_seed);
  split->add_option("--out", split_out, "Directory for train.json, valid.json, test.json")->required();

  int phase = 1;
  fs::path train_config;
  auto* train = app.add_subcommand("train", "Train one phase");
  train->add_option("--phase", phase)->required()->check(CLI::IsMember({1, 2}));
  train->add_option("--config", train_config, "Training job (JSON)")->required()->check(CLI::ExistingFile);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a labelled dataset");
  eval->add_option("--ckpt", eval_args.ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("--dataset", eval_args.dataset)->required()->check(CLI::ExistingFile);
  eval->add_flag("--per-video", eval_args.per_video);
  eval->add_option("--threshold", eval_args.threshold);
  eval->add_option("--eval-crop", eval_args.eval_crop, "Centre crop side (default: 512 scaled to frame size)");
  eval->add_flag("--exclude-empty", eval_args.exclude_empty, "Drop samples where prediction and truth are empty");
  eval->add_option("--stride", eval_args.stride);
  eval->add_option("--out", eval_args.out, "Also write report.json and report.txt here");

  fs::path predict_ckpt, predict_sample, predict_out;
  double predict_threshold = 0.5;
  int predict_crop = 0;
  auto* predict = app.add_subcommand("predict", "Predict mask and next frame for one sample directory");
  predict->add_option("--ckpt", predict_ckpt)->required()->check(CLI::ExistingFile);
  predict->add_option("--sample", predict_sample)->required()->check(CLI::ExistingDirectory);
  predict->add_option("--out", predict_out)->required();
  predict->add_option("--threshold", predict_threshold);
  predict->add_option("--eval-crop", predict_crop);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*make_assets) return run_make_assets(assets);
    if (*bank) return run_bank(bank_dataset, bank_out, bank_seed);
    if (*synth) return run_synth(synth_config, synth_bank, synth_backgrounds, synth_out, synth_clips, synth_seed);
    if (*split) return run_split(split_dataset, fractions, split_seed, split_out);
    if (*train) return run_train(phase, train_config);
    if (*eval) return run_eval(eval_args);
    if (*predict) return run_predict(predict_ckpt, predict_sample, predict_out, predict_threshold, predict_crop);
  } catch (const dvos::Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
