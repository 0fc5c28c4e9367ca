#include "dvos/config_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dvos {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads fields from one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw Error("invalid_config", where_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw Error("invalid_config", where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw Error("invalid_config", where_ + ": unknown key \"" + key + "\"");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json parse(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error("invalid_config", what + ": " + e.what());
  }
}

json network_json(const model::NetworkConfig& c) {
  const auto& s = c.level_scheduler;
  return {{"tau", c.tau},
          {"channels", c.channels},
          {"gn_groups", c.gn_groups},
          {"dropout_p", c.dropout_p},
          {"input_size", c.input_size},
          {"attention_reduction", c.attention_reduction},
          {"level_scheduler", {{"alpha0", s.alpha0}, {"beta0", s.beta0}, {"beta_c", s.beta_c}, {"n_levels", s.n_levels}}},
          {"diffusion_steps", c.diffusion_steps},
          {"beta_start", c.beta_start},
          {"beta_end", c.beta_end}};
}

model::NetworkConfig network_from(const json& j) {
  model::NetworkConfig c;
  Fields f(j, "network");
  f.get("tau", c.tau);
  f.get("channels", c.channels);
  f.get("gn_groups", c.gn_groups);
  f.get("dropout_p", c.dropout_p);
  f.get("input_size", c.input_size);
  f.get("attention_reduction", c.attention_reduction);
  f.get("diffusion_steps", c.diffusion_steps);
  f.get("beta_start", c.beta_start);
  f.get("beta_end", c.beta_end);
  // The level count follows the channel list unless given explicitly.
  c.level_scheduler.n_levels = c.levels();
  if (const json* s = f.child("level_scheduler")) {
    Fields g(*s, "network.level_scheduler");
    g.get("alpha0", c.level_scheduler.alpha0);
    g.get("beta0", c.level_scheduler.beta0);
    g.get("beta_c", c.level_scheduler.beta_c);
    g.get("n_levels", c.level_scheduler.n_levels);
    g.finish();
  }
  f.finish();
  c.validate();
  return c;
}

json range_json(const synth::IntRange& r) { return json::array({r.min, r.max}); }
json range_json(const synth::RealRange& r) { return json::array({r.min, r.max}); }

template <typename R>
void get_range(Fields& f, const char* key, R& out) {
  using V = decltype(out.min);
  std::vector<V> v;
  f.get(key, v);
  if (v.empty()) return;
  if (v.size() != 2) throw Error("invalid_config", std::string("synth.") + key + ": expected [min, max]");
  out.min = v[0];
  out.max = v[1];
}

json synth_json(const synth::SynthConfig& c) {
  return {{"clip_length", c.clip_length},
          {"canvas", c.canvas},
          {"n_real", range_json(c.n_real)},
          {"n_fake", range_json(c.n_fake)},
          {"speed", range_json(c.speed)},
          {"direction_jitter_deg", c.direction_jitter_deg},
          {"angular_rate", range_json(c.angular_rate)},
          {"scale", range_json(c.scale)},
          {"global_amplitude", range_json(c.global_amplitude)},
          {"global_period", range_json(c.global_period)},
          {"color_jitter", c.color_jitter},
          {"seed", c.seed}};
}

synth::SynthConfig synth_from(const json& j) {
  Fields f(j, "synth");
  // Object counts default to the values scaled for the chosen canvas.
  int canvas = 1024;
  f.get("canvas", canvas);
  synth::SynthConfig c = synth::SynthConfig::for_canvas(canvas);
  f.get("clip_length", c.clip_length);
  get_range(f, "n_real", c.n_real);
  get_range(f, "n_fake", c.n_fake);
  get_range(f, "speed", c.speed);
  f.get("direction_jitter_deg", c.direction_jitter_deg);
  get_range(f, "angular_rate", c.angular_rate);
  get_range(f, "scale", c.scale);
  get_range(f, "global_amplitude", c.global_amplitude);
  get_range(f, "global_period", c.global_period);
  f.get("color_jitter", c.color_jitter);
  f.get("seed", c.seed);
  f.finish();
  c.validate();
  return c;
}

json train_json(const train::TrainConfig& c) {
  return {{"phase", static_cast<int>(c.phase)},
          {"epochs", c.epochs},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"crop_range", json::array({c.crop_min, c.crop_max})},
          {"train_size", c.train_size},
          {"eval_crop", c.eval_crop},
          {"patch_diffusion_p", c.patch_diffusion_p},
          {"patch_diffusion_max_step", c.patch_diffusion_max_step},
          {"batch_size", c.batch_size},
          {"stride", c.stride},
          {"seed", c.seed},
          {"loss_weights",
           {{"mse", c.weights.mse}, {"ssim", c.weights.ssim}, {"bce", c.weights.bce}, {"dice", c.weights.dice}}},
          {"grad_clip", c.grad_clip},
          {"augment", c.augment},
          {"max_rotation_deg", c.max_rotation_deg},
          {"blur_probability", c.blur_probability},
          {"eval_threshold", c.eval_threshold},
          {"max_steps_per_epoch", c.max_steps_per_epoch}};
}

train::TrainConfig train_from(const json& j, std::optional<train::Phase> phase_override = std::nullopt) {
  Fields f(j, "train");
  int phase = 1;
  f.get("phase", phase);
  if (phase_override) phase = static_cast<int>(*phase_override);
  if (phase != 1 && phase != 2) throw Error("invalid_config", "train.phase must be 1 or 2");
  train::TrainConfig c = train::TrainConfig::for_phase(static_cast<train::Phase>(phase));
  f.get("epochs", c.epochs);
  f.get("lr", c.lr);
  f.get("weight_decay", c.weight_decay);
  std::vector<int> crop;
  f.get("crop_range", crop);
  if (!crop.empty()) {
    if (crop.size() != 2) throw Error("invalid_config", "train.crop_range: expected [min, max]");
    c.crop_min = crop[0];
    c.crop_max = crop[1];
  }
  f.get("train_size", c.train_size);
  f.get("eval_crop", c.eval_crop);
  f.get("patch_diffusion_p", c.patch_diffusion_p);
  f.get("patch_diffusion_max_step", c.patch_diffusion_max_step);
  f.get("batch_size", c.batch_size);
  f.get("stride", c.stride);
  f.get("seed", c.seed);
  if (const json* w = f.child("loss_weights")) {
    Fields g(*w, "train.loss_weights");
    g.get("mse", c.weights.mse);
    g.get("ssim", c.weights.ssim);
    g.get("bce", c.weights.bce);
    g.get("dice", c.weights.dice);
    g.finish();
  }
  f.get("grad_clip", c.grad_clip);
  f.get("augment", c.augment);
  f.get("max_rotation_deg", c.max_rotation_deg);
  f.get("blur_probability", c.blur_probability);
  f.get("eval_threshold", c.eval_threshold);
  f.get("max_steps_per_epoch", c.max_steps_per_epoch);
  f.finish();
  c.validate();
  return c;
}

}  // namespace

std::string network_config_to_json(const model::NetworkConfig& config) { return network_json(config).dump(2); }
model::NetworkConfig network_config_from_json(const std::string& text) {
  return network_from(parse(text, "network config"));
}

std::string synth_config_to_json(const synth::SynthConfig& config) { return synth_json(config).dump(2); }
synth::SynthConfig synth_config_from_json(const std::string& text) { return synth_from(parse(text, "synth config")); }

std::string train_config_to_json(const train::TrainConfig& config) { return train_json(config).dump(2); }
train::TrainConfig train_config_from_json(const std::string& text) { return train_from(parse(text, "train config")); }

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TrainingJob load_training_job(const fs::path& path) {
  const json j = parse(read_text_file(path), path.string());
  Fields f(j, "job");
  TrainingJob job;
  if (const json* n = f.child("network")) job.network = network_from(*n);
  if (const json* t = f.child("train")) job.train = train_from(*t);
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  if (const json* d = f.child("data")) {
    Fields g(*d, "job.data");
    std::string train_manifest, val_manifest, out_dir, init;
    g.get("train_manifest", train_manifest);
    g.get("val_manifest", val_manifest);
    g.get("out_dir", out_dir);
    g.get("init_checkpoint", init);
    g.get("cache_frames", job.cache_frames);
    g.finish();
    if (!train_manifest.empty()) job.train_manifest = resolve(train_manifest);
    if (!val_manifest.empty()) job.val_manifest = resolve(val_manifest);
    job.out_dir = resolve(out_dir.empty() ? std::string("runs") : out_dir);
    if (!init.empty()) job.init_checkpoint = resolve(init);
  } else {
    job.out_dir = base / "runs";
  }
  f.finish();
  return job;
}

std::string describe_config_difference(const model::NetworkConfig& a, const model::NetworkConfig& b) {
  const json ja = network_json(a);
  const json jb = network_json(b);
  std::string out;
  for (const auto& [key, value] : ja.items()) {
    if (value != jb.at(key)) {
      if (!out.empty()) out += ", ";
      out += key + " (" + value.dump() + " vs " + jb.at(key).dump() + ")";
    }
  }
  return out;
}

}  // namespace dvos
