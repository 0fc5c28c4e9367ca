#include "dvos/checkpoint.hpp"

#include <torch/serialize.h>

#include "dvos/config_io.hpp"
#include "json.hpp"

namespace dvos::model {

namespace fs = std::filesystem;

void save_checkpoint(const fs::path& path, DvosNet& net, const CheckpointMeta& meta) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  torch::serialize::OutputArchive archive;
  net->save(archive);
  nlohmann::json m{{"phase", meta.phase},
                   {"epoch", meta.epoch},
                   {"val_dice", std::isnan(meta.val_dice) ? nlohmann::json(nullptr) : nlohmann::json(meta.val_dice)},
                   {"init_hash", std::to_string(meta.init_hash)}};
  archive.write("dvos.config", c10::IValue(network_config_to_json(net->config())));
  archive.write("dvos.meta", c10::IValue(m.dump()));
  archive.save_to(path.string());
}

LoadedCheckpoint load_checkpoint(const fs::path& path, const NetworkConfig* expected) {
  if (!fs::exists(path)) throw Error("io_error", "checkpoint not found: " + path.string());
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw Error("invalid_checkpoint", "cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  c10::IValue config_value, meta_value;
  if (!archive.try_read("dvos.config", config_value) || !archive.try_read("dvos.meta", meta_value)) {
    throw Error("invalid_checkpoint", path.string() + " lacks network configuration");
  }
  LoadedCheckpoint out;
  out.config = network_config_from_json(config_value.toStringRef());
  if (expected != nullptr && !(*expected == out.config)) {
    throw Error("config_mismatch",
                "checkpoint config differs: " + describe_config_difference(*expected, out.config));
  }
  const auto m = nlohmann::json::parse(meta_value.toStringRef());
  out.meta.phase = m.value("phase", 0);
  out.meta.epoch = m.value("epoch", 0);
  if (m.contains("val_dice") && !m["val_dice"].is_null()) out.meta.val_dice = m["val_dice"].get<double>();
  out.meta.init_hash = std::stoull(m.value("init_hash", std::string("0")));
  out.net = DvosNet(out.config);
  try {
    out.net->load(archive);
  } catch (const c10::Error& e) {
    throw Error("invalid_checkpoint", std::string("parameters do not match the stored config: ") + e.what_without_backtrace());
  }
  return out;
}

}  // namespace dvos::model
