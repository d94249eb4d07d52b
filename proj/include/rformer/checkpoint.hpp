#pragma once
// Model checkpoints as self-describing JSON: config, every tensor with its
// shape, and a free-form "extra" object (standardizer, optimizer state, rng
// state, resolved run config). Doubles are written in shortest round-trip
// form, so values survive a write/read cycle bit-exactly.

#include <filesystem>

#include "json.hpp"
#include "rformer/net.hpp"

namespace rformer {

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct Checkpoint {
  ModelParams params;
  nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json checkpoint_to_json(const ModelParams& params, const nlohmann::json& extra);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void write_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                      const nlohmann::json& extra = nlohmann::json::object());
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace rformer
