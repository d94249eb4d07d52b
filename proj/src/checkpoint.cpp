#include "rformer/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace rformer {

nlohmann::json to_json(const ModelConfig& cfg) {
  return {{"input_dim", cfg.input_dim},
          {"model_dim", cfg.model_dim},
          {"ff_dim", cfg.ff_dim},
          {"output_dim", cfg.output_dim},
          {"num_layers", cfg.num_layers},
          {"positional_encoding", cfg.positional_encoding},
          {"task", std::string(to_string(cfg.task))},
          {"ln_eps", cfg.ln_eps}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.input_dim = j.at("input_dim").get<std::size_t>();
  cfg.model_dim = j.at("model_dim").get<std::size_t>();
  cfg.ff_dim = j.at("ff_dim").get<std::size_t>();
  cfg.output_dim = j.at("output_dim").get<std::size_t>();
  cfg.num_layers = j.at("num_layers").get<std::size_t>();
  cfg.positional_encoding = j.at("positional_encoding").get<bool>();
  cfg.task = parse_task(j.at("task").get<std::string>());
  cfg.ln_eps = j.at("ln_eps").get<double>();
  return cfg;
}

nlohmann::json checkpoint_to_json(const ModelParams& params, const nlohmann::json& extra) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : params.tensors())
    tensors.push_back({{"name", p.name}, {"shape", p.shape}, {"values", p.value}});
  return {{"format", "rformer-checkpoint"},
          {"version", 1},
          {"model", to_json(params.config())},
          {"tensors", std::move(tensors)},
          {"extra", extra}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "rformer-checkpoint")
    throw std::runtime_error("not an rformer checkpoint");
  if (j.at("version").get<int>() != 1) throw std::runtime_error("unsupported checkpoint version");
  Checkpoint ck{ModelParams(model_config_from_json(j.at("model"))), j.value("extra", nlohmann::json::object())};
  const auto& tensors = j.at("tensors");
  if (tensors.size() != ck.params.tensors().size())
    throw std::runtime_error("checkpoint tensor count does not match its model config");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Param& p = ck.params.at(i);
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != p.name ||
        t.at("shape").get<std::vector<std::size_t>>() != p.shape)
      throw std::runtime_error("checkpoint tensor '" + t.at("name").get<std::string>() +
                               "' does not match the expected layout");
    auto values = t.at("values").get<std::vector<double>>();
    if (values.size() != p.size())
      throw std::runtime_error("checkpoint tensor '" + p.name + "' has the wrong size");
    p.value = std::move(values);
  }
  ck.params.bump_version();
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                      const nlohmann::json& extra) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << checkpoint_to_json(params, extra).dump() << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return checkpoint_from_json(nlohmann::json::parse(in));
}

}  // namespace rformer
