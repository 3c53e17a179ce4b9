#include "brainnet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "brainnet/errors.hpp"

namespace brainnet {

using nlohmann::json;

namespace {

json config_to_json(const ModelConfig& cfg) {
  return json{{"n_regions", cfg.n_regions},
              {"n_classes", cfg.n_classes},
              {"experts_per_group", cfg.experts_per_group},
              {"expert_hidden", cfg.expert_hidden},
              {"model_dim", cfg.model_dim},
              {"transformer_layers", cfg.transformer_layers},
              {"gate_hidden", cfg.gate_hidden},
              {"attention_heads", cfg.attention_heads},
              {"diversity_target",
               cfg.diversity_target == DiversityTarget::pooled ? "pooled"
                                                               : "disease_weights"},
              {"seed", cfg.seed},
              {"alpha", cfg.loss_weights.alpha},
              {"beta", cfg.loss_weights.beta},
              {"gamma", cfg.loss_weights.gamma},
              {"lambda", cfg.loss_weights.lambda},
              {"entropy_sign", cfg.loss_weights.entropy_sign},
              {"learnable", cfg.loss_weights.learnable}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.n_regions = j.at("n_regions").get<int>();
  cfg.n_classes = j.at("n_classes").get<int>();
  cfg.experts_per_group = j.at("experts_per_group").get<int>();
  cfg.expert_hidden = j.at("expert_hidden").get<int>();
  cfg.model_dim = j.at("model_dim").get<int>();
  cfg.transformer_layers = j.at("transformer_layers").get<int>();
  cfg.gate_hidden = j.at("gate_hidden").get<int>();
  cfg.attention_heads = j.at("attention_heads").get<int>();
  cfg.diversity_target = j.value("diversity_target", "disease_weights") == "pooled"
                             ? DiversityTarget::pooled
                             : DiversityTarget::disease_weights;
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.loss_weights.alpha = j.at("alpha").get<double>();
  cfg.loss_weights.beta = j.at("beta").get<double>();
  cfg.loss_weights.gamma = j.at("gamma").get<double>();
  cfg.loss_weights.lambda = j.at("lambda").get<double>();
  cfg.loss_weights.entropy_sign = j.at("entropy_sign").get<double>();
  cfg.loss_weights.learnable = j.at("learnable").get<bool>();
  return cfg;
}

}  // namespace

std::string blob_path_for(const std::string& manifest_path) {
  return manifest_path + ".bin";
}

void save_checkpoint(const BrainNetMoE& model, const std::string& path) {
  auto named = model.named_params();

  json manifest;
  manifest["format"] = "brainnet-checkpoint";
  manifest["version"] = 1;
  manifest["dtype"] = "f64";
  manifest["byte_order"] = "little";
  manifest["config"] = config_to_json(model.config);
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : named) {
    json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["offset"] = offset;
    tensors.push_back(entry);
    offset += sizeof(double) * static_cast<std::size_t>(t.size());
  }
  manifest["tensors"] = tensors;
  manifest["blob_bytes"] = offset;

  std::ofstream mf(path);
  if (!mf) throw IoError("cannot write checkpoint manifest: " + path);
  mf << manifest.dump(2) << "\n";
  if (!mf) throw IoError("failed writing checkpoint manifest: " + path);

  std::ofstream bf(blob_path_for(path), std::ios::binary);
  if (!bf) throw IoError("cannot write checkpoint blob: " + blob_path_for(path));
  for (const auto& [name, t] : named)
    bf.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(t.size())));
  if (!bf) throw IoError("failed writing checkpoint blob: " + blob_path_for(path));
}

BrainNetMoE load_checkpoint(const std::string& path) {
  std::ifstream mf(path);
  if (!mf) throw IoError("cannot open checkpoint manifest: " + path);
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    throw CorruptCheckpointError(std::string("unparseable checkpoint manifest: ") + e.what());
  }
  if (manifest.value("format", "") != "brainnet-checkpoint")
    throw CorruptCheckpointError("not a checkpoint manifest: " + path);
  if (manifest.value("dtype", "") != "f64")
    throw CorruptCheckpointError("unsupported checkpoint dtype");

  BrainNetMoE model = make_model(config_from_json(manifest.at("config")));
  std::map<std::string, Tensor> by_name;
  for (auto& [name, t] : model.named_params()) by_name.emplace(name, t);

  std::ifstream bf(blob_path_for(path), std::ios::binary);
  if (!bf) throw IoError("cannot open checkpoint blob: " + blob_path_for(path));
  bf.seekg(0, std::ios::end);
  std::size_t blob_size = static_cast<std::size_t>(bf.tellg());
  if (manifest.contains("blob_bytes") &&
      manifest.at("blob_bytes").get<std::size_t>() != blob_size)
    throw CorruptCheckpointError("checkpoint blob size does not match manifest");

  std::size_t seen = 0;
  for (const auto& entry : manifest.at("tensors")) {
    std::string name = entry.at("name").get<std::string>();
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw ShapeError("checkpoint manifest lists unknown tensor: " + name);
    std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    if (shape != it->second.shape())
      throw ShapeError("checkpoint tensor shape mismatch for: " + name);
    std::size_t offset = entry.at("offset").get<std::size_t>();
    std::size_t bytes = sizeof(double) * static_cast<std::size_t>(it->second.size());
    if (offset + bytes > blob_size)
      throw CorruptCheckpointError("checkpoint blob truncated at tensor: " + name);
    bf.seekg(static_cast<std::streamoff>(offset));
    bf.read(reinterpret_cast<char*>(it->second.data()),
            static_cast<std::streamsize>(bytes));
    if (!bf) throw CorruptCheckpointError("failed reading checkpoint tensor: " + name);
    ++seen;
  }
  if (seen != by_name.size())
    throw CorruptCheckpointError("checkpoint manifest is missing tensors");
  return model;
}

}  // namespace brainnet
