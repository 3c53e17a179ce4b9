#include "brainnet/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <vector>

#include "brainnet/errors.hpp"

namespace brainnet {

using nlohmann::json;

namespace {

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      // model
      "n_regions", "n_classes", "experts_per_group", "expert_hidden",
      "model_dim", "transformer_layers", "gate_hidden", "attention_heads",
      "diversity_target", "seed",
      // loss weights
      "alpha", "beta", "gamma", "lambda", "entropy_sign", "learnable",
      // train
      "epochs", "batch_size", "lr", "beta1", "beta2", "eps", "weight_decay",
      "shuffle", "eval_every",
      // synth + split
      "subjects_per_class", "planted_regions", "effect_size", "base_scale",
      "dispersion", "test_fraction"};
  return keys;
}

int edit_distance(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

std::string suggest_config_key(const std::string& unknown) {
  // Common alternate phrasings first.
  static const std::vector<std::pair<std::string, std::string>> aliases = {
      {"n_expert", "experts_per_group"},   {"n_experts", "experts_per_group"},
      {"num_experts", "experts_per_group"}, {"experts", "experts_per_group"},
      {"expert_count", "experts_per_group"}, {"learning_rate", "lr"},
      {"wd", "weight_decay"},              {"batch", "batch_size"},
      {"regions", "n_regions"},            {"classes", "n_classes"},
      {"hidden", "expert_hidden"},         {"heads", "attention_heads"},
      {"layers", "transformer_layers"},    {"per_class", "subjects_per_class"}};
  for (const auto& [from, to] : aliases)
    if (unknown == from) return to;

  std::string best;
  int best_d = 1 << 20;
  for (const auto& k : known_keys()) {
    int d = edit_distance(unknown, k);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  // Only suggest when reasonably close or clearly related.
  int limit = std::max(3, static_cast<int>(unknown.size()) / 2);
  return best_d <= limit ? best : std::string();
}

void RunConfig::sync() {
  model.seed = train.seed;
  synth.seed = train.seed;
  synth.n_regions = model.n_regions;
  synth.n_classes = model.n_classes;
}

RunConfig parse_run_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
  RunConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    try {
      if (key == "n_regions") cfg.model.n_regions = value.get<int>();
      else if (key == "n_classes") cfg.model.n_classes = value.get<int>();
      else if (key == "experts_per_group") cfg.model.experts_per_group = value.get<int>();
      else if (key == "expert_hidden") cfg.model.expert_hidden = value.get<int>();
      else if (key == "model_dim") cfg.model.model_dim = value.get<int>();
      else if (key == "transformer_layers") cfg.model.transformer_layers = value.get<int>();
      else if (key == "gate_hidden") cfg.model.gate_hidden = value.get<int>();
      else if (key == "attention_heads") cfg.model.attention_heads = value.get<int>();
      else if (key == "diversity_target") {
        std::string v = value.get<std::string>();
        if (v == "pooled") cfg.model.diversity_target = DiversityTarget::pooled;
        else if (v == "disease_weights") cfg.model.diversity_target = DiversityTarget::disease_weights;
        else throw ConfigError("diversity_target must be disease_weights or pooled");
      }
      else if (key == "seed") cfg.train.seed = value.get<std::uint64_t>();
      else if (key == "alpha") cfg.model.loss_weights.alpha = value.get<double>();
      else if (key == "beta") cfg.model.loss_weights.beta = value.get<double>();
      else if (key == "gamma") cfg.model.loss_weights.gamma = value.get<double>();
      else if (key == "lambda") cfg.model.loss_weights.lambda = value.get<double>();
      else if (key == "entropy_sign") cfg.model.loss_weights.entropy_sign = value.get<double>();
      else if (key == "learnable") cfg.model.loss_weights.learnable = value.get<bool>();
      else if (key == "epochs") cfg.train.epochs = value.get<int>();
      else if (key == "batch_size") cfg.train.batch_size = value.get<int>();
      else if (key == "lr") cfg.train.lr = value.get<double>();
      else if (key == "beta1") cfg.train.beta1 = value.get<double>();
      else if (key == "beta2") cfg.train.beta2 = value.get<double>();
      else if (key == "eps") cfg.train.eps = value.get<double>();
      else if (key == "weight_decay") cfg.train.weight_decay = value.get<double>();
      else if (key == "shuffle") cfg.train.shuffle = value.get<bool>();
      else if (key == "eval_every") cfg.train.eval_every = value.get<int>();
      else if (key == "subjects_per_class") cfg.synth.subjects_per_class = value.get<int>();
      else if (key == "planted_regions") cfg.synth.planted_regions = value.get<std::vector<std::vector<int>>>();
      else if (key == "effect_size") cfg.synth.effect_size = value.get<double>();
      else if (key == "base_scale") cfg.synth.base_scale = value.get<double>();
      else if (key == "dispersion") cfg.synth.dispersion = value.get<double>();
      else if (key == "test_fraction") cfg.test_fraction = value.get<double>();
      else {
        std::string msg = "unknown config key \"" + key + "\"";
        std::string hint = suggest_config_key(key);
        if (!hint.empty()) msg += ", did you mean \"" + hint + "\"?";
        throw ConfigError(msg);
      }
    } catch (const json::exception&) {
      throw ConfigError("config key \"" + key + "\" has the wrong type");
    }
  }
  cfg.sync();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("unparseable config file: ") + e.what());
  }
  return parse_run_config(doc);
}

json run_config_to_json(const RunConfig& cfg) {
  json doc;
  doc["n_regions"] = cfg.model.n_regions;
  doc["n_classes"] = cfg.model.n_classes;
  doc["experts_per_group"] = cfg.model.experts_per_group;
  doc["expert_hidden"] = cfg.model.expert_hidden;
  doc["model_dim"] = cfg.model.model_dim;
  doc["transformer_layers"] = cfg.model.transformer_layers;
  doc["gate_hidden"] = cfg.model.gate_hidden;
  doc["attention_heads"] = cfg.model.attention_heads;
  doc["diversity_target"] =
      cfg.model.diversity_target == DiversityTarget::pooled ? "pooled"
                                                            : "disease_weights";
  doc["seed"] = cfg.train.seed;
  doc["alpha"] = cfg.model.loss_weights.alpha;
  doc["beta"] = cfg.model.loss_weights.beta;
  doc["gamma"] = cfg.model.loss_weights.gamma;
  doc["lambda"] = cfg.model.loss_weights.lambda;
  doc["entropy_sign"] = cfg.model.loss_weights.entropy_sign;
  doc["learnable"] = cfg.model.loss_weights.learnable;
  doc["epochs"] = cfg.train.epochs;
  doc["batch_size"] = cfg.train.batch_size;
  doc["lr"] = cfg.train.lr;
  doc["beta1"] = cfg.train.beta1;
  doc["beta2"] = cfg.train.beta2;
  doc["eps"] = cfg.train.eps;
  doc["weight_decay"] = cfg.train.weight_decay;
  doc["shuffle"] = cfg.train.shuffle;
  doc["eval_every"] = cfg.train.eval_every;
  doc["subjects_per_class"] = cfg.synth.subjects_per_class;
  if (!cfg.synth.planted_regions.empty())
    doc["planted_regions"] = cfg.synth.planted_regions;
  doc["effect_size"] = cfg.synth.effect_size;
  doc["base_scale"] = cfg.synth.base_scale;
  doc["dispersion"] = cfg.synth.dispersion;
  doc["test_fraction"] = cfg.test_fraction;
  return doc;
}

}  // namespace brainnet
