#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "brainnet/connectome.hpp"
#include "brainnet/disease_gate.hpp"
#include "brainnet/losses.hpp"
#include "brainnet/moe.hpp"
#include "brainnet/nn.hpp"

namespace brainnet {

// Which per-subject vectors the disease diversity loss separates by class:
// the subject's mean disease-gate distribution, or the pooled whole-brain
// representation.
enum class DiversityTarget { disease_weights, pooled };

struct ModelConfig {
  int n_regions = 32;
  int n_classes = 3;
  int experts_per_group = 3;
  int expert_hidden = 256;
  int model_dim = 128;
  int transformer_layers = 2;
  int gate_hidden = 64;
  int attention_heads = 1;
  DiversityTarget diversity_target = DiversityTarget::disease_weights;
  LossWeights loss_weights;
  std::uint64_t seed = 42;

  void validate() const;
};

// Full pipeline: per sub-network MoE groups + disease gate -> region-embedded
// token sequence -> transformer -> mean-pooled whole-brain representation ->
// classifier. Group count equals disease-gate output dim equals class count.
struct BrainNetMoE {
  ModelConfig config;
  std::vector<ExpertGroup> groups;
  DiseaseGate gate;
  Tensor region_embedding;  // [N x model_dim]
  std::vector<TransformerLayer> transformer;
  DenseLayer cls1, cls2;
  LossWeights loss_weights;

  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::vector<Tensor> params() const;
};

BrainNetMoE make_model(const ModelConfig& cfg);

struct ForwardResult {
  Tensor logits;          // [B x K]
  Tensor pooled;          // [B x model_dim], per-subject whole-brain representations
  Tensor mean_disease_weights;  // [B x K], per-subject mean gate distribution
  GateTrace trace;
};

ForwardResult forward(Tape* tape, const BrainNetMoE& model,
                      const std::vector<SubNetworkBatch>& batch);

// Argmax per row; ties resolve to the lowest class index.
std::vector<int> predict_from_logits(const Tensor& logits);
std::vector<int> predict(const BrainNetMoE& model,
                         const std::vector<SubNetworkBatch>& batch);

struct RelevanceEntry {
  int region = 0;
  double score = 0.0;
};

struct RelevanceContrast {
  int class_a = 0;
  int class_b = 0;
  std::vector<RelevanceEntry> top;
};

struct RelevanceReport {
  std::vector<std::string> region_labels;
  Tensor scores;  // [K x N]
  std::vector<std::vector<RelevanceEntry>> top_per_class;
  std::vector<RelevanceContrast> contrasts;
  int top_m = 3;
};

// relevance(k, i) = mean over subjects of disease_weight[i][k] * max expert
// gate probability of group k at sub-network i. Rankings break ties by region
// index. region_labels default to "R000".. when not supplied.
RelevanceReport relevance_scores(const BrainNetMoE& model,
                                 const std::vector<SubNetworkBatch>& subjects,
                                 int top_m = 3,
                                 std::vector<std::string> region_labels = {});

}  // namespace brainnet
