#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "brainnet/data_synth.hpp"
#include "brainnet/losses.hpp"
#include "brainnet/model.hpp"

namespace brainnet {

struct TrainConfig {
  int epochs = 32;
  int batch_size = 64;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::uint64_t seed = 42;
  bool shuffle = true;
  int eval_every = 1;  // evaluate on the test split when it divides the epoch

  void validate() const;
};

// Macro (unweighted) one-vs-rest averages; all values are percentages.
struct MetricsReport {
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  std::vector<std::vector<int>> confusion;  // [K x K], rows = true class
};

MetricsReport metrics_from_confusion(
    const std::vector<std::vector<int>>& confusion);

std::string format_metrics_table(const MetricsReport& report,
                                 const std::vector<std::string>& class_names);

struct StepRecord {
  int epoch = 0;  // 1-based
  int step = 0;   // global step, 1-based
  LossBreakdown losses;
};

struct EvalRecord {
  int epoch = 0;
  MetricsReport metrics;
};

struct TrainResult {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
};

enum class SplitKind { train, test };

// Mini-batch training with AdamW on the cohort's train split. Deterministic
// given cfg.seed (fixed init comes from the model, fixed shuffle order from
// the seed's "shuffle" stream). Writes one JSON line per step and per eval to
// metrics_log when given. Throws NumericalError naming the step on a
// non-finite loss.
TrainResult train(BrainNetMoE& model, const Cohort& cohort,
                  const TrainConfig& cfg, std::ostream* metrics_log = nullptr);

MetricsReport evaluate(const BrainNetMoE& model, const Cohort& cohort,
                       SplitKind split);

// Mean expert-balance loss of gate traces over a split (no gradients).
double split_balance_loss(const BrainNetMoE& model, const Cohort& cohort,
                          SplitKind split);

struct AblationVariant {
  std::string name;
  ModelConfig model_cfg;
  TrainConfig train_cfg;
};

struct AblationPlan {
  std::vector<AblationVariant> variants;
};

// Table-2-shaped default: experts {2,4}, each aux loss off, all off, full.
AblationPlan default_ablation_plan(const ModelConfig& base_model,
                                   const TrainConfig& base_train);

struct AblationRow {
  std::string name;
  MetricsReport metrics;
  double final_balance = 0.0;  // expert_balance_loss on the test split
};

// Trains and evaluates one model per variant on the shared cohort. on_row is
// invoked as each variant completes (used to flush partial results). jobs > 1
// runs variants concurrently; rows are still reported in plan order.
std::vector<AblationRow> run_ablation(
    const AblationPlan& plan, const Cohort& cohort, int jobs = 1,
    const std::function<void(const AblationRow&)>& on_row = nullptr);

std::string format_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace brainnet
