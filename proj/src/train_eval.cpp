#include "brainnet/train_eval.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "brainnet/errors.hpp"
#include "brainnet/ops.hpp"
#include "brainnet/optimizer.hpp"
#include "brainnet/rng.hpp"

namespace brainnet {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train config: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (lr < 0.0) throw ConfigError("train config: lr must be >= 0");
  if (eval_every < 1) throw ConfigError("train config: eval_every must be >= 1");
}

MetricsReport metrics_from_confusion(
    const std::vector<std::vector<int>>& confusion) {
  int k = static_cast<int>(confusion.size());
  if (k == 0) throw ShapeError("metrics: empty confusion matrix");
  long long total = 0, correct = 0;
  for (int i = 0; i < k; ++i) {
    if (static_cast<int>(confusion[static_cast<std::size_t>(i)].size()) != k)
      throw ShapeError("metrics: confusion matrix must be square");
    for (int j = 0; j < k; ++j)
      total += confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    correct += confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
  }
  if (total == 0) throw ValueError("metrics: confusion matrix has no samples");

  double sen = 0.0, spe = 0.0, pre = 0.0, f1 = 0.0;
  for (int c = 0; c < k; ++c) {
    long long tp = confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
    long long fn = 0, fp = 0;
    for (int j = 0; j < k; ++j) {
      if (j != c) {
        fn += confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
        fp += confusion[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
      }
    }
    long long tn = total - tp - fn - fp;
    double recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    double specificity = (tn + fp) > 0 ? static_cast<double>(tn) / (tn + fp) : 0.0;
    double precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    double f1c = (precision + recall) > 0.0
                     ? 2.0 * precision * recall / (precision + recall)
                     : 0.0;
    sen += recall;
    spe += specificity;
    pre += precision;
    f1 += f1c;
  }
  MetricsReport r;
  r.confusion = confusion;
  r.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(total);
  r.sensitivity = 100.0 * sen / k;
  r.specificity = 100.0 * spe / k;
  r.precision = 100.0 * pre / k;
  r.f1 = 100.0 * f1 / k;
  return r;
}

std::string format_metrics_table(const MetricsReport& report,
                                 const std::vector<std::string>& class_names) {
  char buf[256];
  std::string out;
  out += "  ACC%    SEN%    SPE%    PRE%    F1%   (macro one-vs-rest)\n";
  std::snprintf(buf, sizeof(buf), "%6.2f  %6.2f  %6.2f  %6.2f  %6.2f\n",
                report.accuracy, report.sensitivity, report.specificity,
                report.precision, report.f1);
  out += buf;
  out += "confusion (rows = true class):\n";
  int k = static_cast<int>(report.confusion.size());
  for (int i = 0; i < k; ++i) {
    std::string name = i < static_cast<int>(class_names.size())
                           ? class_names[static_cast<std::size_t>(i)]
                           : ("class" + std::to_string(i));
    std::snprintf(buf, sizeof(buf), "  %-8s", name.c_str());
    out += buf;
    for (int j = 0; j < k; ++j) {
      std::snprintf(buf, sizeof(buf), " %5d",
                    report.confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

namespace {

double round2(double v) { return std::round(v * 100.0) / 100.0; }

json step_line(const StepRecord& rec) {
  return json{{"type", "step"},    {"epoch", rec.epoch},
              {"step", rec.step},  {"cls", rec.losses.cls},
              {"e_d", rec.losses.expert_diversity},
              {"d_d", rec.losses.disease_diversity},
              {"e_b", rec.losses.expert_balance},
              {"total", rec.losses.total}};
}

json eval_line(const EvalRecord& rec) {
  return json{{"type", "eval"},
              {"epoch", rec.epoch},
              {"ACC", round2(rec.metrics.accuracy)},
              {"SEN", round2(rec.metrics.sensitivity)},
              {"SPE", round2(rec.metrics.specificity)},
              {"PRE", round2(rec.metrics.precision)},
              {"F1", round2(rec.metrics.f1)}};
}

MetricsReport evaluate_prepared(const BrainNetMoE& model,
                                const std::vector<SubNetworkBatch>& subjects,
                                const std::vector<int>& labels) {
  int k = model.config.n_classes;
  std::vector<std::vector<int>> confusion(
      static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(k), 0));
  constexpr std::size_t chunk = 16;
  for (std::size_t at = 0; at < subjects.size(); at += chunk) {
    std::size_t end = std::min(subjects.size(), at + chunk);
    std::vector<SubNetworkBatch> part(subjects.begin() + static_cast<std::ptrdiff_t>(at),
                                      subjects.begin() + static_cast<std::ptrdiff_t>(end));
    ForwardResult r = forward(nullptr, model, part);
    std::vector<int> pred = predict_from_logits(r.logits);
    for (std::size_t i = 0; i < pred.size(); ++i)
      confusion[static_cast<std::size_t>(labels[at + i])]
               [static_cast<std::size_t>(pred[i])]++;
  }
  return metrics_from_confusion(confusion);
}

}  // namespace

MetricsReport evaluate(const BrainNetMoE& model, const Cohort& cohort,
                       SplitKind split) {
  const std::vector<int>& idx =
      split == SplitKind::train ? cohort.train_idx : cohort.test_idx;
  if (idx.empty()) throw StateError("evaluate: requested split is empty");
  return evaluate_prepared(model, prepare_subjects(cohort, idx),
                           labels_for(cohort, idx));
}

double split_balance_loss(const BrainNetMoE& model, const Cohort& cohort,
                          SplitKind split) {
  const std::vector<int>& idx =
      split == SplitKind::train ? cohort.train_idx : cohort.test_idx;
  if (idx.empty()) throw StateError("split_balance_loss: requested split is empty");
  std::vector<SubNetworkBatch> subjects = prepare_subjects(cohort, idx);
  GateTrace merged;
  merged.expert_probs.resize(static_cast<std::size_t>(model.config.n_classes));
  constexpr std::size_t chunk = 16;
  for (std::size_t at = 0; at < subjects.size(); at += chunk) {
    std::size_t end = std::min(subjects.size(), at + chunk);
    std::vector<SubNetworkBatch> part(subjects.begin() + static_cast<std::ptrdiff_t>(at),
                                      subjects.begin() + static_cast<std::ptrdiff_t>(end));
    ForwardResult r = forward(nullptr, model, part);
    for (std::size_t g = 0; g < r.trace.expert_probs.size(); ++g)
      for (auto& t : r.trace.expert_probs[g]) merged.expert_probs[g].push_back(t);
  }
  return expert_balance_loss(nullptr, merged).item();
}

TrainResult train(BrainNetMoE& model, const Cohort& cohort,
                  const TrainConfig& cfg, std::ostream* metrics_log) {
  cfg.validate();
  if (cohort.train_idx.empty()) throw StateError("train: empty train split");

  std::vector<SubNetworkBatch> train_subjects =
      prepare_subjects(cohort, cohort.train_idx);
  std::vector<int> train_labels = labels_for(cohort, cohort.train_idx);
  std::vector<SubNetworkBatch> test_subjects;
  std::vector<int> test_labels;
  if (!cohort.test_idx.empty()) {
    test_subjects = prepare_subjects(cohort, cohort.test_idx);
    test_labels = labels_for(cohort, cohort.test_idx);
  }

  std::vector<Tensor> params = model.params();
  OptimizerState opt;
  opt.lr = cfg.lr;
  opt.beta1 = cfg.beta1;
  opt.beta2 = cfg.beta2;
  opt.eps = cfg.eps;
  opt.weight_decay = cfg.weight_decay;

  TrainResult result;
  Rng root(cfg.seed);
  int n_train = static_cast<int>(train_subjects.size());
  int global_step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<int> order(static_cast<std::size_t>(n_train));
    for (int i = 0; i < n_train; ++i) order[static_cast<std::size_t>(i)] = i;
    if (cfg.shuffle) {
      Rng shuffle_rng = root.stream("shuffle", static_cast<std::uint64_t>(epoch));
      for (int i = n_train - 1; i > 0; --i) {
        int j = static_cast<int>(shuffle_rng.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      }
    }

    for (int at = 0; at < n_train; at += cfg.batch_size) {
      ++global_step;
      int end = std::min(n_train, at + cfg.batch_size);
      std::vector<SubNetworkBatch> batch;
      std::vector<int> labels;
      batch.reserve(static_cast<std::size_t>(end - at));
      for (int i = at; i < end; ++i) {
        batch.push_back(train_subjects[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
        labels.push_back(train_labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
      }

      StepRecord rec;
      rec.epoch = epoch;
      rec.step = global_step;
      try {
        Tape tape;
        ForwardResult fwd = forward(&tape, model, batch);
        Tensor cls = cross_entropy(&tape, fwd.logits, labels);
        Tensor e_d = expert_diversity_loss(&tape, fwd.trace,
                                           model.loss_weights.lambda,
                                           model.loss_weights.entropy_sign);
        const Tensor& div_reps =
            model.config.diversity_target == DiversityTarget::pooled
                ? fwd.pooled
                : fwd.mean_disease_weights;
        Tensor d_d = disease_diversity_loss(&tape, div_reps, labels,
                                            model.config.n_classes);
        Tensor e_b = expert_balance_loss(&tape, fwd.trace);
        Tensor total = total_loss(&tape, cls, e_d, d_d, e_b,
                                  model.loss_weights, &rec.losses);
        double recombined = rec.losses.cls +
                            rec.losses.alpha * rec.losses.expert_diversity +
                            rec.losses.beta * rec.losses.disease_diversity +
                            rec.losses.gamma * rec.losses.expert_balance;
        if (std::fabs(recombined - rec.losses.total) > 1e-9)
          throw NumericalError("loss breakdown identity violated");
        tape.backward(total);
        adamw_step(params, opt);
      } catch (const NumericalError& e) {
        throw NumericalError("training step " + std::to_string(global_step) +
                             ": " + e.what());
      }
      result.steps.push_back(rec);
      if (metrics_log) *metrics_log << step_line(rec).dump() << "\n";
    }

    if (!test_subjects.empty() && epoch % cfg.eval_every == 0) {
      EvalRecord ev;
      ev.epoch = epoch;
      ev.metrics = evaluate_prepared(model, test_subjects, test_labels);
      result.evals.push_back(ev);
      if (metrics_log) *metrics_log << eval_line(ev).dump() << "\n";
    }
  }
  if (metrics_log) metrics_log->flush();
  return result;
}

AblationPlan default_ablation_plan(const ModelConfig& base_model,
                                   const TrainConfig& base_train) {
  AblationPlan plan;
  auto push = [&](const std::string& name, auto&& tweak) {
    AblationVariant v;
    v.name = name;
    v.model_cfg = base_model;
    v.train_cfg = base_train;
    tweak(v);
    plan.variants.push_back(std::move(v));
  };
  push("experts=2", [](AblationVariant& v) { v.model_cfg.experts_per_group = 2; });
  push("experts=4", [](AblationVariant& v) { v.model_cfg.experts_per_group = 4; });
  push("w/o L_ed", [](AblationVariant& v) { v.model_cfg.loss_weights.alpha = 0.0; });
  push("w/o L_dd", [](AblationVariant& v) { v.model_cfg.loss_weights.beta = 0.0; });
  push("w/o L_eb", [](AblationVariant& v) { v.model_cfg.loss_weights.gamma = 0.0; });
  push("w/o all", [](AblationVariant& v) {
    v.model_cfg.loss_weights.alpha = 0.0;
    v.model_cfg.loss_weights.beta = 0.0;
    v.model_cfg.loss_weights.gamma = 0.0;
  });
  push("full", [](AblationVariant&) {});
  return plan;
}

std::vector<AblationRow> run_ablation(
    const AblationPlan& plan, const Cohort& cohort, int jobs,
    const std::function<void(const AblationRow&)>& on_row) {
  if (plan.variants.empty()) throw SpecError("ablation: empty plan");
  if (!cohort.has_split()) throw StateError("ablation: cohort has no split");
  std::size_t n = plan.variants.size();
  std::vector<AblationRow> rows(n);

  std::atomic<std::size_t> next{0};
  std::mutex report_mutex;
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      const AblationVariant& v = plan.variants[i];
      BrainNetMoE model = make_model(v.model_cfg);
      train(model, cohort, v.train_cfg, nullptr);
      AblationRow row;
      row.name = v.name;
      row.metrics = evaluate(model, cohort, SplitKind::test);
      row.final_balance = split_balance_loss(model, cohort, SplitKind::test);
      {
        std::lock_guard<std::mutex> lock(report_mutex);
        rows[i] = row;
        if (on_row) on_row(row);
      }
    }
  };

  int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::string out =
      "variant        ACC%    SEN%    SPE%    PRE%    F1%     balance\n";
  char buf[200];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-12s %6.2f  %6.2f  %6.2f  %6.2f  %6.2f  %8.4f\n",
                  row.name.c_str(), row.metrics.accuracy, row.metrics.sensitivity,
                  row.metrics.specificity, row.metrics.precision, row.metrics.f1,
                  row.final_balance);
    out += buf;
  }
  return out;
}

}  // namespace brainnet
