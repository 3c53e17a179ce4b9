#include "brainnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "brainnet/errors.hpp"
#include "brainnet/ops.hpp"
#include "brainnet/rng.hpp"

namespace brainnet {

void ModelConfig::validate() const {
  if (n_regions <= 0 || n_classes <= 0 || expert_hidden <= 0 ||
      model_dim <= 0 || transformer_layers <= 0 || gate_hidden <= 0)
    throw ShapeError("model config: all dimensions must be positive");
  if (experts_per_group < 2)
    throw ShapeError("model config: experts_per_group must be >= 2");
  if (attention_heads <= 0 || model_dim % attention_heads != 0)
    throw ShapeError("model config: model_dim must be divisible by attention_heads");
  loss_weights.validate();
}

BrainNetMoE make_model(const ModelConfig& cfg) {
  cfg.validate();
  BrainNetMoE m;
  m.config = cfg;
  m.loss_weights = cfg.loss_weights;
  if (m.loss_weights.learnable) m.loss_weights.init_learnable();

  Rng init = Rng(cfg.seed).stream("init");
  for (int k = 0; k < cfg.n_classes; ++k)
    m.groups.push_back(make_expert_group(cfg.n_regions, cfg.expert_hidden,
                                         cfg.model_dim, cfg.experts_per_group,
                                         init));
  m.gate = make_disease_gate(cfg.n_regions, cfg.gate_hidden, cfg.n_classes, init);

  m.region_embedding = Tensor::zeros({cfg.n_regions, cfg.model_dim});
  double bound = std::sqrt(6.0 / (cfg.n_regions + cfg.model_dim));
  for (int i = 0; i < m.region_embedding.size(); ++i)
    m.region_embedding.data()[i] = init.uniform(-bound, bound);
  m.region_embedding.set_requires_grad(true);

  for (int l = 0; l < cfg.transformer_layers; ++l)
    m.transformer.push_back(
        make_transformer_layer(cfg.model_dim, cfg.attention_heads, init));

  m.cls1 = make_dense(cfg.model_dim, cfg.model_dim, init);
  m.cls2 = make_dense(cfg.model_dim, cfg.n_classes, init);
  return m;
}

namespace {

void push_dense(std::vector<std::pair<std::string, Tensor>>& out,
                const std::string& prefix, const DenseLayer& d) {
  out.emplace_back(prefix + ".weight", d.weight);
  out.emplace_back(prefix + ".bias", d.bias);
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> BrainNetMoE::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  char buf[96];
  for (std::size_t k = 0; k < groups.size(); ++k) {
    for (std::size_t e = 0; e < groups[k].experts.size(); ++e) {
      std::snprintf(buf, sizeof(buf), "group.%zu.expert.%zu.dense.0", k, e);
      push_dense(out, buf, groups[k].experts[e].fc1);
      std::snprintf(buf, sizeof(buf), "group.%zu.expert.%zu.dense.1", k, e);
      push_dense(out, buf, groups[k].experts[e].fc2);
    }
    std::snprintf(buf, sizeof(buf), "group.%zu.gate", k);
    push_dense(out, buf, groups[k].gate);
  }
  push_dense(out, "disease_gate.dense.0", gate.layer1);
  push_dense(out, "disease_gate.dense.1", gate.layer2);
  out.emplace_back("region_embedding", region_embedding);
  for (std::size_t l = 0; l < transformer.size(); ++l) {
    const TransformerLayer& t = transformer[l];
    std::snprintf(buf, sizeof(buf), "transformer.%zu", l);
    std::string p = buf;
    push_dense(out, p + ".query", t.query);
    out.emplace_back(p + ".key.weight", t.key_weight);
    push_dense(out, p + ".value", t.value);
    push_dense(out, p + ".output", t.output);
    push_dense(out, p + ".ff.0", t.ff1);
    push_dense(out, p + ".ff.1", t.ff2);
    out.emplace_back(p + ".ln1.scale", t.ln1_scale);
    out.emplace_back(p + ".ln1.shift", t.ln1_shift);
    out.emplace_back(p + ".ln2.scale", t.ln2_scale);
    out.emplace_back(p + ".ln2.shift", t.ln2_shift);
  }
  push_dense(out, "classifier.dense.0", cls1);
  push_dense(out, "classifier.dense.1", cls2);
  if (loss_weights.learnable) {
    out.emplace_back("loss.alpha_raw", loss_weights.alpha_raw);
    out.emplace_back("loss.beta_raw", loss_weights.beta_raw);
    out.emplace_back("loss.gamma_raw", loss_weights.gamma_raw);
  }
  return out;
}

std::vector<Tensor> BrainNetMoE::params() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

ForwardResult forward(Tape* tape, const BrainNetMoE& model,
                      const std::vector<SubNetworkBatch>& batch) {
  const ModelConfig& cfg = model.config;
  if (batch.empty()) throw StateError("forward: empty batch");
  ForwardResult result;
  result.trace.expert_probs.resize(static_cast<std::size_t>(cfg.n_classes));

  std::vector<Tensor> logit_rows, pooled_rows, mean_dw_rows;
  logit_rows.reserve(batch.size());
  pooled_rows.reserve(batch.size());
  mean_dw_rows.reserve(batch.size());

  for (const SubNetworkBatch& subject : batch) {
    const Tensor& x = subject.rows;
    if (x.rank() != 2 || x.rows() != cfg.n_regions || x.cols() != cfg.n_regions)
      throw ShapeError("forward: subject region count does not match model");

    std::vector<Tensor> group_reps;
    group_reps.reserve(model.groups.size());
    for (std::size_t k = 0; k < model.groups.size(); ++k) {
      Tensor probs;
      Tensor rep = moe_forward_all(tape, model.groups[k], x, &probs);
      result.trace.expert_probs[k].push_back(probs);
      group_reps.push_back(rep);
    }

    Tensor dw = disease_weights_all(tape, model.gate, x);
    result.trace.disease_weights.push_back(dw);
    mean_dw_rows.push_back(col_mean(tape, dw));

    Tensor informed = mixture(tape, dw, group_reps);
    Tensor tokens = add(tape, informed, model.region_embedding);
    for (const auto& layer : model.transformer)
      tokens = transformer_forward(tape, layer, tokens);

    Tensor pooled = col_mean(tape, tokens);
    pooled_rows.push_back(pooled);

    Tensor h = dense_forward(tape, model.cls1, pooled);
    h = gelu(tape, h);
    logit_rows.push_back(dense_forward(tape, model.cls2, h));
  }

  result.logits = logit_rows.size() == 1 ? logit_rows[0]
                                         : concat_rows(tape, logit_rows);
  result.pooled = pooled_rows.size() == 1 ? pooled_rows[0]
                                          : concat_rows(tape, pooled_rows);
  result.mean_disease_weights = mean_dw_rows.size() == 1
                                    ? mean_dw_rows[0]
                                    : concat_rows(tape, mean_dw_rows);
  return result;
}

std::vector<int> predict_from_logits(const Tensor& logits) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(logits.rows()));
  for (int i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (int j = 1; j < logits.cols(); ++j)
      if (logits.at(i, j) > logits.at(i, best)) best = j;
    out.push_back(best);
  }
  return out;
}

std::vector<int> predict(const BrainNetMoE& model,
                         const std::vector<SubNetworkBatch>& batch) {
  return predict_from_logits(forward(nullptr, model, batch).logits);
}

RelevanceReport relevance_scores(const BrainNetMoE& model,
                                 const std::vector<SubNetworkBatch>& subjects,
                                 int top_m,
                                 std::vector<std::string> region_labels) {
  if (subjects.empty()) throw StateError("relevance_scores: empty split");
  const int n = model.config.n_regions;
  const int k_classes = model.config.n_classes;

  RelevanceReport report;
  report.top_m = top_m;
  if (region_labels.empty()) region_labels = default_region_labels(n);
  if (static_cast<int>(region_labels.size()) != n)
    throw ShapeError("relevance_scores: region label count mismatch");
  report.region_labels = std::move(region_labels);
  report.scores = Tensor::zeros({k_classes, n});

  for (const SubNetworkBatch& subject : subjects) {
    ForwardResult r = forward(nullptr, model, {subject});
    const Tensor& dw = r.trace.disease_weights[0];  // [N x K]
    for (int k = 0; k < k_classes; ++k) {
      const Tensor& probs = r.trace.expert_probs[static_cast<std::size_t>(k)][0];
      for (int i = 0; i < n; ++i) {
        double mx = 0.0;
        for (int e = 0; e < probs.cols(); ++e)
          mx = std::max(mx, probs.at(i, e));
        report.scores.at(k, i) += dw.at(i, k) * mx;
      }
    }
  }
  for (int i = 0; i < report.scores.size(); ++i)
    report.scores.data()[i] /= static_cast<double>(subjects.size());

  auto ranked = [&](const std::vector<double>& s) {
    std::vector<RelevanceEntry> entries;
    entries.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
      entries.push_back({static_cast<int>(i), s[i]});
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RelevanceEntry& a, const RelevanceEntry& b) {
                       if (a.score != b.score) return a.score > b.score;
                       return a.region < b.region;
                     });
    entries.resize(std::min<std::size_t>(entries.size(),
                                         static_cast<std::size_t>(top_m)));
    return entries;
  };

  for (int k = 0; k < k_classes; ++k) {
    std::vector<double> s(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = report.scores.at(k, i);
    report.top_per_class.push_back(ranked(s));
  }
  for (int a = 0; a < k_classes; ++a)
    for (int b = a + 1; b < k_classes; ++b) {
      std::vector<double> s(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i)
        s[static_cast<std::size_t>(i)] =
            std::fabs(report.scores.at(a, i) - report.scores.at(b, i));
      RelevanceContrast c;
      c.class_a = a;
      c.class_b = b;
      c.top = ranked(s);
      report.contrasts.push_back(std::move(c));
    }
  return report;
}

}  // namespace brainnet
