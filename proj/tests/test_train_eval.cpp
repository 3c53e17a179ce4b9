#include <cmath>
#include <sstream>

#include <doctest.h>

#include <json.hpp>

#include "brainnet/errors.hpp"
#include "brainnet/train_eval.hpp"

using namespace brainnet;

namespace {

SynthSpec tiny_spec() {
  SynthSpec spec;
  spec.n_regions = 10;
  spec.n_classes = 3;
  spec.subjects_per_class = 6;
  spec.seed = 3;
  return spec;
}

ModelConfig tiny_model(const SynthSpec& spec) {
  ModelConfig cfg;
  cfg.n_regions = spec.n_regions;
  cfg.n_classes = spec.n_classes;
  cfg.experts_per_group = 2;
  cfg.expert_hidden = 6;
  cfg.model_dim = 8;
  cfg.transformer_layers = 1;
  cfg.gate_hidden = 4;
  cfg.seed = 11;
  return cfg;
}

TrainConfig tiny_train() {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 5;
  cfg.lr = 3e-3;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("metrics_from_confusion: hand-worked oracles") {
  // perfect predictions
  MetricsReport perfect = metrics_from_confusion({{2, 0}, {0, 3}});
  CHECK(perfect.accuracy == doctest::Approx(100.0));
  CHECK(perfect.sensitivity == doctest::Approx(100.0));
  CHECK(perfect.specificity == doctest::Approx(100.0));
  CHECK(perfect.precision == doctest::Approx(100.0));
  CHECK(perfect.f1 == doctest::Approx(100.0));

  // class 2 always predicted as class 0
  MetricsReport r = metrics_from_confusion({{2, 0, 0}, {0, 2, 0}, {2, 0, 0}});
  CHECK(r.accuracy == doctest::Approx(100.0 * 4.0 / 6.0).epsilon(1e-9));
  CHECK(r.sensitivity == doctest::Approx(100.0 * 2.0 / 3.0).epsilon(1e-9));
  CHECK(std::fabs(r.accuracy - 66.67) < 0.005);
  CHECK(std::fabs(r.sensitivity - 66.67) < 0.005);

  // constant predictor on balanced 3-class data
  MetricsReport c = metrics_from_confusion({{2, 0, 0}, {2, 0, 0}, {2, 0, 0}});
  CHECK(c.accuracy == doctest::Approx(100.0 / 3.0).epsilon(1e-9));

  CHECK_THROWS_AS(metrics_from_confusion({{0, 0}, {0, 0}}), ValueError);
  CHECK_THROWS_AS(metrics_from_confusion({{1, 0}, {0}}), ShapeError);
}

TEST_CASE("macro metrics invariant under class relabeling") {
  std::vector<std::vector<int>> conf = {{5, 1, 2}, {0, 7, 1}, {3, 2, 6}};
  MetricsReport a = metrics_from_confusion(conf);
  // permute classes (0 1 2) -> (2 0 1) consistently on rows and columns
  std::vector<int> perm = {2, 0, 1};
  std::vector<std::vector<int>> permuted(3, std::vector<int>(3, 0));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      permuted[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]
              [static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])] =
          conf[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  MetricsReport b = metrics_from_confusion(permuted);
  CHECK(a.accuracy == doctest::Approx(b.accuracy).epsilon(1e-12));
  CHECK(a.sensitivity == doctest::Approx(b.sensitivity).epsilon(1e-12));
  CHECK(a.specificity == doctest::Approx(b.specificity).epsilon(1e-12));
  CHECK(a.precision == doctest::Approx(b.precision).epsilon(1e-12));
  CHECK(a.f1 == doctest::Approx(b.f1).epsilon(1e-12));
}

TEST_CASE("train: determinism, lr=0 fixed point, loss identity, logging") {
  SynthSpec spec = tiny_spec();
  Cohort cohort = split_stratified(generate(spec), 0.2, spec.seed);
  ModelConfig mcfg = tiny_model(spec);
  TrainConfig tcfg = tiny_train();

  // identical seeds give identical loss trajectories
  BrainNetMoE m1 = make_model(mcfg);
  BrainNetMoE m2 = make_model(mcfg);
  std::ostringstream log1, log2;
  TrainResult r1 = train(m1, cohort, tcfg, &log1);
  TrainResult r2 = train(m2, cohort, tcfg, &log2);
  REQUIRE(r1.steps.size() == r2.steps.size());
  for (std::size_t i = 0; i < r1.steps.size(); ++i)
    CHECK(r1.steps[i].losses.total == r2.steps[i].losses.total);
  CHECK(log1.str() == log2.str());
  CHECK(!r1.evals.empty());

  // breakdown identity at every step
  for (const auto& s : r1.steps) {
    double recombined = s.losses.cls + s.losses.alpha * s.losses.expert_diversity +
                        s.losses.beta * s.losses.disease_diversity +
                        s.losses.gamma * s.losses.expert_balance;
    CHECK(std::fabs(recombined - s.losses.total) <= 1e-9);
  }

  // every log line parses and carries the documented keys
  std::istringstream lines(log1.str());
  std::string line;
  int n_steps = 0, n_evals = 0;
  while (std::getline(lines, line)) {
    auto j = nlohmann::json::parse(line);
    if (j.at("type") == "step") {
      ++n_steps;
      for (const char* key : {"epoch", "step", "cls", "e_d", "d_d", "e_b", "total"})
        CHECK(j.contains(key));
    } else {
      ++n_evals;
      for (const char* key : {"epoch", "ACC", "SEN", "SPE", "PRE", "F1"})
        CHECK(j.contains(key));
    }
  }
  CHECK(n_steps == static_cast<int>(r1.steps.size()));
  CHECK(n_evals == static_cast<int>(r1.evals.size()));

  // lr = 0 leaves parameters untouched and metrics equal untrained metrics
  BrainNetMoE frozen = make_model(mcfg);
  MetricsReport untrained = evaluate(frozen, cohort, SplitKind::test);
  TrainConfig zero = tcfg;
  zero.lr = 0.0;
  zero.weight_decay = 0.0;
  BrainNetMoE reference = make_model(mcfg);
  train(frozen, cohort, zero, nullptr);
  auto pa = frozen.named_params();
  auto pb = reference.named_params();
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (int j = 0; j < pa[i].second.size(); ++j)
      CHECK(pa[i].second.at(j) == pb[i].second.at(j));
  MetricsReport after = evaluate(frozen, cohort, SplitKind::test);
  CHECK(after.accuracy == untrained.accuracy);

  // training for longer at a real lr reduces the total loss
  CHECK(r1.steps.back().losses.total < r1.steps.front().losses.total);
}

TEST_CASE("train guards: empty split and epochs=0") {
  SynthSpec spec = tiny_spec();
  Cohort no_split = generate(spec);
  BrainNetMoE model = make_model(tiny_model(spec));
  CHECK_THROWS_AS(train(model, no_split, tiny_train(), nullptr), StateError);

  Cohort cohort = split_stratified(no_split, 0.2, 1);
  TrainConfig none = tiny_train();
  none.epochs = 0;
  BrainNetMoE m = make_model(tiny_model(spec));
  BrainNetMoE ref = make_model(tiny_model(spec));
  TrainResult r = train(m, cohort, none, nullptr);
  CHECK(r.steps.empty());
  auto pa = m.named_params();
  auto pb = ref.named_params();
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (int j = 0; j < pa[i].second.size(); ++j)
      CHECK(pa[i].second.at(j) == pb[i].second.at(j));
}

TEST_CASE("evaluate splits differ and confusion row sums match counts") {
  SynthSpec spec = tiny_spec();
  spec.subjects_per_class = 8;
  Cohort cohort = split_stratified(generate(spec), 0.25, spec.seed);
  BrainNetMoE model = make_model(tiny_model(spec));
  MetricsReport train_rep = evaluate(model, cohort, SplitKind::train);
  MetricsReport test_rep = evaluate(model, cohort, SplitKind::test);

  long long train_total = 0, test_total = 0;
  std::vector<long long> row_sums(3, 0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      train_total += train_rep.confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      test_total += test_rep.confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      row_sums[static_cast<std::size_t>(i)] +=
          test_rep.confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  CHECK(train_total == static_cast<long long>(cohort.train_idx.size()));
  CHECK(test_total == static_cast<long long>(cohort.test_idx.size()));
  for (int c = 0; c < 3; ++c) CHECK(row_sums[static_cast<std::size_t>(c)] == 2);
}

TEST_CASE("ablation plans") {
  SynthSpec spec = tiny_spec();
  ModelConfig mcfg = tiny_model(spec);
  TrainConfig tcfg = tiny_train();
  tcfg.epochs = 1;

  AblationPlan plan = default_ablation_plan(mcfg, tcfg);
  REQUIRE(plan.variants.size() == 7);
  CHECK(plan.variants[0].model_cfg.experts_per_group == 2);
  CHECK(plan.variants[1].model_cfg.experts_per_group == 4);
  CHECK(plan.variants[2].model_cfg.loss_weights.alpha == 0.0);
  CHECK(plan.variants[3].model_cfg.loss_weights.beta == 0.0);
  CHECK(plan.variants[4].model_cfg.loss_weights.gamma == 0.0);
  CHECK(plan.variants[5].model_cfg.loss_weights.alpha == 0.0);
  CHECK(plan.variants[5].model_cfg.loss_weights.gamma == 0.0);
  CHECK(plan.variants[6].name == "full");

  Cohort cohort = split_stratified(generate(spec), 0.2, spec.seed);
  AblationPlan single;
  single.variants = {plan.variants[6]};
  int flushed = 0;
  auto rows = run_ablation(single, cohort, 1,
                           [&](const AblationRow&) { ++flushed; });
  CHECK(rows.size() == 1);
  CHECK(flushed == 1);
  CHECK(rows[0].name == "full");
  CHECK(rows[0].metrics.confusion.size() == 3);
  CHECK(rows[0].final_balance >= 0.0);
}

TEST_CASE("all-aux-losses-off training matches plain cross-entropy") {
  SynthSpec spec = tiny_spec();
  Cohort cohort = split_stratified(generate(spec), 0.2, spec.seed);
  ModelConfig mcfg = tiny_model(spec);
  mcfg.loss_weights.alpha = 0.0;
  mcfg.loss_weights.beta = 0.0;
  mcfg.loss_weights.gamma = 0.0;
  BrainNetMoE model = make_model(mcfg);
  TrainResult r = train(model, cohort, tiny_train(), nullptr);
  for (const auto& s : r.steps)
    CHECK(s.losses.total == doctest::Approx(s.losses.cls).epsilon(1e-12));
}

TEST_CASE("parallel ablation matches sequential results") {
  SynthSpec spec = tiny_spec();
  Cohort cohort = split_stratified(generate(spec), 0.2, spec.seed);
  ModelConfig mcfg = tiny_model(spec);
  TrainConfig tcfg = tiny_train();
  tcfg.epochs = 1;
  AblationPlan plan;
  plan.variants = {default_ablation_plan(mcfg, tcfg).variants[2],
                   default_ablation_plan(mcfg, tcfg).variants[6]};
  auto seq = run_ablation(plan, cohort, 1);
  auto par = run_ablation(plan, cohort, 2);
  REQUIRE(seq.size() == par.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    CHECK(seq[i].name == par[i].name);
    CHECK(seq[i].metrics.accuracy == par[i].metrics.accuracy);
    CHECK(seq[i].final_balance == par[i].final_balance);
  }
}
