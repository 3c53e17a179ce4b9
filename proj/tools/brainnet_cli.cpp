// Batch command-line entry point: synth | train | eval | explain | ablate.
// Exit codes: 0 success, 2 usage/config, 3 IO, 4 numerical failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "brainnet/checkpoint.hpp"
#include "brainnet/data_synth.hpp"
#include "brainnet/errors.hpp"
#include "brainnet/run_config.hpp"
#include "brainnet/train_eval.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace brainnet;

namespace {

constexpr const char* kToolVersion = "brainnet 0.1.0";

double round2(double v) { return std::round(v * 100.0) / 100.0; }

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write: " + path);
  out << content;
  if (!out) throw IoError("failed writing: " + path);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir);
}

json metrics_to_json(const MetricsReport& m) {
  return json{{"ACC", round2(m.accuracy)},   {"SEN", round2(m.sensitivity)},
              {"SPE", round2(m.specificity)}, {"PRE", round2(m.precision)},
              {"F1", round2(m.f1)},           {"confusion", m.confusion}};
}

json relevance_to_json(const RelevanceReport& rep,
                       const std::vector<std::string>& class_names) {
  json doc;
  doc["top_m"] = rep.top_m;
  doc["classes"] = class_names;
  doc["region_labels"] = rep.region_labels;
  json scores = json::array();
  for (int k = 0; k < rep.scores.rows(); ++k) {
    json row = json::array();
    for (int i = 0; i < rep.scores.cols(); ++i) row.push_back(rep.scores.at(k, i));
    scores.push_back(row);
  }
  doc["scores"] = scores;
  json per_class = json::array();
  for (const auto& entries : rep.top_per_class) {
    json lst = json::array();
    for (const auto& e : entries)
      lst.push_back(json{{"region", e.region},
                         {"label", rep.region_labels[static_cast<std::size_t>(e.region)]},
                         {"score", e.score}});
    per_class.push_back(lst);
  }
  doc["per_class"] = per_class;
  json contrasts = json::array();
  for (const auto& c : rep.contrasts) {
    json lst = json::array();
    for (const auto& e : c.top)
      lst.push_back(json{{"region", e.region},
                         {"label", rep.region_labels[static_cast<std::size_t>(e.region)]},
                         {"score", e.score}});
    contrasts.push_back(json{{"class_a", c.class_a},
                             {"class_b", c.class_b},
                             {"top", lst}});
  }
  doc["contrasts"] = contrasts;
  return doc;
}

std::string relevance_to_text(const RelevanceReport& rep,
                              const std::vector<std::string>& class_names) {
  std::ostringstream out;
  char buf[160];
  out << "per-class top-" << rep.top_m << " regions by relevance:\n";
  for (std::size_t k = 0; k < rep.top_per_class.size(); ++k) {
    out << "  " << class_names[k] << ":";
    for (const auto& e : rep.top_per_class[k]) {
      std::snprintf(buf, sizeof(buf), " %s (%.6f)",
                    rep.region_labels[static_cast<std::size_t>(e.region)].c_str(), e.score);
      out << buf;
    }
    out << "\n";
  }
  out << "pairwise contrasts, top-" << rep.top_m << " by |difference|:\n";
  for (const auto& c : rep.contrasts) {
    out << "  " << class_names[static_cast<std::size_t>(c.class_a)] << " vs "
        << class_names[static_cast<std::size_t>(c.class_b)] << ":";
    for (const auto& e : c.top) {
      std::snprintf(buf, sizeof(buf), " %s (%.6f)",
                    rep.region_labels[static_cast<std::size_t>(e.region)].c_str(), e.score);
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

Cohort load_cohort_with_split(const std::string& dir, const RunConfig& cfg) {
  Cohort cohort = import_cohort(dir);
  if (cohort.subjects.empty()) throw ValueError("cohort is empty: " + dir);
  if (!cohort.has_split())
    cohort = split_stratified(cohort, cfg.test_fraction, cfg.train.seed);
  return cohort;
}

// Model dims follow the cohort on disk; the config's n_regions/n_classes are
// generation-side settings.
void adapt_model_to_cohort(ModelConfig& mcfg, const Cohort& cohort) {
  mcfg.n_regions = cohort.subjects[0].matrix.n_regions;
  mcfg.n_classes = cohort.n_classes();
}

struct CommonFlags {
  std::string config_path;
  std::string cohort;
  std::string out;
  std::string checkpoint;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig cfg;
  if (!flags.config_path.empty()) cfg = load_run_config(flags.config_path);
  if (flags.seed_set) cfg.train.seed = flags.seed;
  cfg.sync();
  return cfg;
}

int run_synth(const CommonFlags& flags, const RunConfig& cfg) {
  if (flags.out.empty()) throw ConfigError("synth: --out is required");
  Cohort cohort = generate(cfg.synth);
  cohort = split_stratified(cohort, cfg.test_fraction, cfg.synth.seed);
  export_cohort(cohort, flags.out);
  std::printf("wrote %zu matrices (%d classes, %d regions) to %s\n",
              cohort.subjects.size(), cohort.n_classes(),
              cohort.subjects[0].matrix.n_regions, flags.out.c_str());
  return 0;
}

int run_train(const CommonFlags& flags, RunConfig cfg) {
  if (flags.cohort.empty()) throw ConfigError("train: --cohort is required");
  if (flags.out.empty()) throw ConfigError("train: --out is required");
  auto started = std::chrono::steady_clock::now();
  Cohort cohort = load_cohort_with_split(flags.cohort, cfg);
  adapt_model_to_cohort(cfg.model, cohort);

  ensure_dir(flags.out);
  std::string metrics_path = (fs::path(flags.out) / "metrics.jsonl").string();
  std::string ckpt_path = (fs::path(flags.out) / "checkpoint.json").string();
  std::string manifest_path = (fs::path(flags.out) / "run_manifest.json").string();

  BrainNetMoE model = make_model(cfg.model);
  std::ofstream log(metrics_path);
  if (!log) throw IoError("cannot write metrics log: " + metrics_path);
  TrainResult result = train(model, cohort, cfg.train, &log);
  log.close();
  save_checkpoint(model, ckpt_path);

  double seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - started)
                       .count();
  json manifest;
  manifest["tool"] = kToolVersion;
  manifest["command"] = "train";
  manifest["seed"] = cfg.train.seed;
  manifest["config"] = run_config_to_json(cfg);
  manifest["artifacts"] = json{{"checkpoint", ckpt_path},
                               {"checkpoint_blob", blob_path_for(ckpt_path)},
                               {"metrics_log", metrics_path}};
  manifest["duration_seconds"] = seconds;
  write_text(manifest_path, manifest.dump(2) + "\n");

  if (!result.evals.empty()) {
    const MetricsReport& last = result.evals.back().metrics;
    std::printf("trained %d epochs (%zu steps); final test ACC %.2f%%\n",
                cfg.train.epochs, result.steps.size(), last.accuracy);
    std::printf("%s", format_metrics_table(last, cohort.class_names).c_str());
  } else {
    std::printf("trained %d epochs (%zu steps)\n", cfg.train.epochs,
                result.steps.size());
  }
  return 0;
}

SplitKind parse_split(const std::string& split) {
  if (split == "train") return SplitKind::train;
  if (split == "test") return SplitKind::test;
  throw ConfigError("unknown split \"" + split + "\" (use train or test)");
}

int run_eval(const CommonFlags& flags, const RunConfig& cfg,
             const std::string& split) {
  if (flags.checkpoint.empty()) throw ConfigError("eval: --checkpoint is required");
  if (flags.cohort.empty()) throw ConfigError("eval: --cohort is required");
  BrainNetMoE model = load_checkpoint(flags.checkpoint);
  Cohort cohort = load_cohort_with_split(flags.cohort, cfg);
  if (model.config.n_regions != cohort.subjects[0].matrix.n_regions ||
      model.config.n_classes != cohort.n_classes())
    throw ShapeError("checkpoint does not match the cohort's regions/classes");
  MetricsReport report = evaluate(model, cohort, parse_split(split));
  std::printf("split: %s\n%s", split.c_str(),
              format_metrics_table(report, cohort.class_names).c_str());
  if (!flags.out.empty()) {
    json doc = metrics_to_json(report);
    doc["split"] = split;
    write_text(flags.out, doc.dump(2) + "\n");
  }
  return 0;
}

int run_explain(const CommonFlags& flags, const RunConfig& cfg,
                const std::string& split, int top_m) {
  if (flags.checkpoint.empty()) throw ConfigError("explain: --checkpoint is required");
  if (flags.cohort.empty()) throw ConfigError("explain: --cohort is required");
  if (top_m < 1) throw ConfigError("explain: --top must be >= 1");
  BrainNetMoE model = load_checkpoint(flags.checkpoint);
  Cohort cohort = load_cohort_with_split(flags.cohort, cfg);
  if (model.config.n_regions != cohort.subjects[0].matrix.n_regions ||
      model.config.n_classes != cohort.n_classes())
    throw ShapeError("checkpoint does not match the cohort's regions/classes");
  const std::vector<int>& idx =
      parse_split(split) == SplitKind::train ? cohort.train_idx : cohort.test_idx;
  if (idx.empty()) throw StateError("explain: requested split is empty");
  RelevanceReport rep =
      relevance_scores(model, prepare_subjects(cohort, idx), top_m,
                       cohort.subjects[0].matrix.region_labels);
  std::printf("%s", relevance_to_text(rep, cohort.class_names).c_str());
  if (!flags.out.empty())
    write_text(flags.out, relevance_to_json(rep, cohort.class_names).dump(2) + "\n");
  return 0;
}

int run_ablate(const CommonFlags& flags, const RunConfig& cfg,
               const std::string& experts_csv, bool no_loss_toggles, int jobs) {
  if (flags.cohort.empty()) throw ConfigError("ablate: --cohort is required");
  RunConfig local = cfg;
  Cohort cohort = load_cohort_with_split(flags.cohort, local);
  adapt_model_to_cohort(local.model, cohort);

  std::vector<int> expert_variants;
  std::stringstream ss(experts_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      expert_variants.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw ConfigError("ablate: bad --experts entry \"" + tok + "\"");
    }
  }

  AblationPlan full = default_ablation_plan(local.model, local.train);
  AblationPlan plan;
  for (int e : expert_variants) {
    AblationVariant v;
    v.name = "experts=" + std::to_string(e);
    v.model_cfg = local.model;
    v.model_cfg.experts_per_group = e;
    v.train_cfg = local.train;
    plan.variants.push_back(std::move(v));
  }
  if (!no_loss_toggles)
    for (std::size_t i = 2; i < full.variants.size(); ++i)
      plan.variants.push_back(full.variants[i]);
  if (plan.variants.empty()) throw ConfigError("ablate: plan has no variants");

  std::string out_json =
      flags.out.empty() ? std::string() : (fs::path(flags.out) / "ablation.json").string();
  std::string out_txt =
      flags.out.empty() ? std::string() : (fs::path(flags.out) / "ablation.txt").string();
  if (!flags.out.empty()) ensure_dir(flags.out);

  std::vector<AblationRow> done;
  auto flush = [&](const AblationRow& row) {
    done.push_back(row);
    std::printf("completed %s: ACC %.2f%%\n", row.name.c_str(), row.metrics.accuracy);
    std::fflush(stdout);
    if (flags.out.empty()) return;
    // rewrite with all completed rows so an interrupted run keeps its progress
    json doc;
    doc["tool"] = kToolVersion;
    json rows = json::array();
    for (const auto& r : done) {
      json jr = metrics_to_json(r.metrics);
      jr["variant"] = r.name;
      jr["expert_balance"] = r.final_balance;
      rows.push_back(jr);
    }
    doc["rows"] = rows;
    write_text(out_json, doc.dump(2) + "\n");
    write_text(out_txt, format_ablation_table(done));
  };

  std::vector<AblationRow> rows = run_ablation(plan, cohort, jobs, flush);
  // final files in plan order
  if (!flags.out.empty()) {
    done = rows;
    json doc;
    doc["tool"] = kToolVersion;
    json jrows = json::array();
    for (const auto& r : rows) {
      json jr = metrics_to_json(r.metrics);
      jr["variant"] = r.name;
      jr["expert_balance"] = r.final_balance;
      jrows.push_back(jr);
    }
    doc["rows"] = jrows;
    write_text(out_json, doc.dump(2) + "\n");
    write_text(out_txt, format_ablation_table(rows));
  }
  std::printf("%s", format_ablation_table(rows).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BrainNet-MoE: disease-specific mixture-of-experts over "
               "structural connectomes"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CommonFlags flags;
  std::string split = "test";
  int top_m = 3;
  int jobs = 1;
  std::string experts_csv = "2,4";
  bool no_loss_toggles = false;

  // synth-specific numeric flags write straight into an override list
  int regions = -1, classes = -1, per_class = -1, epochs = -1, batch_size = -1;
  double effect = 0.0, lr = 0.0, test_fraction = 0.0;
  bool effect_set = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", flags.config_path, "JSON run configuration");
    cmd->add_option("--seed", flags.seed, "root seed")->each([&](const std::string&) {
      flags.seed_set = true;
    });
    cmd->add_option("--out", flags.out, "output path");
    cmd->add_option("--cohort", flags.cohort, "cohort directory");
    cmd->add_option("--checkpoint", flags.checkpoint, "checkpoint manifest path");
    cmd->add_option("--jobs", jobs, "parallel variants (ablate)");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  add_common(synth);
  synth->add_option("--regions", regions, "regions per matrix");
  synth->add_option("--classes", classes, "number of classes");
  synth->add_option("--per-class", per_class, "subjects per class");
  synth->add_option("--effect-size", effect, "planted effect multiplier")
      ->each([&](const std::string&) { effect_set = true; });
  synth->add_option("--test-fraction", test_fraction, "held-out fraction");

  CLI::App* train_cmd = app.add_subcommand("train", "train on a cohort");
  add_common(train_cmd);
  train_cmd->add_option("--epochs", epochs, "training epochs");
  train_cmd->add_option("--batch-size", batch_size, "mini-batch size");
  train_cmd->add_option("--lr", lr, "learning rate");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd);
  eval_cmd->add_option("--split", split, "train or test");

  CLI::App* explain_cmd =
      app.add_subcommand("explain", "write relevance-score report");
  add_common(explain_cmd);
  explain_cmd->add_option("--split", split, "train or test");
  explain_cmd->add_option("--top", top_m, "regions per ranking");

  CLI::App* ablate_cmd = app.add_subcommand("ablate", "run the ablation grid");
  add_common(ablate_cmd);
  ablate_cmd->add_option("--experts", experts_csv, "comma list of expert counts");
  ablate_cmd->add_flag("--no-loss-toggles", no_loss_toggles,
                       "skip the loss-ablation rows");
  ablate_cmd->add_option("--epochs", epochs, "training epochs");
  ablate_cmd->add_option("--batch-size", batch_size, "mini-batch size");
  ablate_cmd->add_option("--lr", lr, "learning rate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = resolve_config(flags);
    if (regions > 0) cfg.model.n_regions = regions;
    if (classes > 0) cfg.model.n_classes = classes;
    if (per_class > 0) cfg.synth.subjects_per_class = per_class;
    if (effect_set) cfg.synth.effect_size = effect;
    if (test_fraction > 0.0) cfg.test_fraction = test_fraction;
    if (epochs >= 0) cfg.train.epochs = epochs;
    if (batch_size > 0) cfg.train.batch_size = batch_size;
    if (lr > 0.0) cfg.train.lr = lr;
    cfg.sync();

    if (synth->parsed()) return run_synth(flags, cfg);
    if (train_cmd->parsed()) return run_train(flags, cfg);
    if (eval_cmd->parsed()) return run_eval(flags, cfg, split);
    if (explain_cmd->parsed()) return run_explain(flags, cfg, split, top_m);
    if (ablate_cmd->parsed())
      return run_ablate(flags, cfg, experts_csv, no_loss_toggles, jobs);
    std::fprintf(stderr, "no subcommand given\n");
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 4;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const CorruptCheckpointError& e) {
    std::fprintf(stderr, "corrupt checkpoint: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 1;
  }
}
