#include "brainnet/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "brainnet/errors.hpp"
#include "brainnet/rng.hpp"

namespace brainnet {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::vector<int>> SynthSpec::resolved_planted() const {
  if (!planted_regions.empty()) return planted_regions;
  std::vector<std::vector<int>> out;
  for (int c = 0; c < n_classes; ++c) out.push_back({2 * c, 2 * c + 1});
  return out;
}

void SynthSpec::validate() const {
  if (n_regions < 2) throw SpecError("synth spec: n_regions must be >= 2");
  if (n_classes < 2) throw SpecError("synth spec: n_classes must be >= 2");
  if (subjects_per_class < 1)
    throw SpecError("synth spec: subjects_per_class must be >= 1");
  if (effect_size <= 0.0) throw SpecError("synth spec: effect_size must be > 0");
  if (effect_size == 1.0)
    throw SpecError("synth spec: effect_size 1.0 plants no signal");
  if (base_scale <= 0.0) throw SpecError("synth spec: base_scale must be > 0");
  if (dispersion <= 0.0) throw SpecError("synth spec: dispersion must be > 0");
  auto planted = resolved_planted();
  if (static_cast<int>(planted.size()) != n_classes)
    throw SpecError("synth spec: planted_regions must list one set per class");
  std::set<int> seen;
  for (const auto& regions : planted) {
    if (regions.empty()) throw SpecError("synth spec: empty planted set");
    for (int r : regions) {
      if (r < 0 || r >= n_regions)
        throw SpecError("synth spec: planted region out of range");
      if (!seen.insert(r).second)
        throw SpecError("synth spec: planted regions overlap across classes");
    }
  }
}

Cohort generate(const SynthSpec& spec) {
  spec.validate();
  auto planted = spec.resolved_planted();
  Rng root = Rng(spec.seed).stream("data");
  double log_scale = std::log(spec.base_scale);

  Cohort cohort;
  for (int c = 0; c < spec.n_classes; ++c) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "C%d", c);
    cohort.class_names.emplace_back(buf);
  }

  int n = spec.n_regions;
  std::uint64_t global = 0;
  for (int c = 0; c < spec.n_classes; ++c) {
    std::vector<bool> is_planted(static_cast<std::size_t>(n), false);
    for (int r : planted[static_cast<std::size_t>(c)])
      is_planted[static_cast<std::size_t>(r)] = true;
    for (int s = 0; s < spec.subjects_per_class; ++s, ++global) {
      Rng rng = root.stream("subject", global);
      Tensor m = Tensor::zeros({n, n});
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          double raw =
              std::exp(log_scale + spec.dispersion * rng.normal());
          double v = std::round(raw);
          int hits = (is_planted[static_cast<std::size_t>(i)] ? 1 : 0) +
                     (is_planted[static_cast<std::size_t>(j)] ? 1 : 0);
          for (int h = 0; h < hits; ++h) v *= spec.effect_size;
          m.at(i, j) = v;
          m.at(j, i) = v;
        }
      char id[32];
      std::snprintf(id, sizeof(id), "c%d_s%03d", c, s);
      Subject subj;
      subj.matrix = make_connectivity(std::move(m));
      subj.label = c;
      subj.subject_id = id;
      cohort.subjects.push_back(std::move(subj));
    }
  }
  return cohort;
}

Cohort split_stratified(const Cohort& cohort, double test_fraction,
                        std::uint64_t seed) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0)
    throw SpecError("split: test_fraction must be in (0, 1)");
  int k = cohort.n_classes();
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i)
    by_class[static_cast<std::size_t>(cohort.subjects[i].label)].push_back(
        static_cast<int>(i));

  Cohort out = cohort;
  out.train_idx.clear();
  out.test_idx.clear();
  Rng rng = Rng(seed).stream("split");
  for (int c = 0; c < k; ++c) {
    auto& idx = by_class[static_cast<std::size_t>(c)];
    if (idx.size() < 2)
      throw SpecError("split: class " + cohort.class_names[static_cast<std::size_t>(c)] +
                      " has fewer than 2 subjects");
    // Fisher-Yates with the split stream.
    for (std::size_t i = idx.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
      std::swap(idx[i], idx[j]);
    }
    int n_test = static_cast<int>(std::lround(test_fraction * static_cast<double>(idx.size())));
    n_test = std::max(1, std::min(n_test, static_cast<int>(idx.size()) - 1));
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < static_cast<std::size_t>(n_test) ? out.test_idx : out.train_idx)
          .push_back(idx[i]);
  }
  std::sort(out.train_idx.begin(), out.train_idx.end());
  std::sort(out.test_idx.begin(), out.test_idx.end());
  return out;
}

void export_cohort(const Cohort& cohort, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create cohort directory: " + dir);

  json labels;
  labels["classes"] = cohort.class_names;
  labels["n_regions"] =
      cohort.subjects.empty() ? 0 : cohort.subjects[0].matrix.n_regions;
  json subjects = json::array();
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
    const Subject& s = cohort.subjects[i];
    json rec;
    rec["subject_id"] = s.subject_id;
    rec["class"] = s.label;
    bool in_train = std::binary_search(cohort.train_idx.begin(),
                                       cohort.train_idx.end(), static_cast<int>(i));
    bool in_test = std::binary_search(cohort.test_idx.begin(),
                                      cohort.test_idx.end(), static_cast<int>(i));
    rec["split"] = in_train ? "train" : (in_test ? "test" : "none");
    subjects.push_back(rec);
    save_matrix(s.matrix, (fs::path(dir) / (s.subject_id + ".csv")).string(),
                MatrixFormat::csv);
  }
  labels["subjects"] = subjects;
  std::ofstream out(fs::path(dir) / "labels.json");
  if (!out) throw IoError("cannot write labels manifest in: " + dir);
  out << labels.dump(2) << "\n";
  if (!out) throw IoError("failed writing labels manifest in: " + dir);
}

Cohort import_cohort(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "labels.json");
  if (!in) throw IoError("cannot open labels manifest in: " + dir);
  json labels;
  try {
    in >> labels;
  } catch (const json::exception& e) {
    throw ValueError(std::string("unparseable labels manifest: ") + e.what());
  }
  Cohort cohort;
  cohort.class_names = labels.at("classes").get<std::vector<std::string>>();
  for (const auto& rec : labels.at("subjects")) {
    Subject s;
    s.subject_id = rec.at("subject_id").get<std::string>();
    s.label = rec.at("class").get<int>();
    if (s.label < 0 || s.label >= cohort.n_classes())
      throw ValueError("labels manifest: class index out of range for " +
                       s.subject_id);
    s.matrix = load_matrix((fs::path(dir) / (s.subject_id + ".csv")).string(),
                           MatrixFormat::csv);
    std::string split = rec.value("split", "none");
    int idx = static_cast<int>(cohort.subjects.size());
    if (split == "train") cohort.train_idx.push_back(idx);
    if (split == "test") cohort.test_idx.push_back(idx);
    cohort.subjects.push_back(std::move(s));
  }
  return cohort;
}

std::vector<SubNetworkBatch> prepare_subjects(const Cohort& cohort,
                                              const std::vector<int>& idx) {
  std::vector<SubNetworkBatch> out;
  out.reserve(idx.size());
  for (int i : idx) {
    const Subject& s = cohort.subjects[static_cast<std::size_t>(i)];
    out.push_back(to_subnetworks(log_normalize(s.matrix), s.subject_id));
  }
  return out;
}

std::vector<int> labels_for(const Cohort& cohort, const std::vector<int>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (int i : idx)
    out.push_back(cohort.subjects[static_cast<std::size_t>(i)].label);
  return out;
}

}  // namespace brainnet
