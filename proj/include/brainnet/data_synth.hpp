#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "brainnet/connectome.hpp"

namespace brainnet {

// Synthetic structural-connectivity cohort with planted, class-specific
// sub-network signatures: base fiber counts are lognormal (skewed, like real
// SC), and each class multiplies its planted rows/columns by effect_size.
struct SynthSpec {
  int n_regions = 32;
  int n_classes = 3;
  int subjects_per_class = 50;
  // Per-class region indices; empty selects the default 2 per class, disjoint.
  std::vector<std::vector<int>> planted_regions;
  double effect_size = 1.6;
  double base_scale = 50.0;  // median fiber count
  double dispersion = 0.35;  // lognormal sigma (log-space std)
  std::uint64_t seed = 42;

  std::vector<std::vector<int>> resolved_planted() const;
  void validate() const;
};

struct Subject {
  ConnectivityMatrix matrix;
  int label = 0;
  std::string subject_id;
};

struct Cohort {
  std::vector<Subject> subjects;
  std::vector<std::string> class_names;
  std::vector<int> train_idx, test_idx;

  bool has_split() const { return !train_idx.empty() || !test_idx.empty(); }
  int n_classes() const { return static_cast<int>(class_names.size()); }
};

Cohort generate(const SynthSpec& spec);

// Per-class proportional split; test count per class is rounded to nearest
// and at least 1. Same (cohort, fraction, seed) always gives the same split.
Cohort split_stratified(const Cohort& cohort, double test_fraction,
                        std::uint64_t seed);

// Directory layout: one CSV matrix per subject plus labels.json.
void export_cohort(const Cohort& cohort, const std::string& dir);
Cohort import_cohort(const std::string& dir);

// Normalized sub-network batches for a set of subject indices.
std::vector<SubNetworkBatch> prepare_subjects(const Cohort& cohort,
                                              const std::vector<int>& idx);
std::vector<int> labels_for(const Cohort& cohort, const std::vector<int>& idx);

}  // namespace brainnet
