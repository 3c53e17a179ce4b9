#pragma once

#include <string>
#include <vector>

#include "brainnet/tensor.hpp"

namespace brainnet {

// Raw structural connectivity: symmetric nonnegative fiber-count matrix with
// one label per region. Validated on construction.
struct ConnectivityMatrix {
  int n_regions = 0;
  Tensor values;  // [N x N]
  std::vector<std::string> region_labels;
};

// Result of log2(v+1) followed by whole-matrix z-scoring. mu/sigma are the
// statistics of the log-transformed matrix that were actually used.
struct NormalizedConnectome {
  Tensor values;  // [N x N], zero mean / unit population std
  double mu = 0.0;
  double sigma = 0.0;
  std::vector<std::string> region_labels;
};

// Per-subject sequence of sub-networks: row i is region i's normalized
// connectivity to every region.
struct SubNetworkBatch {
  std::string subject_id;
  Tensor rows;  // [N x N]
};

enum class MatrixFormat { csv, dense_text };

// Validates invariants (square, nonnegative, finite, symmetric within 1e-9,
// unique non-empty labels) and throws ShapeError / ValueError / SymmetryError.
ConnectivityMatrix make_connectivity(Tensor values,
                                     std::vector<std::string> labels = {});

ConnectivityMatrix load_matrix(const std::string& path, MatrixFormat format);

// Writes `cm` in the given format (csv includes a label header row).
void save_matrix(const ConnectivityMatrix& cm, const std::string& path,
                 MatrixFormat format);

NormalizedConnectome log_normalize(const ConnectivityMatrix& sc);

SubNetworkBatch to_subnetworks(const NormalizedConnectome& nc,
                               const std::string& subject_id);

// "R000", "R001", ...
std::vector<std::string> default_region_labels(int n);

}  // namespace brainnet
