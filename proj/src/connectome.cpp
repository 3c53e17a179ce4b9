#include "brainnet/connectome.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "brainnet/errors.hpp"

namespace brainnet {

namespace {

constexpr double kSymmetryTol = 1e-9;

bool parse_number(const std::string& tok, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(tok, &pos);
    return pos == tok.size();
  } catch (const std::exception&) {
    return false;
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) {
    // trim spaces
    std::size_t a = cur.find_first_not_of(" \t\r");
    std::size_t b = cur.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? "" : cur.substr(a, b - a + 1));
  }
  return out;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

}  // namespace

std::vector<std::string> default_region_labels(int n) {
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "R%03d", i);
    labels.emplace_back(buf);
  }
  return labels;
}

ConnectivityMatrix make_connectivity(Tensor values,
                                     std::vector<std::string> labels) {
  if (values.rank() != 2 || values.rows() != values.cols())
    throw ShapeError("connectivity matrix must be square");
  int n = values.rows();
  for (int i = 0; i < values.size(); ++i) {
    double v = values.at(i);
    if (!std::isfinite(v))
      throw ValueError("connectivity matrix contains a non-finite entry");
    if (v < 0.0)
      throw ValueError("connectivity matrix contains a negative entry");
  }
  double worst = 0.0;
  int wi = 0, wj = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double d = std::fabs(values.at(i, j) - values.at(j, i));
      if (d > worst) {
        worst = d;
        wi = i;
        wj = j;
      }
    }
  if (worst > kSymmetryTol) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "matrix not symmetric: |[%d,%d]-[%d,%d]| = %.3g exceeds %.0e",
                  wi, wj, wj, wi, worst, kSymmetryTol);
    throw SymmetryError(buf);
  }
  if (labels.empty()) labels = default_region_labels(n);
  if (static_cast<int>(labels.size()) != n)
    throw ShapeError("region label count does not match matrix size");
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (l.empty()) throw ValueError("empty region label");
    if (!seen.insert(l).second)
      throw ValueError("duplicate region label: " + l);
  }
  ConnectivityMatrix cm;
  cm.n_regions = n;
  cm.values = std::move(values);
  cm.region_labels = std::move(labels);
  return cm;
}

ConnectivityMatrix load_matrix(const std::string& path, MatrixFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open matrix file: " + path);
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> toks =
        format == MatrixFormat::csv ? split_csv(line) : split_ws(line);
    if (toks.empty()) continue;
    std::vector<double> vals;
    vals.reserve(toks.size());
    bool numeric = true;
    for (const auto& t : toks) {
      double v;
      if (!parse_number(t, v)) {
        numeric = false;
        break;
      }
      vals.push_back(v);
    }
    if (!numeric) {
      if (first) {
        labels = toks;  // optional header row of region labels
        first = false;
        continue;
      }
      throw ValueError("non-numeric entry in matrix body: " + path);
    }
    first = false;
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ValueError("matrix file has no data rows: " + path);
  std::size_t n = rows.size();
  for (const auto& r : rows)
    if (r.size() != n)
      throw ShapeError("matrix file is not square: " + path);
  std::vector<double> flat;
  flat.reserve(n * n);
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  Tensor values = Tensor::from({static_cast<int>(n), static_cast<int>(n)},
                               std::move(flat));
  return make_connectivity(std::move(values), std::move(labels));
}

void save_matrix(const ConnectivityMatrix& cm, const std::string& path,
                 MatrixFormat format) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write matrix file: " + path);
  const char* sep = format == MatrixFormat::csv ? "," : " ";
  if (format == MatrixFormat::csv) {
    for (int j = 0; j < cm.n_regions; ++j)
      out << (j ? sep : "") << cm.region_labels[static_cast<std::size_t>(j)];
    out << "\n";
  }
  char buf[48];
  for (int i = 0; i < cm.n_regions; ++i) {
    for (int j = 0; j < cm.n_regions; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", cm.values.at(i, j));
      out << (j ? sep : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing matrix file: " + path);
}

NormalizedConnectome log_normalize(const ConnectivityMatrix& sc) {
  int n = sc.n_regions;
  Tensor logv = Tensor::zeros({n, n});
  for (int i = 0; i < logv.size(); ++i)
    logv.data()[i] = std::log2(sc.values.at(i) + 1.0);
  double mu = 0.0;
  for (int i = 0; i < logv.size(); ++i) mu += logv.at(i);
  mu /= logv.size();
  double var = 0.0;
  for (int i = 0; i < logv.size(); ++i) {
    double d = logv.at(i) - mu;
    var += d * d;
  }
  var /= logv.size();  // population variance over all N^2 entries
  double sigma = std::sqrt(var);
  if (sigma == 0.0)
    throw DegenerateInputError(
        "log_normalize: constant matrix has zero variance");
  NormalizedConnectome nc;
  nc.values = Tensor::zeros({n, n});
  for (int i = 0; i < logv.size(); ++i)
    nc.values.data()[i] = (logv.at(i) - mu) / sigma;
  nc.mu = mu;
  nc.sigma = sigma;
  nc.region_labels = sc.region_labels;
  return nc;
}

SubNetworkBatch to_subnetworks(const NormalizedConnectome& nc,
                               const std::string& subject_id) {
  SubNetworkBatch batch;
  batch.subject_id = subject_id;
  batch.rows = nc.values.clone();  // row i = region i's connectivity profile
  batch.rows.set_requires_grad(false);
  return batch;
}

}  // namespace brainnet
