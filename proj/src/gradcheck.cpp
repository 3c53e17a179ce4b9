#include "brainnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include "brainnet/errors.hpp"
#include "brainnet/rng.hpp"

namespace brainnet {

GradCheckReport grad_check_report(const std::function<Tensor(Tape*)>& f,
                                  const std::vector<Tensor>& params,
                                  GradCheckOptions opts) {
  if (params.empty()) throw StateError("grad_check: no parameters");
  std::vector<Tensor> ps = params;

  for (auto& p : ps) p.zero_grad();
  Tape tape;
  Tensor loss = f(&tape);
  if (loss.size() != 1) throw ShapeError("grad_check: f must return a scalar");
  tape.backward(loss);

  std::vector<std::vector<double>> analytic(ps.size());
  long long total = 0;
  for (std::size_t p = 0; p < ps.size(); ++p) {
    const double* g = ps[p].grad_data();
    analytic[p].assign(static_cast<std::size_t>(ps[p].size()), 0.0);
    if (g) std::copy(g, g + ps[p].size(), analytic[p].begin());
    for (double a : analytic[p])
      if (!std::isfinite(a))
        throw NumericalError("grad_check: non-finite analytic gradient");
    total += ps[p].size();
  }

  // Coordinate sample: one per parameter tensor, then uniform fill.
  std::vector<std::pair<int, int>> coords;
  Rng rng(opts.seed);
  for (std::size_t p = 0; p < ps.size(); ++p)
    coords.emplace_back(static_cast<int>(p),
                        static_cast<int>(rng.below(static_cast<std::uint64_t>(
                            ps[p].size()))));
  long long want = std::min<long long>(opts.min_coords, total);
  while (static_cast<long long>(coords.size()) < want) {
    int p = static_cast<int>(rng.below(ps.size()));
    int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(ps[static_cast<std::size_t>(p)].size())));
    coords.emplace_back(p, i);
  }

  GradCheckReport report;
  report.n_checked = static_cast<int>(coords.size());
  double h = opts.step;
  for (auto [p, i] : coords) {
    Tensor& t = ps[static_cast<std::size_t>(p)];
    double saved = t.at(i);
    t.at(i) = saved + h;
    double fp = f(nullptr).item();
    t.at(i) = saved - h;
    double fm = f(nullptr).item();
    t.at(i) = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericalError("grad_check: non-finite probe value");
    double numeric = (fp - fm) / (2.0 * h);
    double a = analytic[static_cast<std::size_t>(p)][static_cast<std::size_t>(i)];
    double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
    double rel = std::fabs(a - numeric) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      char buf[160];
      std::snprintf(buf, sizeof(buf), "param %d idx %d analytic=%.12g numeric=%.12g",
                    p, i, a, numeric);
      report.worst = buf;
    }
  }
  return report;
}

double grad_check(const std::function<Tensor(Tape*)>& f,
                  const std::vector<Tensor>& params, GradCheckOptions opts) {
  return grad_check_report(f, params, opts).max_rel_error;
}

}  // namespace brainnet
