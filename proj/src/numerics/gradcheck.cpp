#include "dtp/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace dtp {

bool FdReport::pass() const {
  return std::all_of(params.begin(), params.end(), [](const ParamFdResult& r) { return r.pass; });
}

double FdReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& r : params) m = std::max(m, r.max_rel_error);
  return m;
}

std::string FdReport::format() const {
  std::ostringstream os;
  char line[256];
  for (const auto& r : params) {
    std::snprintf(line, sizeof line, "%-28s checked=%-6lld one_sided=%-4lld skipped=%-4lld max_rel_err=%.3e %s\n",
                  r.name.c_str(), static_cast<long long>(r.checked), static_cast<long long>(r.one_sided),
                  static_cast<long long>(r.skipped), r.max_rel_error,
                  r.pass ? "PASS" : "FAIL");
    os << line;
  }
  std::snprintf(line, sizeof line, "overall max_rel_err=%.3e tol=%.1e %s\n", max_rel_error(), tolerance,
                pass() ? "PASS" : "FAIL");
  os << line;
  return os.str();
}

double fd_relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

template <typename Scalar>
struct Probe {
  double value;
  std::uint64_t signature;
};

template <typename Scalar>
Probe<Scalar> evaluate(const LossFn<Scalar>& loss, const ParamStore<Scalar>& store) {
  BranchTrace trace;
  BranchTraceScope scope(trace);
  Graph<Scalar> graph(store);
  const Var<Scalar> out = loss(graph);
  if (out.value().size() != 1) throw ShapeError("finite_diff_check: loss must be a scalar");
  return {static_cast<double>(out.value()[0]), trace.signature()};
}

std::vector<Index> sample_entries(Index size, Index limit) {
  std::vector<Index> idx;
  if (limit <= 0 || size <= limit) {
    idx.resize(static_cast<std::size_t>(size));
    for (Index i = 0; i < size; ++i) idx[static_cast<std::size_t>(i)] = i;
    return idx;
  }
  for (Index k = 0; k < limit; ++k) idx.push_back(k * size / limit);
  return idx;
}

}  // namespace

template <typename Scalar>
FdReport finite_diff_check(const LossFn<Scalar>& loss, ParamStore<Scalar>& store,
                           const std::vector<Tensor<Scalar>>& analytic, const FdOptions& options) {
  if (!(options.step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
  if (static_cast<Index>(analytic.size()) != store.size()) {
    throw std::invalid_argument("finite_diff_check: analytic gradient count does not match the store");
  }
  const Probe<Scalar> base = evaluate(loss, store);
  const Probe<Scalar> again = evaluate(loss, store);
  if (base.value != again.value || base.signature != again.signature) {
    throw std::runtime_error("finite_diff_check: loss is not deterministic");
  }

  FdReport report;
  report.tolerance = options.tolerance;
  for (Index p = 0; p < store.size(); ++p) {
    auto& entry = store.entry(p);
    if (!entry.learnable) continue;
    ParamFdResult res;
    res.name = entry.name;
    for (Index i : sample_entries(entry.value.size(), options.max_entries_per_param)) {
      const Scalar original = entry.value[i];
      double h = options.step;
      bool resolved = false, one_sided = false;
      double numeric = 0.0;
      for (int attempt = 0; attempt <= options.kink_refinements && !resolved; ++attempt, h /= 10.0) {
        entry.value[i] = static_cast<Scalar>(static_cast<double>(original) + h);
        const Probe<Scalar> up = evaluate(loss, store);
        entry.value[i] = static_cast<Scalar>(static_cast<double>(original) - h);
        const Probe<Scalar> down = evaluate(loss, store);
        const bool up_ok = up.signature == base.signature, down_ok = down.signature == base.signature;
        if (up_ok && down_ok) {
          numeric = (up.value - down.value) / (2.0 * h);
          resolved = true;
          one_sided = false;
        } else if (up_ok || down_ok) {
          // Second-order one-sided stencil on the side that stays on the base
          // piece; kept only if no smaller step gives a clean central probe.
          const double dir = up_ok ? 1.0 : -1.0;
          entry.value[i] = static_cast<Scalar>(static_cast<double>(original) + 2.0 * dir * h);
          const Probe<Scalar> far = evaluate(loss, store);
          if (far.signature == base.signature) {
            const double near = up_ok ? up.value : down.value;
            numeric = dir * (4.0 * (near - base.value) - (far.value - base.value)) / (2.0 * h);
            one_sided = true;
          }
        }
        entry.value[i] = original;
      }
      resolved = resolved || one_sided;
      if (one_sided) ++res.one_sided;
      if (!resolved) {
        ++res.skipped;
        continue;
      }
      ++res.checked;
      const double a = static_cast<double>(analytic[static_cast<std::size_t>(p)][i]);
      const double err = fd_relative_error(a, numeric);
      if (err > res.max_rel_error || res.worst_entry < 0) {
        res.max_rel_error = std::max(err, res.max_rel_error);
        res.worst_entry = i;
        res.worst_analytic = a;
        res.worst_numeric = numeric;
      }
    }
    res.pass = res.max_rel_error <= options.tolerance && res.checked > 0;
    report.params.push_back(std::move(res));
  }
  return report;
}

template <typename Scalar>
FdReport finite_diff_check(const LossFn<Scalar>& loss, ParamStore<Scalar>& store, const FdOptions& options) {
  Graph<Scalar> graph(store);
  const auto grads = graph.gradients(loss(graph));
  return finite_diff_check(loss, store, grads, options);
}

template FdReport finite_diff_check(const LossFn<float>&, ParamStore<float>&, const FdOptions&);
template FdReport finite_diff_check(const LossFn<double>&, ParamStore<double>&, const FdOptions&);
template FdReport finite_diff_check(const LossFn<float>&, ParamStore<float>&, const std::vector<Tensor<float>>&,
                                    const FdOptions&);
template FdReport finite_diff_check(const LossFn<double>&, ParamStore<double>&,
                                    const std::vector<Tensor<double>>&, const FdOptions&);

}  // namespace dtp
