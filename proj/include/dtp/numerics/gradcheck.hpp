#pragma once

#include "dtp/numerics/autodiff.hpp"

#include <functional>
#include <string>
#include <vector>

namespace dtp {

template <typename Scalar>
using LossFn = std::function<Var<Scalar>(Graph<Scalar>&)>;

struct FdOptions {
  double step = 1e-3;
  double tolerance = 1e-4;
  /// <= 0 checks every entry; otherwise evenly spaced entries per parameter.
  Index max_entries_per_param = 0;
  /// When a +-step probe changes the branch signature of a nonsmooth op, the
  /// step is divided by 10 up to this many times. If no central probe stays on
  /// the base piece, the smallest-step second-order one-sided stencil that
  /// does is used; failing that the entry is skipped.
  int kink_refinements = 3;
};

struct ParamFdResult {
  std::string name;
  Index checked = 0;
  Index skipped = 0;
  Index one_sided = 0;  // checked entries that used the one-sided stencil
  double max_rel_error = 0.0;
  Index worst_entry = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool pass = true;
};

struct FdReport {
  std::vector<ParamFdResult> params;
  double tolerance = 0.0;

  bool pass() const;
  double max_rel_error() const;
  /// One line per parameter: name, checked, skipped, max rel err, PASS/FAIL.
  std::string format() const;
};

/// |a - b| / max(|a|, |b|, 1e-8)
double fd_relative_error(double analytic, double numeric);

/// Central finite differences against the tape gradient of `loss`, for every
/// learnable parameter of `store`. Throws std::runtime_error when two
/// evaluations of `loss` at the same parameters differ.
template <typename Scalar>
FdReport finite_diff_check(const LossFn<Scalar>& loss, ParamStore<Scalar>& store, const FdOptions& options = {});

/// Same, comparing against caller-supplied analytic gradients (store order).
template <typename Scalar>
FdReport finite_diff_check(const LossFn<Scalar>& loss, ParamStore<Scalar>& store,
                           const std::vector<Tensor<Scalar>>& analytic, const FdOptions& options = {});

extern template FdReport finite_diff_check(const LossFn<float>&, ParamStore<float>&, const FdOptions&);
extern template FdReport finite_diff_check(const LossFn<double>&, ParamStore<double>&, const FdOptions&);

}  // namespace dtp
