#pragma once

// Finite-difference check of the full model loss against the tape gradient,
// reported per parameter and per parameter group.

#include "dtp/numerics/gradcheck.hpp"
#include "dtp/pipeline/config.hpp"

#include <string>
#include <vector>

namespace dtp::pipeline {

/// fsd.theta, fsd.alpha, sdr.nr, sdr.stack, csr.fusion, csr.decoder
std::string param_group(const std::string& name);

struct GroupResult {
  std::string group;
  Index params = 0;
  Index checked = 0;
  double max_rel_error = 0.0;
  bool pass = true;
};

struct ModelGradcheck {
  FdReport report;
  std::vector<GroupResult> groups;

  bool pass() const;
  /// Per-parameter lines, per-group lines, then "PASS max rel err ..." or "FAIL ...".
  std::string format() const;
};

/// Double-precision model from cfg.model (all modules on), a random
/// gradcheck.patch-sized input and matching target, loss weights from cfg.train.
ModelGradcheck run_model_gradcheck(const RunConfig& cfg);

}  // namespace dtp::pipeline
