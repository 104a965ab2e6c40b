#pragma once

// Flat "key = value" run configuration. '#' starts a comment, blank lines are
// ignored, keys are dotted (fsd.mu0, train.steps, ...). Unknown keys,
// repeated keys and unparsable values are errors.

#include "dtp/pipeline/data.hpp"
#include "dtp/pipeline/model.hpp"
#include "dtp/pipeline/train.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtp::pipeline {

struct GradcheckConfig {
  int patch = 8;            // LR patch edge
  double step = 1e-3;
  double tolerance = 1e-4;
  int samples = 16;         // entries per parameter; <= 0 checks all
  std::uint64_t seed = 99;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  GradcheckConfig gradcheck;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// `origin` prefixes error messages ("<origin>:<line>: ...").
RunConfig parse_config(const std::string& text, const std::string& origin = "config");
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its value, one per line, in a stable order; parse_config
/// of the result reproduces `cfg`.
std::string format_config(const RunConfig& cfg);

std::vector<std::string> config_keys();

}  // namespace dtp::pipeline
