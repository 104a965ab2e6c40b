#pragma once

// Synthetic paired data: procedural normal-light HR images and their dark,
// noisy, box-downsampled LR counterparts.

#include "dtp/numerics/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace dtp::pipeline {

struct DegradationSpec {
  double exposure = 0.25;  // e in (0, 1]
  double gamma = 1.0;      // g >= 1
  double noise = 0.0;      // additive Gaussian std in the darkened domain
  int scale = 2;           // box factor, 2 or 4
  std::uint64_t seed = 0;

  /// e = 2^ev
  static double exposure_from_ev(double ev);
  void validate() const;
};

/// Mean over each factor x factor block. Dims must be divisible by `factor`.
template <typename Scalar>
Tensor<Scalar> box_downsample(const Tensor<Scalar>& image, Index factor);

/// Replicates every pixel into a factor x factor block.
template <typename Scalar>
Tensor<Scalar> box_upsample(const Tensor<Scalar>& image, Index factor);

/// clamp(box_downsample(hr)^g * e + N(0, noise^2), 0, 1); noise drawn in
/// row-major order from a generator seeded with spec.seed.
Tensor<float> degrade(const Tensor<float>& hr, const DegradationSpec& spec);

/// Procedural H x W x 3 scene: smooth colour gradient, flat shapes and a
/// striped texture patch, values within [0.05, 0.95].
Tensor<float> synthetic_hr(Index height, Index width, std::mt19937_64& rng);

struct Pair {
  std::string name;
  Tensor<float> lr;
  Tensor<float> hr;
};

struct DataConfig {
  int train_pairs = 64;
  int heldout_pairs = 16;
  int hr_size = 32;
  double ev = -2.0;
  double gamma = 1.0;
  double noise = 0.02;
  std::uint64_t seed = 2024;

  void validate(int scale) const;
};

/// Stream-splitting seed derivation (splitmix64 of seed and index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

enum class Split { Train, Heldout };

/// Deterministic pairs for one split; pair i is named "<split>_<i>" zero padded.
std::vector<Pair> synthetic_pairs(const DataConfig& cfg, int scale, Split split);

/// Degrades existing HR images; pair i uses derive_seed(spec.seed, i).
std::vector<Pair> degrade_all(const std::vector<std::pair<std::string, Tensor<float>>>& hr, DegradationSpec spec);

/// Writes <dir>/lr/<name>.png and <dir>/hr/<name>.png as 16-bit PNG.
void write_pairs(const std::filesystem::path& dir, const std::vector<Pair>& pairs);

/// Reads every image in <dir>/lr with a same-named partner in <dir>/hr, sorted by name.
std::vector<Pair> read_pairs(const std::filesystem::path& dir);

/// Every image directly inside `dir`, sorted by file name; names are the stems.
std::vector<std::pair<std::string, Tensor<float>>> read_images(const std::filesystem::path& dir);

/// Throws ShapeError unless every pair has hr = scale * lr extents.
void require_scale(const std::vector<Pair>& pairs, int scale);

}  // namespace dtp::pipeline
