#pragma once

// Full-reference image quality: PSNR, single-scale SSIM on RGB, and per-channel
// 256-bin histograms. Images are H x W x C in the unit interval.

#include "dtp/numerics/tensor.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace dtp::metrics {

/// Reported for identical images (MSE below kPsnrFloorMse).
inline constexpr double kPsnrCap = 99.0;
inline constexpr double kPsnrFloorMse = 1e-12;

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// 10 log10(1 / MSE), MAX = 1.
template <typename Scalar>
double psnr(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

/// Mean SSIM over all valid 11 x 11 windows and all channels.
template <typename Scalar>
double ssim(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

using Histogram = std::array<std::array<std::int64_t, 256>, 3>;

/// Bin i holds values in [i/256, (i+1)/256); 1.0 lands in bin 255.
template <typename Scalar>
Histogram rgb_histograms(const Tensor<Scalar>& image);

/// 256 rows of "r,g,b" counts under a header line.
std::string histogram_csv(const Histogram& h);

struct ImageScore {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricsReport {
  std::vector<ImageScore> images;

  double mean_psnr() const;
  double mean_ssim() const;
  /// Per-image rows plus a mean row; includes an explicit "lpips" column set to n/a.
  std::string csv() const;
  /// Pretty-printed JSON with the same content.
  std::string json() const;
};

}  // namespace dtp::metrics
