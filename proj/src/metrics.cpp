#include "dtp/metrics.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace dtp::metrics {

template <typename Scalar>
double psnr(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_same_shape(a.shape(), b.shape(), "psnr");
  if (a.size() == 0) throw ShapeError("psnr: empty images");
  const double mse = (a.array().template cast<double>() - b.array().template cast<double>()).square().mean();
  if (mse < kPsnrFloorMse) return kPsnrCap;
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

std::array<double, kSsimWindow> gaussian_taps() {
  std::array<double, kSsimWindow> g{};
  double total = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    total += g[static_cast<std::size_t>(i)];
  }
  for (auto& v : g) v /= total;
  return g;
}

using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Separable Gaussian filter, valid region only.
Plane filter_valid(const Plane& p, const std::array<double, kSsimWindow>& g) {
  const Index oh = p.rows() - kSsimWindow + 1, ow = p.cols() - kSsimWindow + 1;
  Plane rows = Plane::Zero(p.rows(), ow);
  for (int k = 0; k < kSsimWindow; ++k) rows += g[static_cast<std::size_t>(k)] * p.middleCols(k, ow);
  Plane out = Plane::Zero(oh, ow);
  for (int k = 0; k < kSsimWindow; ++k) out += g[static_cast<std::size_t>(k)] * rows.middleRows(k, oh);
  return out;
}

}  // namespace

template <typename Scalar>
double ssim(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_same_shape(a.shape(), b.shape(), "ssim");
  if (a.rank() != 3) throw ShapeError("ssim: expected H x W x C images, got " + shape_str(a.shape()));
  const Index h = a.height(), w = a.width(), channels = a.channels();
  if (h < kSsimWindow || w < kSsimWindow) {
    throw ShapeError("ssim: image " + shape_str(a.shape()) + " is smaller than the 11x11 window");
  }
  const auto g = gaussian_taps();
  const double c1 = kSsimK1 * kSsimK1, c2 = kSsimK2 * kSsimK2;
  double total = 0.0;
  for (Index c = 0; c < channels; ++c) {
    Plane x(h, w), y(h, w);
    for (Index r = 0; r < h; ++r)
      for (Index q = 0; q < w; ++q) {
        x(r, q) = static_cast<double>(a(r, q, c));
        y(r, q) = static_cast<double>(b(r, q, c));
      }
    const Plane mx = filter_valid(x, g), my = filter_valid(y, g);
    const Plane sxx = filter_valid(x * x, g) - mx * mx;
    const Plane syy = filter_valid(y * y, g) - my * my;
    const Plane sxy = filter_valid(x * y, g) - mx * my;
    const Plane map = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
    total += map.mean();
  }
  return total / static_cast<double>(channels);
}

template <typename Scalar>
Histogram rgb_histograms(const Tensor<Scalar>& image) {
  if (image.rank() != 3 || image.channels() != 3) {
    throw ShapeError("rgb_histograms: expected H x W x 3 image, got " + shape_str(image.shape()));
  }
  Histogram h{};
  for (Index i = 0; i < image.size(); ++i) {
    const double v = static_cast<double>(image[i]);
    const int bin = v <= 0.0 ? 0 : static_cast<int>(std::min(255.0, std::floor(v * 256.0)));
    ++h[static_cast<std::size_t>(i % 3)][static_cast<std::size_t>(bin)];
  }
  return h;
}

std::string histogram_csv(const Histogram& h) {
  std::ostringstream os;
  os << "r,g,b\n";
  for (std::size_t i = 0; i < 256; ++i) os << h[0][i] << ',' << h[1][i] << ',' << h[2][i] << '\n';
  return os.str();
}

double MetricsReport::mean_psnr() const {
  double s = 0.0;
  for (const auto& r : images) s += r.psnr;
  return images.empty() ? 0.0 : s / static_cast<double>(images.size());
}

double MetricsReport::mean_ssim() const {
  double s = 0.0;
  for (const auto& r : images) s += r.ssim;
  return images.empty() ? 0.0 : s / static_cast<double>(images.size());
}

std::string MetricsReport::csv() const {
  std::ostringstream os;
  char line[512];
  os << "image,psnr_db,ssim,lpips\n";
  for (const auto& r : images) {
    std::snprintf(line, sizeof line, "%s,%.4f,%.6f,n/a\n", r.name.c_str(), r.psnr, r.ssim);
    os << line;
  }
  std::snprintf(line, sizeof line, "mean,%.4f,%.6f,n/a\n", mean_psnr(), mean_ssim());
  os << line;
  return os.str();
}

std::string MetricsReport::json() const {
  nlohmann::ordered_json j;
  j["images"] = nlohmann::ordered_json::array();
  for (const auto& r : images) j["images"].push_back({{"name", r.name}, {"psnr_db", r.psnr}, {"ssim", r.ssim}});
  j["mean"] = {{"psnr_db", mean_psnr()}, {"ssim", mean_ssim()}};
  j["lpips"] = "n/a";
  return j.dump(2) + "\n";
}

template double psnr(const Tensor<float>&, const Tensor<float>&);
template double psnr(const Tensor<double>&, const Tensor<double>&);
template double ssim(const Tensor<float>&, const Tensor<float>&);
template double ssim(const Tensor<double>&, const Tensor<double>&);
template Histogram rgb_histograms(const Tensor<float>&);
template Histogram rgb_histograms(const Tensor<double>&);

}  // namespace dtp::metrics
