#include "dtp/pipeline/data.hpp"

#include "dtp/io/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <stdexcept>

namespace dtp::pipeline {

double DegradationSpec::exposure_from_ev(double ev) { return std::exp2(ev); }

void DegradationSpec::validate() const {
  if (!(exposure > 0.0 && exposure <= 1.0)) throw std::invalid_argument("exposure must lie in (0, 1]");
  if (!(gamma >= 1.0)) throw std::invalid_argument("gamma must be >= 1");
  if (!(noise >= 0.0)) throw std::invalid_argument("noise must be >= 0");
  if (scale != 2 && scale != 4) throw std::invalid_argument("scale must be 2 or 4");
}

template <typename Scalar>
Tensor<Scalar> box_downsample(const Tensor<Scalar>& image, Index factor) {
  if (image.rank() != 3) throw ShapeError("box_downsample: expected H x W x C, got " + shape_str(image.shape()));
  if (factor < 1) throw std::invalid_argument("box_downsample: factor must be >= 1");
  const Index h = image.dim(0), w = image.dim(1), c = image.dim(2);
  if (h % factor != 0 || w % factor != 0)
    throw ShapeError("box_downsample: " + shape_str(image.shape()) + " is not divisible by " + std::to_string(factor));
  Tensor<Scalar> out({h / factor, w / factor, c});
  const Scalar inv = Scalar(1) / static_cast<Scalar>(factor * factor);
  for (Index y = 0; y < h / factor; ++y)
    for (Index x = 0; x < w / factor; ++x)
      for (Index k = 0; k < c; ++k) {
        Scalar acc = 0;
        for (Index i = 0; i < factor; ++i)
          for (Index j = 0; j < factor; ++j) acc += image(y * factor + i, x * factor + j, k);
        out(y, x, k) = acc * inv;
      }
  return out;
}

template <typename Scalar>
Tensor<Scalar> box_upsample(const Tensor<Scalar>& image, Index factor) {
  if (image.rank() != 3) throw ShapeError("box_upsample: expected H x W x C, got " + shape_str(image.shape()));
  if (factor < 1) throw std::invalid_argument("box_upsample: factor must be >= 1");
  const Index h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Tensor<Scalar> out({h * factor, w * factor, c});
  for (Index y = 0; y < h * factor; ++y)
    for (Index x = 0; x < w * factor; ++x)
      for (Index k = 0; k < c; ++k) out(y, x, k) = image(y / factor, x / factor, k);
  return out;
}

Tensor<float> degrade(const Tensor<float>& hr, const DegradationSpec& spec) {
  spec.validate();
  Tensor<float> lr = box_downsample(hr, spec.scale);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.noise > 0.0 ? spec.noise : 1.0);
  for (Index i = 0; i < lr.size(); ++i) {
    double v = std::pow(static_cast<double>(lr[i]), spec.gamma) * spec.exposure;
    if (spec.noise > 0.0) v += noise(rng);
    lr[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return lr;
}

Tensor<float> synthetic_hr(Index height, Index width, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<float> img({height, width, 3});
  double base[3], gx[3], gy[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = 0.3 + 0.4 * u(rng);
    gx[c] = 0.3 * (u(rng) - 0.5);
    gy[c] = 0.3 * (u(rng) - 0.5);
  }
  for (Index y = 0; y < height; ++y)
    for (Index x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c)
        img(y, x, c) = static_cast<float>(base[c] + gx[c] * (x / double(width) - 0.5) * 2 +
                                          gy[c] * (y / double(height) - 0.5) * 2);

  auto random_colour = [&](double out[3]) {
    for (int c = 0; c < 3; ++c) out[c] = 0.1 + 0.8 * u(rng);
  };
  const int shapes = 2 + static_cast<int>(u(rng) * 3);
  for (int s = 0; s < shapes; ++s) {
    double colour[3];
    random_colour(colour);
    const double cy = u(rng) * height, cx = u(rng) * width;
    const double ry = (0.1 + 0.25 * u(rng)) * height, rx = (0.1 + 0.25 * u(rng)) * width;
    const bool disc = u(rng) < 0.5;
    for (Index y = 0; y < height; ++y)
      for (Index x = 0; x < width; ++x) {
        const double dy = (y + 0.5 - cy) / ry, dx = (x + 0.5 - cx) / rx;
        const bool inside = disc ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
        if (inside)
          for (int c = 0; c < 3; ++c) img(y, x, c) = static_cast<float>(colour[c]);
      }
  }

  // Oriented stripes inside one rectangle.
  double colour[3];
  random_colour(colour);
  const double angle = u(rng) * std::numbers::pi, period = 2.0 + 4.0 * u(rng);
  const Index y0 = static_cast<Index>(u(rng) * height / 2), x0 = static_cast<Index>(u(rng) * width / 2);
  const Index y1 = std::min(height, y0 + height / 3 + static_cast<Index>(u(rng) * height / 3));
  const Index x1 = std::min(width, x0 + width / 3 + static_cast<Index>(u(rng) * width / 3));
  for (Index y = y0; y < y1; ++y)
    for (Index x = x0; x < x1; ++x) {
      const double phase = (x * std::cos(angle) + y * std::sin(angle)) * 2 * std::numbers::pi / period;
      const double m = 0.5 + 0.5 * std::sin(phase);
      for (int c = 0; c < 3; ++c) img(y, x, c) = static_cast<float>(m * colour[c] + (1 - m) * (1 - colour[c]));
    }

  for (Index i = 0; i < img.size(); ++i) img[i] = std::clamp(img[i], 0.05f, 0.95f);
  return img;
}

void DataConfig::validate(int scale) const {
  if (train_pairs < 1) throw std::invalid_argument("data.train_pairs must be >= 1");
  if (heldout_pairs < 1) throw std::invalid_argument("data.heldout_pairs must be >= 1");
  if (hr_size < 2 * scale || hr_size % (2 * scale) != 0)
    throw std::invalid_argument("data.hr_size must be a positive multiple of 2 * scale");
  DegradationSpec{DegradationSpec::exposure_from_ev(ev), gamma, noise, scale, 0}.validate();
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

std::string indexed_name(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03d", prefix, i);
  return buf;
}

}  // namespace

std::vector<Pair> synthetic_pairs(const DataConfig& cfg, int scale, Split split) {
  cfg.validate(scale);
  const bool train = split == Split::Train;
  const int count = train ? cfg.train_pairs : cfg.heldout_pairs;
  const std::uint64_t stream = derive_seed(cfg.seed, train ? 0 : 1);
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(derive_seed(stream, 2 * static_cast<std::uint64_t>(i)));
    Pair p;
    p.name = indexed_name(train ? "train" : "heldout", i);
    p.hr = synthetic_hr(cfg.hr_size, cfg.hr_size, rng);
    p.lr = degrade(p.hr, {DegradationSpec::exposure_from_ev(cfg.ev), cfg.gamma, cfg.noise, scale,
                          derive_seed(stream, 2 * static_cast<std::uint64_t>(i) + 1)});
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<Pair> degrade_all(const std::vector<std::pair<std::string, Tensor<float>>>& hr, DegradationSpec spec) {
  std::vector<Pair> pairs;
  const std::uint64_t base = spec.seed;
  for (std::size_t i = 0; i < hr.size(); ++i) {
    spec.seed = derive_seed(base, i);
    try {
      pairs.push_back({hr[i].first, degrade(hr[i].second, spec), hr[i].second});
    } catch (const ShapeError& e) {
      throw ShapeError("image '" + hr[i].first + "': " + e.what());
    }
  }
  return pairs;
}

void write_pairs(const std::filesystem::path& dir, const std::vector<Pair>& pairs) {
  std::filesystem::create_directories(dir / "lr");
  std::filesystem::create_directories(dir / "hr");
  for (const auto& p : pairs) {
    io::write_image(dir / "lr" / (p.name + ".png"), p.lr, 16);
    io::write_image(dir / "hr" / (p.name + ".png"), p.hr, 16);
  }
}

std::vector<std::pair<std::string, Tensor<float>>> read_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::map<std::string, std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file() || !io::is_image_path(e.path())) continue;
    const auto stem = e.path().stem().string();
    if (!files.emplace(stem, e.path()).second)
      throw std::runtime_error("two images named '" + stem + "' in " + dir.string());
  }
  std::vector<std::pair<std::string, Tensor<float>>> out;
  for (const auto& [name, path] : files) out.emplace_back(name, io::read_image(path));
  return out;
}

std::vector<Pair> read_pairs(const std::filesystem::path& dir) {
  auto lr = read_images(dir / "lr");
  auto hr = read_images(dir / "hr");
  std::map<std::string, Tensor<float>> by_name(std::make_move_iterator(hr.begin()), std::make_move_iterator(hr.end()));
  std::vector<Pair> pairs;
  for (auto& [name, image] : lr) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("no HR partner for LR image '" + name + "' in " + dir.string());
    pairs.push_back({name, std::move(image), std::move(it->second)});
  }
  if (pairs.empty()) throw std::runtime_error("no image pairs under " + dir.string());
  return pairs;
}

void require_scale(const std::vector<Pair>& pairs, int scale) {
  for (const auto& p : pairs) {
    if (p.lr.rank() != 3 || p.hr.rank() != 3 || p.hr.dim(0) != scale * p.lr.dim(0) ||
        p.hr.dim(1) != scale * p.lr.dim(1) || p.hr.dim(2) != p.lr.dim(2))
      throw ShapeError("pair '" + p.name + "': HR " + shape_str(p.hr.shape()) + " is not " + std::to_string(scale) +
                       "x LR " + shape_str(p.lr.shape()));
  }
}

template Tensor<float> box_downsample(const Tensor<float>&, Index);
template Tensor<double> box_downsample(const Tensor<double>&, Index);
template Tensor<float> box_upsample(const Tensor<float>&, Index);
template Tensor<double> box_upsample(const Tensor<double>&, Index);

}  // namespace dtp::pipeline
