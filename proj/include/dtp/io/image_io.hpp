#pragma once

// Image files <-> H x W x 3 unit-interval tensors. PNG (8 or 16 bit, via
// libpng) and PPM (P3 ASCII, P6 binary) are read; PNG and ASCII PPM are
// written. Integer codes map to [0, 1] by division by the maximum code.

#include "dtp/numerics/tensor.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace dtp::io {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gray inputs are replicated to RGB and alpha is dropped.
Tensor<float> read_image(const std::filesystem::path& path);

/// Format follows the extension (.png or .ppm). Values are clamped to [0, 1]
/// and rounded to the nearest code. The file is replaced atomically.
void write_image(const std::filesystem::path& path, const Tensor<float>& image, int bit_depth = 8);

Tensor<float> decode_png(const std::string& bytes);
std::string encode_png(const Tensor<float>& image, int bit_depth = 8);
Tensor<float> decode_ppm(const std::string& bytes);
std::string encode_ppm(const Tensor<float>& image, int max_value = 255);

/// True for extensions read_image understands.
bool is_image_path(const std::filesystem::path& path);

}  // namespace dtp::io
