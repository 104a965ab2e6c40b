#include "dtp/io/image_io.hpp"

#include "dtp/io/files.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <memory>
#include <sstream>
#include <vector>

namespace dtp::io {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

unsigned to_code(float v, unsigned max_code) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0) * max_code;
  return static_cast<unsigned>(std::lround(c));
}

void require_rgb(const Tensor<float>& image, const char* what) {
  if (image.rank() != 3 || image.channels() != 3 || image.height() < 1 || image.width() < 1) {
    throw ImageError(std::string(what) + ": expected non-empty H x W x 3 image, got " + shape_str(image.shape()));
  }
}

struct ReadCursor {
  const std::string* bytes;
  std::size_t pos;
};

void png_read_cb(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + n > cur->bytes->size()) png_error(png, "truncated PNG data");
  std::memcpy(out, cur->bytes->data() + cur->pos, n);
  cur->pos += n;
}

void png_write_cb(png_structp png, png_bytep data, png_size_t n) {
  static_cast<std::string*>(png_get_io_ptr(png))->append(reinterpret_cast<const char*>(data), n);
}

void png_flush_cb(png_structp) {}

[[noreturn]] void png_error_cb(png_structp png, png_const_charp msg) {
  *static_cast<std::string*>(png_get_error_ptr(png)) = msg;
  png_longjmp(png, 1);
}

void png_warning_cb(png_structp, png_const_charp) {}

}  // namespace

Tensor<float> decode_png(const std::string& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw ImageError("not a PNG file");
  }
  // Everything libpng may touch after setjmp lives on the heap.
  struct State {
    std::string error;
    ReadCursor cursor;
    std::vector<std::vector<png_byte>> rows;
    std::vector<png_bytep> row_ptrs;
    png_uint_32 width = 0, height = 0;
    int depth = 0;
  };
  auto st = std::make_unique<State>();
  st->cursor = ReadCursor{&bytes, 0};
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &st->error, png_error_cb, png_warning_cb);
  if (!png) throw ImageError("libpng: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("PNG decode failed: " + st->error);
  }
  png_set_read_fn(png, &st->cursor, png_read_cb);
  png_read_info(png, info);
  st->width = png_get_image_width(png, info);
  st->height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  st->depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  st->rows.assign(st->height, std::vector<png_byte>(rowbytes));
  for (auto& r : st->rows) st->row_ptrs.push_back(r.data());
  png_read_image(png, st->row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const png_uint_32 height = st->height, width = st->width;
  const int depth = st->depth;
  const auto& rows = st->rows;
  Tensor<float> out = Tensor<float>::image(height, width, 3);
  const double max_code = depth == 16 ? 65535.0 : 255.0;
  for (png_uint_32 y = 0; y < height; ++y)
    for (png_uint_32 x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) {
        const std::size_t k = static_cast<std::size_t>(x) * 3 + static_cast<std::size_t>(c);
        const unsigned code = depth == 16 ? (unsigned(rows[y][2 * k]) << 8) | rows[y][2 * k + 1] : rows[y][k];
        out(y, x, c) = static_cast<float>(code / max_code);
      }
  return out;
}

std::string encode_png(const Tensor<float>& image, int bit_depth) {
  require_rgb(image, "encode_png");
  if (bit_depth != 8 && bit_depth != 16) throw ImageError("PNG bit depth must be 8 or 16");
  const auto h = static_cast<png_uint_32>(image.height()), w = static_cast<png_uint_32>(image.width());
  const std::size_t bytes_per = bit_depth / 8;
  const unsigned max_code = bit_depth == 16 ? 65535u : 255u;
  std::vector<std::vector<png_byte>> rows(h, std::vector<png_byte>(static_cast<std::size_t>(w) * 3 * bytes_per));
  for (png_uint_32 y = 0; y < h; ++y)
    for (png_uint_32 x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const unsigned code = to_code(image(y, x, c), max_code);
        const std::size_t k = (static_cast<std::size_t>(x) * 3 + static_cast<std::size_t>(c)) * bytes_per;
        if (bytes_per == 2) {
          rows[y][k] = static_cast<png_byte>(code >> 8);
          rows[y][k + 1] = static_cast<png_byte>(code & 0xff);
        } else {
          rows[y][k] = static_cast<png_byte>(code);
        }
      }
  std::vector<png_bytep> row_ptrs;
  for (auto& r : rows) row_ptrs.push_back(r.data());

  struct State {
    std::string error, out;
  };
  auto st = std::make_unique<State>();
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &st->error, png_error_cb, png_warning_cb);
  if (!png) throw ImageError("libpng: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageError("PNG encode failed: " + st->error);
  }
  png_set_write_fn(png, &st->out, png_write_cb, png_flush_cb);
  png_set_IHDR(png, info, w, h, bit_depth, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return std::move(st->out);
}

Tensor<float> decode_ppm(const std::string& bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> long {
    skip_space();
    std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw ImageError("PPM: malformed header or sample");
    return std::stol(bytes.substr(start, pos - start));
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '3' && bytes[1] != '6')) {
    throw ImageError("not a PPM file (expected P3 or P6)");
  }
  const bool ascii = bytes[1] == '3';
  pos = 2;
  const long w = number(), h = number(), max_value = number();
  if (w < 1 || h < 1 || max_value < 1 || max_value > 65535) throw ImageError("PPM: invalid dimensions or max value");
  Tensor<float> out = Tensor<float>::image(h, w, 3);
  if (ascii) {
    for (Index i = 0; i < out.size(); ++i) {
      const long v = number();
      if (v > max_value) throw ImageError("PPM: sample exceeds max value");
      out[i] = static_cast<float>(static_cast<double>(v) / static_cast<double>(max_value));
    }
  } else {
    ++pos;  // single whitespace after the max value
    const std::size_t per = max_value > 255 ? 2 : 1;
    if (pos + static_cast<std::size_t>(out.size()) * per > bytes.size()) throw ImageError("PPM: truncated pixel data");
    for (Index i = 0; i < out.size(); ++i) {
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos + static_cast<std::size_t>(i) * per);
      const unsigned v = per == 2 ? (unsigned(p[0]) << 8) | p[1] : p[0];
      out[i] = static_cast<float>(static_cast<double>(v) / static_cast<double>(max_value));
    }
  }
  return out;
}

std::string encode_ppm(const Tensor<float>& image, int max_value) {
  require_rgb(image, "encode_ppm");
  if (max_value < 1 || max_value > 65535) throw ImageError("PPM max value must be in [1, 65535]");
  std::ostringstream os;
  os << "P3\n" << image.width() << ' ' << image.height() << '\n' << max_value << '\n';
  for (Index y = 0; y < image.height(); ++y) {
    for (Index x = 0; x < image.width(); ++x)
      for (Index c = 0; c < 3; ++c) {
        os << to_code(image(y, x, c), static_cast<unsigned>(max_value));
        os << ((x + 1 == image.width() && c == 2) ? '\n' : ' ');
      }
  }
  return os.str();
}

bool is_image_path(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  return ext == ".png" || ext == ".ppm";
}

Tensor<float> read_image(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const std::exception&) {
    throw ImageError("cannot read image " + path.string());
  }
  try {
    if (ext == ".png") return decode_png(bytes);
    if (ext == ".ppm") return decode_ppm(bytes);
  } catch (const ImageError& e) {
    throw ImageError(path.string() + ": " + e.what());
  }
  throw ImageError("unsupported image extension '" + ext + "' for " + path.string());
}

void write_image(const std::filesystem::path& path, const Tensor<float>& image, int bit_depth) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    write_file_atomic(path, encode_png(image, bit_depth));
  } else if (ext == ".ppm") {
    write_file_atomic(path, encode_ppm(image, bit_depth == 16 ? 65535 : 255));
  } else {
    throw ImageError("unsupported image extension '" + ext + "' for " + path.string());
  }
}

}  // namespace dtp::io
