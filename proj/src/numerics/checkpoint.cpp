#include "dtp/numerics/checkpoint.hpp"

#include "dtp/io/files.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <type_traits>

namespace dtp {

namespace {

constexpr const char* kMagic = "DTPCKPT\n";

template <typename T>
const char* dtype_name() {
  return std::is_same_v<T, float> ? "float32" : "float64";
}

template <typename T>
void append_le(std::string& out, const T* data, Index count) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  const std::size_t bytes = static_cast<std::size_t>(count) * sizeof(T);
  const std::size_t at = out.size();
  out.resize(at + bytes);
  std::memcpy(out.data() + at, data, bytes);
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = at; i < at + bytes; i += sizeof(T)) std::reverse(out.begin() + i, out.begin() + i + sizeof(T));
  }
}

template <typename T>
void read_le(const char* src, T* dst, Index count) {
  std::memcpy(dst, src, static_cast<std::size_t>(count) * sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto* raw = reinterpret_cast<char*>(dst);
    for (std::size_t i = 0; i < static_cast<std::size_t>(count) * sizeof(T); i += sizeof(T))
      std::reverse(raw + i, raw + i + sizeof(T));
  }
}

}  // namespace

template <typename Scalar>
std::string encode_checkpoint(const ParamStore<Scalar>& store, const nlohmann::json& meta) {
  nlohmann::json header;
  header["format"] = "dtp-checkpoint";
  header["version"] = kCheckpointVersion;
  header["dtype"] = dtype_name<Scalar>();
  header["byte_order"] = "little";
  header["params"] = nlohmann::json::array();
  for (const auto& e : store) {
    header["params"].push_back({{"name", e.name}, {"shape", e.value.shape()}, {"learnable", e.learnable}});
  }
  header["meta"] = meta;
  const std::string text = header.dump();

  std::string out = kMagic;
  out += std::to_string(text.size());
  out += '\n';
  out += text;
  for (const auto& e : store) append_le(out, e.value.data(), e.value.size());
  return out;
}

namespace {

template <typename Stored, typename Scalar>
void read_payload(const std::string& bytes, std::size_t& pos, const nlohmann::json& params, ParamStore<Scalar>& out) {
  for (const auto& p : params) {
    const Shape shape = p.at("shape").get<Shape>();
    const Index count = shape_size(shape);
    const std::size_t need = static_cast<std::size_t>(count) * sizeof(Stored);
    if (pos + need > bytes.size()) throw CheckpointError("checkpoint truncated in '" + p.at("name").get<std::string>() + "'");
    Eigen::Array<Stored, Eigen::Dynamic, 1> raw(count);
    read_le(bytes.data() + pos, raw.data(), count);
    pos += need;
    out.add(p.at("name").get<std::string>(), Tensor<Scalar>(shape, raw.template cast<Scalar>().eval()),
            p.at("learnable").get<bool>());
  }
}

}  // namespace

template <typename Scalar>
ParamStore<Scalar> decode_checkpoint(const std::string& bytes, nlohmann::json* meta) {
  const std::string magic = kMagic;
  if (bytes.compare(0, magic.size(), magic) != 0) throw CheckpointError("not a checkpoint (bad magic)");
  const std::size_t eol = bytes.find('\n', magic.size());
  if (eol == std::string::npos) throw CheckpointError("checkpoint header length missing");
  std::size_t header_len = 0;
  try {
    header_len = std::stoull(bytes.substr(magic.size(), eol - magic.size()));
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint header length unreadable");
  }
  std::size_t pos = eol + 1;
  if (pos + header_len > bytes.size()) throw CheckpointError("checkpoint header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  pos += header_len;
  if (header.value("format", "") != "dtp-checkpoint") throw CheckpointError("checkpoint format field missing");
  const int version = header.value("version", -1);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  if (header.value("byte_order", "") != "little") throw CheckpointError("unsupported checkpoint byte order");

  ParamStore<Scalar> store;
  const std::string dtype = header.value("dtype", "");
  try {
    if (dtype == "float32") {
      read_payload<float>(bytes, pos, header.at("params"), store);
    } else if (dtype == "float64") {
      read_payload<double>(bytes, pos, header.at("params"), store);
    } else {
      throw CheckpointError("unsupported checkpoint dtype '" + dtype + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  if (pos != bytes.size()) throw CheckpointError("checkpoint has trailing bytes");
  if (meta) *meta = header.value("meta", nlohmann::json::object());
  return store;
}

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const ParamStore<Scalar>& store, const nlohmann::json& meta) {
  io::write_file_atomic(path, encode_checkpoint(store, meta));
}

template <typename Scalar>
ParamStore<Scalar> load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta) {
  return decode_checkpoint<Scalar>(io::read_file(path), meta);
}

template std::string encode_checkpoint(const ParamStore<float>&, const nlohmann::json&);
template std::string encode_checkpoint(const ParamStore<double>&, const nlohmann::json&);
template ParamStore<float> decode_checkpoint(const std::string&, nlohmann::json*);
template ParamStore<double> decode_checkpoint(const std::string&, nlohmann::json*);
template void save_checkpoint(const std::filesystem::path&, const ParamStore<float>&, const nlohmann::json&);
template void save_checkpoint(const std::filesystem::path&, const ParamStore<double>&, const nlohmann::json&);
template ParamStore<float> load_checkpoint(const std::filesystem::path&, nlohmann::json*);
template ParamStore<double> load_checkpoint(const std::filesystem::path&, nlohmann::json*);

}  // namespace dtp
