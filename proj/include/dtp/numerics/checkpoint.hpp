#pragma once

// Checkpoint layout:
//
//   DTPCKPT\n
//   <header byte length, decimal>\n
//   <JSON header: format, version, dtype, byte_order, params[{name, shape, learnable}], meta>
//   <little-endian raw arrays, one per param, in header order>

#include "dtp/numerics/param_store.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>

namespace dtp {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
std::string encode_checkpoint(const ParamStore<Scalar>& store, const nlohmann::json& meta = nlohmann::json::object());

/// Decodes into a store of `Scalar`, converting when the stored dtype differs.
template <typename Scalar>
ParamStore<Scalar> decode_checkpoint(const std::string& bytes, nlohmann::json* meta = nullptr);

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const ParamStore<Scalar>& store,
                     const nlohmann::json& meta = nlohmann::json::object());

template <typename Scalar>
ParamStore<Scalar> load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

}  // namespace dtp
