#pragma once

// End-to-end model: decompose -> reweight -> split -> {Naka-Rushton | residual
// denoiser} -> gated fusion -> rebuild + upsample. Branches run at half the
// input resolution, so the decoder upsamples by twice the model scale.

#include "dtp/csr.hpp"
#include "dtp/fsd.hpp"
#include "dtp/sdr.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dtp::pipeline {

inline constexpr Index kImageChannels = 3;

struct ModelConfig {
  fsd::KLPrior prior;
  sdr::SdrConfig sdr;
  csr::CsrConfig csr;  // csr.scale is the super-resolution factor
  std::uint64_t seed = 7;

  int scale() const { return csr.scale; }
  Index decoder_factor() const { return 2 * static_cast<Index>(csr.scale); }
  /// Throws std::invalid_argument for out-of-range values.
  void validate() const;
};

/// Module on/off state for ablations. A disabled module keeps its parameters
/// at neutral values and frozen:
///   fsd off: Haar taps, zero logits (uniform weights), no KL term
///   sdr off: Naka-Rushton bypassed, residual stack all zero
///   csr off: attention and gate weights zero, so every mask and the gate are 0.5
struct ModuleSwitches {
  bool fsd = true;
  bool sdr = true;
  bool csr = true;

  std::string label() const;
  friend bool operator==(const ModuleSwitches&, const ModuleSwitches&) = default;
};

template <typename Scalar>
struct ForwardTrace {
  fsd::SubbandSet<Scalar> subbands;    // raw analysis output
  fsd::SubbandSet<Scalar> reweighted;  // after the simplex weights
  Var<Scalar> luminance;               // low-frequency branch
  Var<Scalar> texture;                 // high-frequency branch, LH | HL | HH
  Var<Scalar> enhanced;                // luminance after Naka-Rushton
  Var<Scalar> denoised;                // texture after the residual stack
  Var<Scalar> fused;                   // gated attention output
  Var<Scalar> output;                  // s-times super-resolved image in [0, 1]
};

struct LossWeights {
  double rec = 1.0;
  double kl = 0.01;
};

template <typename Scalar>
struct LossTerms {
  Var<Scalar> total, l1, kl;
};

template <typename Scalar>
class DtpModel {
 public:
  explicit DtpModel(const ModelConfig& config, const ModuleSwitches& switches = {});
  /// Adopts `params` (e.g. from a checkpoint); names and shapes must match a
  /// freshly built model of the same configuration.
  DtpModel(const ModelConfig& config, const ModuleSwitches& switches, ParamStore<Scalar> params);

  const ModelConfig& config() const { return config_; }
  const ModuleSwitches& switches() const { return switches_; }
  ParamStore<Scalar>& params() { return params_; }
  const ParamStore<Scalar>& params() const { return params_; }

  /// Records the full forward pass on `graph`, which must be bound to params().
  ForwardTrace<Scalar> forward(Graph<Scalar>& graph, const Var<Scalar>& input) const;

  /// Forward pass without gradient bookkeeping for the caller.
  Tensor<Scalar> infer(const Tensor<Scalar>& input) const;

  /// total = rec * mean|output - target| + kl * KL(raw LL); the KL weight is
  /// zero when fsd is switched off.
  LossTerms<Scalar> loss(const ForwardTrace<Scalar>& trace, const Var<Scalar>& target, const LossWeights& w) const;

  /// Names of the parameters held fixed by the current switches.
  std::vector<std::string> frozen_names() const;

  nlohmann::json meta() const;

  template <typename Other>
  DtpModel<Other> cast() const {
    return DtpModel<Other>(config_, switches_, params_.template cast<Other>());
  }

 private:
  void apply_switches(bool reset_values);

  ModelConfig config_;
  ModuleSwitches switches_;
  ParamStore<Scalar> params_;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModuleSwitches& s);
ModuleSwitches switches_from_json(const nlohmann::json& j);

template <typename Scalar>
void save_model(const std::filesystem::path& path, const DtpModel<Scalar>& model,
                const nlohmann::json& extra_meta = nlohmann::json::object());

template <typename Scalar>
DtpModel<Scalar> load_model(const std::filesystem::path& path);

template <typename Scalar>
DtpModel<Scalar> model_from_checkpoint_bytes(const std::string& bytes);

extern template class DtpModel<float>;
extern template class DtpModel<double>;

}  // namespace dtp::pipeline
