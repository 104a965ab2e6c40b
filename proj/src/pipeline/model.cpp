#include "dtp/pipeline/model.hpp"

#include "dtp/numerics/checkpoint.hpp"

#include <random>
#include <stdexcept>

namespace dtp::pipeline {

void ModelConfig::validate() const {
  if (!(prior.sigma0 > 0.0)) throw std::invalid_argument("fsd.sigma0 must be positive");
  if (csr.scale != 2 && csr.scale != 4) throw std::invalid_argument("csr.scale must be 2 or 4");
  if (!csr::supported_upsample_factor(decoder_factor()))
    throw std::invalid_argument("decoder factor " + std::to_string(decoder_factor()) + " is not supported");
}

std::string ModuleSwitches::label() const {
  if (!fsd && !sdr && !csr) return "baseline";
  std::string out;
  for (auto [on, name] : {std::pair{fsd, "FSD"}, std::pair{sdr, "SDR"}, std::pair{csr, "CSR"}}) {
    if (!on) continue;
    if (!out.empty()) out += "+";
    out += name;
  }
  return out;
}

namespace {

template <typename Scalar>
ParamStore<Scalar> fresh_params(const ModelConfig& cfg) {
  cfg.validate();
  ParamStore<Scalar> store;
  std::mt19937_64 rng(cfg.seed);
  fsd::add_params(store);
  sdr::add_params(store, cfg.sdr, 3 * kImageChannels, rng);
  csr::add_params(store, cfg.csr, kImageChannels, cfg.decoder_factor(), rng);
  return store;
}

}  // namespace

template <typename Scalar>
DtpModel<Scalar>::DtpModel(const ModelConfig& config, const ModuleSwitches& switches)
    : config_(config), switches_(switches), params_(fresh_params<Scalar>(config)) {
  apply_switches(true);
}

template <typename Scalar>
DtpModel<Scalar>::DtpModel(const ModelConfig& config, const ModuleSwitches& switches, ParamStore<Scalar> params)
    : config_(config), switches_(switches), params_(std::move(params)) {
  const auto reference = fresh_params<Scalar>(config);
  if (reference.size() != params_.size())
    throw std::invalid_argument("parameter set has " + std::to_string(params_.size()) + " entries, model expects " +
                                std::to_string(reference.size()));
  for (Index i = 0; i < reference.size(); ++i) {
    const auto& want = reference.entry(i);
    const auto& got = params_.entry(i);
    if (want.name != got.name) throw std::invalid_argument("parameter " + std::to_string(i) + " is '" + got.name +
                                                           "', model expects '" + want.name + "'");
    if (want.value.shape() != got.value.shape())
      throw ShapeError("parameter '" + got.name + "' has shape " + shape_str(got.value.shape()) + ", model expects " +
                       shape_str(want.value.shape()));
  }
  apply_switches(false);
}

template <typename Scalar>
std::vector<std::string> DtpModel<Scalar>::frozen_names() const {
  std::vector<std::string> names;
  auto add_prefix = [&](const std::string& prefix) {
    for (Index i : params_.with_prefix(prefix)) names.push_back(params_.entry(i).name);
  };
  if (!switches_.fsd) add_prefix("fsd.");
  if (!switches_.sdr) add_prefix("sdr.");
  if (!switches_.csr)
    for (const auto& n : csr::attention_param_names()) names.push_back(n);
  return names;
}

template <typename Scalar>
void DtpModel<Scalar>::apply_switches(bool reset_values) {
  for (auto& e : params_) e.learnable = true;
  if (reset_values) {
    if (!switches_.fsd) {
      params_.value(fsd::kPredictH) = fsd::LiftingParams<Scalar>::haar_predict();
      params_.value(fsd::kPredictV) = fsd::LiftingParams<Scalar>::haar_predict();
      params_.value(fsd::kUpdateH) = fsd::LiftingParams<Scalar>::haar_update();
      params_.value(fsd::kUpdateV) = fsd::LiftingParams<Scalar>::haar_update();
      params_.value(fsd::kAlphaLogits).array().setZero();
    }
    if (!switches_.sdr)
      for (Index i : params_.with_prefix("sdr.stage")) params_.entry(i).value.array().setZero();
    if (!switches_.csr)
      for (const auto& n : csr::attention_param_names()) params_.value(n).array().setZero();
  }
  for (const auto& n : frozen_names()) params_.set_learnable(n, false);
}

template <typename Scalar>
ForwardTrace<Scalar> DtpModel<Scalar>::forward(Graph<Scalar>& graph, const Var<Scalar>& input) const {
  const auto& s = input.shape();
  if (s.size() != 3 || s[2] != kImageChannels)
    throw ShapeError("model input must be H x W x 3, got " + shape_str(s));
  if (&graph.store() != &params_) throw std::invalid_argument("graph is bound to a different parameter store");

  ForwardTrace<Scalar> t;
  t.subbands = fsd::decompose(input, fsd::bind_lifting(graph));
  t.reweighted = fsd::reweight(t.subbands, fsd::bind_weights(graph));
  auto branches = fsd::split(t.reweighted);
  t.luminance = branches.luminance;
  t.texture = branches.texture;
  t.enhanced = switches_.sdr ? sdr::naka_rushton(t.luminance, sdr::bind_naka_rushton(graph)) : t.luminance;
  t.denoised = sdr::denoise(t.texture, sdr::bind_stack(graph, config_.sdr));

  const auto fusion = csr::bind_fusion(graph);
  const auto projected = csr::project(t.enhanced, t.denoised, fusion);
  t.fused = csr::gated_fuse(projected, fusion);
  auto out = csr::rebuild_upsample(t.fused, projected.texture, csr::bind_decoder(graph), config_.decoder_factor());
  const Index h = s[0] * config_.scale(), w = s[1] * config_.scale();
  t.output = (out.shape()[0] == h && out.shape()[1] == w) ? out : crop(out, h, w);
  return t;
}

template <typename Scalar>
Tensor<Scalar> DtpModel<Scalar>::infer(const Tensor<Scalar>& input) const {
  Graph<Scalar> g(params_);
  return forward(g, constant(input)).output.value();
}

template <typename Scalar>
LossTerms<Scalar> DtpModel<Scalar>::loss(const ForwardTrace<Scalar>& trace, const Var<Scalar>& target,
                                         const LossWeights& w) const {
  require_same_shape(trace.output.shape(), target.shape(), "loss: output vs target");
  LossTerms<Scalar> terms;
  terms.l1 = mean(abs(trace.output - target));
  terms.kl = fsd::kl_loss(trace.subbands.ll, config_.prior);
  const double kl_weight = switches_.fsd ? w.kl : 0.0;
  terms.total = terms.l1 * static_cast<Scalar>(w.rec) + terms.kl * static_cast<Scalar>(kl_weight);
  return terms;
}

template <typename Scalar>
nlohmann::json DtpModel<Scalar>::meta() const {
  return {{"model", to_json(config_)}, {"switches", to_json(switches_)}};
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"fsd", {{"mu0", c.prior.mu0}, {"sigma0", c.prior.sigma0}}},
          {"sdr",
           {{"gamma_init", c.sdr.gamma_init},
            {"sigma_init", c.sdr.sigma_init},
            {"beta_init", c.sdr.beta_init},
            {"stages", c.sdr.stages},
            {"width", c.sdr.width}}},
          {"csr",
           {{"width", c.csr.width},
            {"spatial_kernel", c.csr.spatial_kernel},
            {"reduction", c.csr.reduction},
            {"scale", c.csr.scale}}},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.prior.mu0 = j.at("fsd").at("mu0").get<double>();
  c.prior.sigma0 = j.at("fsd").at("sigma0").get<double>();
  const auto& s = j.at("sdr");
  c.sdr.gamma_init = s.at("gamma_init").get<double>();
  c.sdr.sigma_init = s.at("sigma_init").get<double>();
  c.sdr.beta_init = s.at("beta_init").get<double>();
  c.sdr.stages = s.at("stages").get<int>();
  c.sdr.width = s.at("width").get<int>();
  const auto& f = j.at("csr");
  c.csr.width = f.at("width").get<int>();
  c.csr.spatial_kernel = f.at("spatial_kernel").get<int>();
  c.csr.reduction = f.at("reduction").get<int>();
  c.csr.scale = f.at("scale").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

nlohmann::json to_json(const ModuleSwitches& s) { return {{"fsd", s.fsd}, {"sdr", s.sdr}, {"csr", s.csr}}; }

ModuleSwitches switches_from_json(const nlohmann::json& j) {
  return {j.at("fsd").get<bool>(), j.at("sdr").get<bool>(), j.at("csr").get<bool>()};
}

template <typename Scalar>
void save_model(const std::filesystem::path& path, const DtpModel<Scalar>& model, const nlohmann::json& extra_meta) {
  auto meta = model.meta();
  for (auto it = extra_meta.begin(); it != extra_meta.end(); ++it) meta[it.key()] = it.value();
  save_checkpoint(path, model.params(), meta);
}

namespace {

template <typename Scalar>
DtpModel<Scalar> from_store(ParamStore<Scalar> store, const nlohmann::json& meta) {
  if (!meta.contains("model") || !meta.contains("switches"))
    throw CheckpointError("checkpoint has no model configuration in its metadata");
  ModelConfig cfg;
  ModuleSwitches sw;
  try {
    cfg = model_config_from_json(meta.at("model"));
    sw = switches_from_json(meta.at("switches"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad model metadata: ") + e.what());
  }
  return DtpModel<Scalar>(cfg, sw, std::move(store));
}

}  // namespace

template <typename Scalar>
DtpModel<Scalar> load_model(const std::filesystem::path& path) {
  nlohmann::json meta;
  auto store = load_checkpoint<Scalar>(path, &meta);
  return from_store(std::move(store), meta);
}

template <typename Scalar>
DtpModel<Scalar> model_from_checkpoint_bytes(const std::string& bytes) {
  nlohmann::json meta;
  auto store = decode_checkpoint<Scalar>(bytes, &meta);
  return from_store(std::move(store), meta);
}

template class DtpModel<float>;
template class DtpModel<double>;
template void save_model(const std::filesystem::path&, const DtpModel<float>&, const nlohmann::json&);
template void save_model(const std::filesystem::path&, const DtpModel<double>&, const nlohmann::json&);
template DtpModel<float> load_model(const std::filesystem::path&);
template DtpModel<double> load_model(const std::filesystem::path&);
template DtpModel<float> model_from_checkpoint_bytes(const std::string&);
template DtpModel<double> model_from_checkpoint_bytes(const std::string&);

}  // namespace dtp::pipeline
