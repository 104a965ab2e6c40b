#include "dtp/pipeline/config.hpp"

#include "dtp/io/files.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <variant>

namespace dtp::pipeline {

namespace {

using Field = std::variant<double*, int*, std::uint64_t*>;

std::vector<std::pair<std::string, Field>> fields(RunConfig& c) {
  return {
      {"model.seed", &c.model.seed},
      {"fsd.mu0", &c.model.prior.mu0},
      {"fsd.sigma0", &c.model.prior.sigma0},
      {"sdr.gamma_init", &c.model.sdr.gamma_init},
      {"sdr.sigma_init", &c.model.sdr.sigma_init},
      {"sdr.beta_init", &c.model.sdr.beta_init},
      {"sdr.stages", &c.model.sdr.stages},
      {"sdr.width", &c.model.sdr.width},
      {"csr.width", &c.model.csr.width},
      {"csr.spatial_kernel", &c.model.csr.spatial_kernel},
      {"csr.reduction", &c.model.csr.reduction},
      {"csr.scale", &c.model.csr.scale},
      {"train.learning_rate", &c.train.learning_rate},
      {"train.steps", &c.train.steps},
      {"train.batch", &c.train.batch},
      {"train.lambda_rec", &c.train.lambda_rec},
      {"train.lambda_kl", &c.train.lambda_kl},
      {"train.patch", &c.train.patch},
      {"train.seed", &c.train.seed},
      {"train.beta1", &c.train.beta1},
      {"train.beta2", &c.train.beta2},
      {"train.epsilon", &c.train.epsilon},
      {"data.train_pairs", &c.data.train_pairs},
      {"data.heldout_pairs", &c.data.heldout_pairs},
      {"data.hr_size", &c.data.hr_size},
      {"data.ev", &c.data.ev},
      {"data.gamma", &c.data.gamma},
      {"data.noise", &c.data.noise},
      {"data.seed", &c.data.seed},
      {"gradcheck.patch", &c.gradcheck.patch},
      {"gradcheck.step", &c.gradcheck.step},
      {"gradcheck.tolerance", &c.gradcheck.tolerance},
      {"gradcheck.samples", &c.gradcheck.samples},
      {"gradcheck.seed", &c.gradcheck.seed},
  };
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_value(const Field& f) {
  char buf[64];
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double>)
          std::snprintf(buf, sizeof buf, "%.17g", *p);
        else if constexpr (std::is_same_v<T, int>)
          std::snprintf(buf, sizeof buf, "%d", *p);
        else
          std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(*p));
      },
      f);
  return buf;
}

}  // namespace

void RunConfig::validate() const {
  auto wrap = [](const std::function<void()>& check) {
    try {
      check();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  };
  wrap([&] { model.validate(); });
  wrap([&] { train.validate(); });
  wrap([&] { data.validate(model.scale()); });
  if (model.sdr.stages < 1) throw ConfigError("sdr.stages must be >= 1");
  if (model.sdr.width < 1) throw ConfigError("sdr.width must be >= 1");
  if (model.csr.width < 1) throw ConfigError("csr.width must be >= 1");
  if (model.csr.spatial_kernel < 1 || model.csr.spatial_kernel % 2 == 0)
    throw ConfigError("csr.spatial_kernel must be a positive odd number");
  if (model.csr.reduction < 1) throw ConfigError("csr.reduction must be >= 1");
  if (!(model.sdr.gamma_init > 0.0) || !(model.sdr.sigma_init > 0.0) || !(model.sdr.beta_init > 0.0))
    throw ConfigError("sdr.gamma_init, sdr.sigma_init and sdr.beta_init must be positive");
  if (gradcheck.patch < 2 || gradcheck.patch % 2 != 0) throw ConfigError("gradcheck.patch must be an even number >= 2");
  if (!(gradcheck.step > 0.0)) throw ConfigError("gradcheck.step must be positive");
  if (!(gradcheck.tolerance > 0.0)) throw ConfigError("gradcheck.tolerance must be positive");
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  auto table = fields(cfg);
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == key; });
    if (it == table.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "key '" + key + "' given twice");
    const bool ok = std::visit([&](auto* p) { return parse_number(value, *p); }, it->second);
    if (!ok) throw ConfigError(where + "bad value '" + value + "' for key '" + key + "'");
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.string());
}

std::string format_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::string out;
  for (const auto& [key, field] : fields(copy)) out += key + " = " + format_value(field) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  RunConfig c;
  std::vector<std::string> keys;
  for (const auto& f : fields(c)) keys.push_back(f.first);
  return keys;
}

}  // namespace dtp::pipeline
