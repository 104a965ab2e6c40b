#include "dtp/pipeline/gradcheck_suite.hpp"

#include "dtp/init.hpp"

#include <cstdio>
#include <map>

namespace dtp::pipeline {

std::string param_group(const std::string& name) {
  if (name.rfind("fsd.theta.", 0) == 0) return "fsd.theta";
  if (name.rfind("fsd.alpha.", 0) == 0) return "fsd.alpha";
  if (name.rfind("sdr.nr.", 0) == 0) return "sdr.nr";
  if (name.rfind("sdr.stage", 0) == 0) return "sdr.stack";
  if (name.rfind(csr::kFusionPrefix, 0) == 0) return "csr.fusion";
  if (name.rfind(csr::kDecoderPrefix, 0) == 0) return "csr.decoder";
  return "other";
}

bool ModelGradcheck::pass() const {
  if (!report.pass() || groups.empty()) return false;
  for (const auto& g : groups)
    if (!g.pass || g.checked == 0) return false;
  return true;
}

std::string ModelGradcheck::format() const {
  std::string out = report.format();
  char buf[200];
  for (const auto& g : groups) {
    std::snprintf(buf, sizeof buf, "group %-12s params %3lld checked %5lld max_rel_err %.3e %s\n", g.group.c_str(),
                  static_cast<long long>(g.params), static_cast<long long>(g.checked), g.max_rel_error,
                  g.pass && g.checked > 0 ? "PASS" : "FAIL");
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%s max rel err %.3e (tolerance %.1e)\n", pass() ? "PASS" : "FAIL",
                report.max_rel_error(), report.tolerance);
  out += buf;
  return out;
}

ModelGradcheck run_model_gradcheck(const RunConfig& cfg) {
  DtpModel<double> model(cfg.model);
  std::mt19937_64 rng(cfg.gradcheck.seed);
  const Index p = cfg.gradcheck.patch, s = cfg.model.scale();
  const auto input = init::uniform<double>({p, p, kImageChannels}, 0.02, 0.6, rng);
  const auto target = init::uniform<double>({p * s, p * s, kImageChannels}, 0.05, 0.95, rng);
  const auto weights = cfg.train.weights();

  LossFn<double> loss = [&](Graph<double>& g) {
    const auto trace = model.forward(g, constant(input));
    return model.loss(trace, constant(target), weights).total;
  };
  FdOptions opts;
  opts.step = cfg.gradcheck.step;
  opts.tolerance = cfg.gradcheck.tolerance;
  opts.max_entries_per_param = cfg.gradcheck.samples;

  ModelGradcheck out;
  out.report = finite_diff_check(loss, model.params(), opts);
  std::map<std::string, GroupResult> groups;
  std::vector<std::string> order;
  for (const auto& r : out.report.params) {
    const auto name = param_group(r.name);
    auto [it, fresh] = groups.try_emplace(name, GroupResult{name});
    if (fresh) order.push_back(name);
    auto& g = it->second;
    ++g.params;
    g.checked += r.checked;
    g.max_rel_error = std::max(g.max_rel_error, r.max_rel_error);
    g.pass = g.pass && r.pass;
  }
  for (const auto& n : order) out.groups.push_back(groups.at(n));
  return out;
}

}  // namespace dtp::pipeline
