#include "dtp/pipeline/ablation.hpp"

#include <cstdio>

namespace dtp::pipeline {

std::vector<ModuleSwitches> ablation_grid() {
  return {{false, false, false}, {true, false, false}, {false, true, false}, {false, false, true},
          {true, true, false},   {true, false, true},  {false, true, true},  {true, true, true}};
}

void compute_deltas(AblationReport& report) {
  if (report.rows.empty()) return;
  const auto base = report.rows.front();
  for (auto& r : report.rows) {
    r.delta_psnr = r.psnr - base.psnr;
    r.delta_ssim = r.ssim - base.ssim;
  }
}

namespace {

const char* mark(bool on) { return on ? "on" : "off"; }

}  // namespace

std::string AblationReport::csv() const {
  std::string out = "fsd,sdr,csr,psnr_db,delta_psnr_db,ssim,delta_ssim,lpips\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%.2f,%+.2f,%.3f,%+.3f,n/a\n", mark(r.switches.fsd), mark(r.switches.sdr),
                  mark(r.switches.csr), r.psnr, r.delta_psnr, r.ssim, r.delta_ssim);
    out += buf;
  }
  return out;
}

std::string AblationReport::table() const {
  char buf[160];
  std::string rule = "+-------+-----+-----+-----+-----------------+------------------+-------+\n";
  std::string out = rule;
  std::snprintf(buf, sizeof buf, "| %-5s | %-3s | %-3s | %-3s | %-15s | %-16s | %-5s |\n", "Scale", "FSD", "SDR", "CSR",
                "PSNR (dB)", "SSIM", "LPIPS");
  out += buf;
  out += rule;
  const std::string scale_label = "x" + std::to_string(scale);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    char psnr[32], ssim[32];
    std::snprintf(psnr, sizeof psnr, "%.2f (%+.2f)", r.psnr, r.delta_psnr);
    std::snprintf(ssim, sizeof ssim, "%.3f (%+.3f)", r.ssim, r.delta_ssim);
    std::snprintf(buf, sizeof buf, "| %-5s | %-3s | %-3s | %-3s | %15s | %16s | %5s |\n",
                  i == 0 ? scale_label.c_str() : "", r.switches.fsd ? "v" : "x", r.switches.sdr ? "v" : "x",
                  r.switches.csr ? "v" : "x", psnr, ssim, "n/a");
    out += buf;
    // Group separators after the baseline, the singles and the pairs.
    if (rows.size() == 8 && (i == 0 || i == 3 || i == 6)) out += rule;
  }
  out += rule;
  out += "lpips: n/a (no perceptual network)\n";
  return out;
}

AblationReport run_ablation(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                            const std::vector<Pair>& train_set, const std::vector<Pair>& heldout,
                            const AblationProgress& progress) {
  AblationReport report;
  report.scale = model_cfg.scale();
  for (const auto& sw : ablation_grid()) {
    DtpModel<float> model(model_cfg, sw);
    const auto result = train(model, train_set, train_cfg, [&](const StepLoss& s) {
      if (progress) progress(sw, s);
    });
    const auto scores = evaluate(model, heldout);
    AblationRow row;
    row.switches = sw;
    row.psnr = scores.mean_psnr();
    row.ssim = scores.mean_ssim();
    row.final_loss = result.trace.empty() ? 0.0 : result.trace.back().total;
    report.rows.push_back(row);
  }
  compute_deltas(report);
  return report;
}

}  // namespace dtp::pipeline
