#pragma once

// Module on/off grid: every combination trained with the same seeds and
// budget, scored on the same held-out pairs, reported against the all-off row.

#include "dtp/pipeline/train.hpp"

#include <functional>
#include <string>
#include <vector>

namespace dtp::pipeline {

/// baseline, FSD, SDR, CSR, FSD+SDR, FSD+CSR, SDR+CSR, full
std::vector<ModuleSwitches> ablation_grid();

struct AblationRow {
  ModuleSwitches switches;
  double psnr = 0.0;
  double ssim = 0.0;
  double delta_psnr = 0.0;  // against the first (all-off) row
  double delta_ssim = 0.0;
  double final_loss = 0.0;  // last step of the loss trace
};

struct AblationReport {
  std::vector<AblationRow> rows;
  int scale = 2;

  /// fsd,sdr,csr,psnr_db,delta_psnr_db,ssim,delta_ssim,lpips
  std::string csv() const;
  /// Aligned text table in the same row layout, with grouping rules.
  std::string table() const;
};

/// Fills the delta columns from rows[0].
void compute_deltas(AblationReport& report);

using AblationProgress = std::function<void(const ModuleSwitches&, const StepLoss&)>;

AblationReport run_ablation(const ModelConfig& model, const TrainConfig& train_cfg, const std::vector<Pair>& train_set,
                            const std::vector<Pair>& heldout, const AblationProgress& progress = {});

}  // namespace dtp::pipeline
