#pragma once

// Adam training over random LR patches with the composite loss, plus
// held-out evaluation and the box-upsampling baseline.

#include "dtp/metrics.hpp"
#include "dtp/numerics/adam.hpp"
#include "dtp/pipeline/data.hpp"
#include "dtp/pipeline/model.hpp"

#include <functional>
#include <stdexcept>
#include <vector>

namespace dtp::pipeline {

struct TrainConfig {
  double learning_rate = 1e-3;
  int steps = 200;
  int batch = 8;        // patches per step
  double lambda_rec = 1.0;
  double lambda_kl = 0.01;
  int patch = 16;       // LR patch edge; smaller images are used whole
  std::uint64_t seed = 1234;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
  LossWeights weights() const { return {lambda_rec, lambda_kl}; }
};

struct StepLoss {
  int step = 0;  // 1-based
  double total = 0.0, l1 = 0.0, kl = 0.0;
};

/// Raised on a non-finite loss or gradient. The model still holds the
/// parameters from before the failing step.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int step, const std::string& what) : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

struct TrainResult {
  std::vector<StepLoss> trace;
};

/// Runs cfg.steps Adam steps. Each step draws cfg.batch patches, evaluates
/// them on up to io::worker_count() threads and sums per-patch gradients in
/// patch-index order, so results do not depend on the thread count.
template <typename Scalar>
TrainResult train(DtpModel<Scalar>& model, const std::vector<Pair>& data, const TrainConfig& cfg,
                  const std::function<void(const StepLoss&)>& on_step = {});

/// Loss terms averaged over whole images, no patching.
template <typename Scalar>
StepLoss dataset_loss(const DtpModel<Scalar>& model, const std::vector<Pair>& data, const LossWeights& w);

template <typename Scalar>
metrics::MetricsReport evaluate(const DtpModel<Scalar>& model, const std::vector<Pair>& data);

/// Scores the dark LR input replicated to HR size.
metrics::MetricsReport evaluate_box_baseline(const std::vector<Pair>& data, int scale);

/// "step,total,l1,kl" rows.
std::string loss_trace_csv(const std::vector<StepLoss>& trace);

}  // namespace dtp::pipeline
