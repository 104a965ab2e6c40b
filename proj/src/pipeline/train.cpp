#include "dtp/pipeline/train.hpp"

#include "dtp/io/files.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <random>
#include <thread>

namespace dtp::pipeline {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("train.learning_rate must be >= 0");
  if (steps < 0) throw std::invalid_argument("train.steps must be >= 0");
  if (batch < 1) throw std::invalid_argument("train.batch must be >= 1");
  if (!(lambda_rec > 0.0)) throw std::invalid_argument("train.lambda_rec must be > 0");
  if (!(lambda_kl >= 0.0)) throw std::invalid_argument("train.lambda_kl must be >= 0");
  if (patch < 2 || patch % 2 != 0) throw std::invalid_argument("train.patch must be an even number >= 2");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("train.beta1 and train.beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("train.epsilon must be > 0");
}

namespace {

struct Patch {
  Index pair = 0, y = 0, x = 0, h = 0, w = 0;
};

template <typename Scalar>
Tensor<Scalar> crop_tensor(const Tensor<float>& t, Index y0, Index x0, Index h, Index w) {
  Tensor<Scalar> out({h, w, t.dim(2)});
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (Index c = 0; c < t.dim(2); ++c) out(y, x, c) = static_cast<Scalar>(t(y0 + y, x0 + x, c));
  return out;
}

/// Runs fn(i) for i in [0, n) over up to `threads` workers; rethrows the first failure.
template <typename Fn>
void parallel_for(Index n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (Index i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct SampleResult {
  double total = 0.0, l1 = 0.0, kl = 0.0;
};

}  // namespace

template <typename Scalar>
TrainResult train(DtpModel<Scalar>& model, const std::vector<Pair>& data, const TrainConfig& cfg,
                  const std::function<void(const StepLoss&)>& on_step) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train: no training pairs");
  const int scale = model.config().scale();
  require_scale(data, scale);

  auto& params = model.params();
  Adam<Scalar> adam(params, cfg.adam());
  std::mt19937_64 rng(cfg.seed);
  const unsigned threads = io::worker_count();
  const auto batch = static_cast<std::size_t>(cfg.batch);

  TrainResult result;
  std::vector<Index> order;
  std::size_t cursor = 0;
  for (int step = 1; step <= cfg.steps; ++step) {
    // Sampling happens on this thread only, so the stream is thread-count independent.
    std::vector<Patch> patches(batch);
    for (auto& p : patches) {
      if (cursor == order.size()) {
        order.resize(data.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      p.pair = order[cursor++];
      const auto& lr = data[static_cast<std::size_t>(p.pair)].lr;
      p.h = std::min<Index>(cfg.patch, lr.dim(0));
      p.w = std::min<Index>(cfg.patch, lr.dim(1));
      p.y = std::uniform_int_distribution<Index>(0, lr.dim(0) - p.h)(rng);
      p.x = std::uniform_int_distribution<Index>(0, lr.dim(1) - p.w)(rng);
    }

    std::vector<std::vector<Tensor<Scalar>>> grads(batch);
    std::vector<SampleResult> losses(batch);
    parallel_for(static_cast<Index>(batch), threads, [&](Index i) {
      const auto& p = patches[static_cast<std::size_t>(i)];
      const auto& pair = data[static_cast<std::size_t>(p.pair)];
      Graph<Scalar> g(params);
      const auto trace = model.forward(g, constant(crop_tensor<Scalar>(pair.lr, p.y, p.x, p.h, p.w)));
      const auto target = constant(crop_tensor<Scalar>(pair.hr, p.y * scale, p.x * scale, p.h * scale, p.w * scale));
      const auto terms = model.loss(trace, target, cfg.weights());
      losses[static_cast<std::size_t>(i)] = {static_cast<double>(terms.total.value()[0]),
                                             static_cast<double>(terms.l1.value()[0]),
                                             static_cast<double>(terms.kl.value()[0])};
      grads[static_cast<std::size_t>(i)] = g.gradients(terms.total);
    });

    StepLoss rec{step, 0.0, 0.0, 0.0};
    for (const auto& l : losses) {
      rec.total += l.total;
      rec.l1 += l.l1;
      rec.kl += l.kl;
    }
    rec.total /= static_cast<double>(batch);
    rec.l1 /= static_cast<double>(batch);
    rec.kl /= static_cast<double>(batch);
    if (!std::isfinite(rec.total)) throw TrainingDiverged(step, "non-finite loss at step " + std::to_string(step));

    const Scalar inv = Scalar(1) / static_cast<Scalar>(batch);
    for (Index k = 0; k < params.size(); ++k) {
      auto& acc = params.entry(k).grad;
      acc.array().setZero();
      for (std::size_t i = 0; i < batch; ++i) acc.array() += grads[i][static_cast<std::size_t>(k)].array();
      acc.array() *= inv;
      if (!acc.array().isFinite().all())
        throw TrainingDiverged(step, "non-finite gradient for '" + params.entry(k).name + "' at step " +
                                         std::to_string(step));
    }
    adam.step(params);
    result.trace.push_back(rec);
    if (on_step) on_step(rec);
  }
  return result;
}

template <typename Scalar>
StepLoss dataset_loss(const DtpModel<Scalar>& model, const std::vector<Pair>& data, const LossWeights& w) {
  require_scale(data, model.config().scale());
  std::vector<SampleResult> parts(data.size());
  parallel_for(static_cast<Index>(data.size()), io::worker_count(), [&](Index i) {
    const auto& pair = data[static_cast<std::size_t>(i)];
    Graph<Scalar> g(model.params());
    const auto trace = model.forward(g, constant(pair.lr.template cast<Scalar>()));
    const auto terms = model.loss(trace, constant(pair.hr.template cast<Scalar>()), w);
    parts[static_cast<std::size_t>(i)] = {static_cast<double>(terms.total.value()[0]),
                                          static_cast<double>(terms.l1.value()[0]),
                                          static_cast<double>(terms.kl.value()[0])};
  });
  StepLoss out;
  for (const auto& p : parts) {
    out.total += p.total;
    out.l1 += p.l1;
    out.kl += p.kl;
  }
  const double n = static_cast<double>(data.size());
  out.total /= n;
  out.l1 /= n;
  out.kl /= n;
  return out;
}

template <typename Scalar>
metrics::MetricsReport evaluate(const DtpModel<Scalar>& model, const std::vector<Pair>& data) {
  require_scale(data, model.config().scale());
  metrics::MetricsReport report;
  report.images.resize(data.size());
  parallel_for(static_cast<Index>(data.size()), io::worker_count(), [&](Index i) {
    const auto& pair = data[static_cast<std::size_t>(i)];
    const auto out = model.infer(pair.lr.template cast<Scalar>());
    const auto hr = pair.hr.template cast<Scalar>();
    report.images[static_cast<std::size_t>(i)] = {pair.name, metrics::psnr(out, hr), metrics::ssim(out, hr)};
  });
  return report;
}

metrics::MetricsReport evaluate_box_baseline(const std::vector<Pair>& data, int scale) {
  require_scale(data, scale);
  metrics::MetricsReport report;
  for (const auto& pair : data) {
    const auto up = box_upsample(pair.lr, scale);
    report.images.push_back({pair.name, metrics::psnr(up, pair.hr), metrics::ssim(up, pair.hr)});
  }
  return report;
}

std::string loss_trace_csv(const std::vector<StepLoss>& trace) {
  std::string out = "step,total,l1,kl\n";
  char buf[128];
  for (const auto& s : trace) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g\n", s.step, s.total, s.l1, s.kl);
    out += buf;
  }
  return out;
}

template TrainResult train(DtpModel<float>&, const std::vector<Pair>&, const TrainConfig&,
                           const std::function<void(const StepLoss&)>&);
template TrainResult train(DtpModel<double>&, const std::vector<Pair>&, const TrainConfig&,
                           const std::function<void(const StepLoss&)>&);
template StepLoss dataset_loss(const DtpModel<float>&, const std::vector<Pair>&, const LossWeights&);
template StepLoss dataset_loss(const DtpModel<double>&, const std::vector<Pair>&, const LossWeights&);
template metrics::MetricsReport evaluate(const DtpModel<float>&, const std::vector<Pair>&);
template metrics::MetricsReport evaluate(const DtpModel<double>&, const std::vector<Pair>&);

}  // namespace dtp::pipeline
