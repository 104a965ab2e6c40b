// dtp: synthesize data, train, infer, ablate, gradient-check and evaluate.

#include "dtp/io/files.hpp"
#include "dtp/io/image_io.hpp"
#include "dtp/pipeline/ablation.hpp"
#include "dtp/pipeline/config.hpp"
#include "dtp/pipeline/gradcheck_suite.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace dtp;
using namespace dtp::pipeline;

namespace {

/// Failure with a message for the single ERROR: line.
struct CommandError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig config_or_default(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string hr_dir, out;
  int scale = 2;
  double ev = -2.0, gamma = 1.0, noise = 0.02;
  std::uint64_t seed = 2024;
  int count = 64, size = 32;
};

void run_synth(const SynthArgs& a) {
  std::vector<std::pair<std::string, Tensor<float>>> hr;
  if (a.hr_dir.empty()) {
    if (a.count < 1) throw CommandError("--count must be >= 1");
    for (int i = 0; i < a.count; ++i) {
      std::mt19937_64 rng(derive_seed(a.seed, 2 * static_cast<std::uint64_t>(i)));
      char name[32];
      std::snprintf(name, sizeof name, "synth_%03d", i);
      hr.emplace_back(name, synthetic_hr(a.size, a.size, rng));
    }
  } else {
    hr = read_images(a.hr_dir);
    if (hr.empty()) throw CommandError("no images in " + a.hr_dir);
  }
  const DegradationSpec spec{DegradationSpec::exposure_from_ev(a.ev), a.gamma, a.noise, a.scale, a.seed};
  const auto pairs = degrade_all(hr, spec);
  write_pairs(a.out, pairs);
  std::cout << "wrote " << pairs.size() << " pairs to " << a.out << " (lr/, hr/)\n";
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config, data, out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void run_train(const TrainArgs& a) {
  auto cfg = config_or_default(a.config);
  if (a.seed) {
    cfg.train.seed = *a.seed;
    cfg.model.seed = *a.seed;
  }
  const auto data = a.data.empty() ? synthetic_pairs(cfg.data, cfg.model.scale(), Split::Train) : read_pairs(a.data);
  require_scale(data, cfg.model.scale());
  fs::create_directories(a.out);
  io::write_file_atomic(fs::path(a.out) / "config.cfg", format_config(cfg));

  DtpModel<float> model(cfg.model);
  std::vector<StepLoss> trace;
  auto on_step = [&](const StepLoss& s) {
    trace.push_back(s);
    if (!a.quiet) std::printf("step %d total %.6f l1 %.6f kl %.6f\n", s.step, s.total, s.l1, s.kl);
  };
  const nlohmann::json extra = {{"train", {{"steps", cfg.train.steps}, {"seed", cfg.train.seed}}}};
  try {
    train(model, data, cfg.train, on_step);
  } catch (const TrainingDiverged& e) {
    save_model(fs::path(a.out) / "model.ckpt", model, extra);
    io::write_file_atomic(fs::path(a.out) / "loss.csv", loss_trace_csv(trace));
    throw CommandError(std::string(e.what()) + "; last finite checkpoint kept in " +
                       (fs::path(a.out) / "model.ckpt").string());
  }
  save_model(fs::path(a.out) / "model.ckpt", model, extra);
  io::write_file_atomic(fs::path(a.out) / "loss.csv", loss_trace_csv(trace));
  std::cout << "wrote " << (fs::path(a.out) / "model.ckpt").string() << " and loss.csv\n";
}

// ---------------------------------------------------------------- infer

/// Signed detail maps are shown around mid-grey.
Tensor<float> to_visible(const Tensor<double>& t, bool signed_map) {
  Tensor<float> out = t.cast<float>();
  if (signed_map) out.array() += 0.5f;
  return out;
}

Tensor<double> channels(const Var<double>& v, Index begin, Index count) { return slice_channels(v, begin, count).value(); }

void emit_intermediates(const DtpModel<double>& model, const Tensor<float>& input, const fs::path& dir) {
  Graph<double> g(model.params());
  const auto t = model.forward(g, constant(input.cast<double>()));
  fs::create_directories(dir);
  const std::map<std::string, std::pair<Tensor<double>, bool>> maps = {
      {"subband_ll", {t.subbands.ll.value(), false}},
      {"subband_lh", {t.subbands.lh.value(), true}},
      {"subband_hl", {t.subbands.hl.value(), true}},
      {"subband_hh", {t.subbands.hh.value(), true}},
      {"luminance", {t.luminance.value(), false}},
      {"luminance_enhanced", {t.enhanced.value(), false}},
      {"texture_lh", {channels(t.texture, 0, 3), true}},
      {"texture_hl", {channels(t.texture, 3, 3), true}},
      {"texture_hh", {channels(t.texture, 6, 3), true}},
      {"texture_denoised_lh", {channels(t.denoised, 0, 3), true}},
      {"texture_denoised_hl", {channels(t.denoised, 3, 3), true}},
      {"texture_denoised_hh", {channels(t.denoised, 6, 3), true}},
  };
  for (const auto& [name, m] : maps) io::write_image(dir / (name + ".png"), to_visible(m.first, m.second));
}

struct InferArgs {
  std::string checkpoint, in, out;
  bool emit_subbands = false;
};

void run_infer(const InferArgs& a) {
  const auto model = load_model<float>(a.checkpoint);
  struct Job {
    std::string label;
    Tensor<float> input;
    fs::path out;
  };
  std::vector<Job> jobs;
  if (fs::is_directory(a.in)) {
    for (auto& [name, image] : read_images(a.in))
      jobs.push_back({name, std::move(image), fs::path(a.out) / (name + ".png")});
    if (jobs.empty()) throw CommandError("no images in " + a.in);
    fs::create_directories(a.out);
  } else {
    if (!fs::exists(a.in)) throw CommandError("input not found: " + a.in);
    if (!io::is_image_path(a.out)) throw CommandError("--out must end in .png or .ppm when --in is a file");
    jobs.push_back({a.in, io::read_image(a.in), a.out});
  }
  std::optional<DtpModel<double>> wide;
  if (a.emit_subbands) wide.emplace(model.cast<double>());
  for (const auto& job : jobs) {
    io::write_image(job.out, model.infer(job.input));
    if (wide) emit_intermediates(*wide, job.input, job.out.parent_path() / (job.out.stem().string() + "_intermediates"));
    std::cout << job.label << " -> " << job.out.string() << "\n";
  }
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
  std::string config, out;
  bool quiet = false;
};

void run_ablate(const AblateArgs& a) {
  const auto cfg = config_or_default(a.config);
  const auto train_set = synthetic_pairs(cfg.data, cfg.model.scale(), Split::Train);
  const auto heldout = synthetic_pairs(cfg.data, cfg.model.scale(), Split::Heldout);
  const auto report = run_ablation(cfg.model, cfg.train, train_set, heldout, [&](const ModuleSwitches& sw, const StepLoss& s) {
    if (!a.quiet && (s.step == 1 || s.step % 20 == 0 || s.step == cfg.train.steps))
      std::printf("[%s] step %d total %.6f\n", sw.label().c_str(), s.step, s.total);
  });
  fs::create_directories(a.out);
  io::write_file_atomic(fs::path(a.out) / "ablation.csv", report.csv());
  io::write_file_atomic(fs::path(a.out) / "ablation.txt", report.table());
  io::write_file_atomic(fs::path(a.out) / "config.cfg", format_config(cfg));
  std::cout << report.table();
}

// ---------------------------------------------------------------- gradcheck

void run_gradcheck(const std::string& config) {
  const auto result = run_model_gradcheck(config_or_default(config));
  std::cout << result.format();
  if (!result.pass()) throw CommandError("gradient check failed");
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string pred_dir, gt_dir, out;
};

void run_evaluate(const EvaluateArgs& a) {
  const auto pred = read_images(a.pred_dir);
  const auto gt = read_images(a.gt_dir);
  std::map<std::string, const Tensor<float>*> truth;
  for (const auto& [name, image] : gt) truth[name] = &image;
  metrics::MetricsReport report;
  const fs::path hist = fs::path(a.out) / "histograms";
  fs::create_directories(hist);
  for (const auto& [name, image] : pred) {
    auto it = truth.find(name);
    if (it == truth.end()) throw CommandError("no ground truth for '" + name + "' in " + a.gt_dir);
    if (image.shape() != it->second->shape())
      throw CommandError("shape mismatch for '" + name + "': prediction " + shape_str(image.shape()) +
                         ", ground truth " + shape_str(it->second->shape()));
    report.images.push_back({name, metrics::psnr(image, *it->second), metrics::ssim(image, *it->second)});
    io::write_file_atomic(hist / (name + "_pred.csv"), metrics::histogram_csv(metrics::rgb_histograms(image)));
    io::write_file_atomic(hist / (name + "_gt.csv"), metrics::histogram_csv(metrics::rgb_histograms(*it->second)));
  }
  if (report.images.empty()) throw CommandError("no images in " + a.pred_dir);
  io::write_file_atomic(fs::path(a.out) / "metrics.csv", report.csv());
  io::write_file_atomic(fs::path(a.out) / "metrics.json", report.json());
  std::printf("%zu images  PSNR %.4f dB  SSIM %.6f  LPIPS n/a\n", report.images.size(), report.mean_psnr(),
              report.mean_ssim());
}

std::string one_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-light image super-resolution: decoupling, dual-path enhancement and gated fusion"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth", "Write paired dark LR / normal HR images");
  cmd_synth->add_option("--hr-dir", synth.hr_dir, "Directory of HR images; omit to generate procedural scenes")
      ->check(CLI::ExistingDirectory);
  cmd_synth->add_option("--out", synth.out, "Output directory (gets lr/ and hr/)")->required();
  cmd_synth->add_option("--scale", synth.scale, "Box downsampling factor")->check(CLI::IsMember({2, 4}))
      ->capture_default_str();
  cmd_synth->add_option("--ev", synth.ev, "Exposure change in EV; exposure factor is 2^ev")->capture_default_str();
  cmd_synth->add_option("--gamma", synth.gamma, "Gamma darkening exponent (>= 1)")->capture_default_str();
  cmd_synth->add_option("--noise", synth.noise, "Gaussian noise std in the darkened domain")->capture_default_str();
  cmd_synth->add_option("--seed", synth.seed, "Noise and scene seed")->capture_default_str();
  cmd_synth->add_option("--count", synth.count, "Procedural scenes to generate without --hr-dir")
      ->capture_default_str();
  cmd_synth->add_option("--size", synth.size, "Procedural scene edge in pixels")->capture_default_str();

  TrainArgs tr;
  auto* cmd_train = app.add_subcommand("train", "Train a model; writes model.ckpt, loss.csv and config.cfg");
  cmd_train->add_option("--config", tr.config, "Run configuration file (defaults built in)")
      ->check(CLI::ExistingFile);
  cmd_train->add_option("--data", tr.data, "Pair directory from synth; omit to use the configured synthetic set")
      ->check(CLI::ExistingDirectory);
  cmd_train->add_option("--out", tr.out, "Output directory")->required();
  cmd_train->add_option("--seed", tr.seed, "Overrides model.seed and train.seed");
  cmd_train->add_flag("--quiet", tr.quiet, "Do not print per-step losses");

  InferArgs inf;
  auto* cmd_infer = app.add_subcommand("infer", "Super-resolve an image or a directory of images");
  cmd_infer->add_option("--checkpoint", inf.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  cmd_infer->add_option("--in", inf.in, "Input image or directory")->required();
  cmd_infer->add_option("--out", inf.out, "Output image (.png/.ppm) or directory")->required();
  cmd_infer->add_flag("--emit-subbands", inf.emit_subbands,
                      "Also write subbands and branch intermediates to <out stem>_intermediates/");

  AblateArgs ab;
  auto* cmd_ablate = app.add_subcommand("ablate", "Train all eight module on/off combinations and report");
  cmd_ablate->add_option("--config", ab.config, "Run configuration file (defaults built in)")
      ->check(CLI::ExistingFile);
  cmd_ablate->add_option("--out", ab.out, "Output directory (ablation.csv, ablation.txt)")->required();
  cmd_ablate->add_flag("--quiet", ab.quiet, "Do not print training progress");

  std::string gc_config;
  auto* cmd_gc = app.add_subcommand("gradcheck", "Finite-difference check of every parameter gradient");
  cmd_gc->add_option("--config", gc_config, "Run configuration file (defaults built in)")->check(CLI::ExistingFile);

  EvaluateArgs ev;
  auto* cmd_eval = app.add_subcommand("evaluate", "PSNR / SSIM report and RGB histograms");
  cmd_eval->add_option("--pred-dir", ev.pred_dir, "Predicted images")->required()->check(CLI::ExistingDirectory);
  cmd_eval->add_option("--gt-dir", ev.gt_dir, "Ground-truth images with matching names")
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd_eval->add_option("--out", ev.out, "Output directory (metrics.csv, metrics.json, histograms/)")->required();

  if (argc > 1 && argv[1][0] != '-' && !app.get_subcommand_no_throw(argv[1])) {
    std::cerr << "ERROR: unknown subcommand '" << argv[1] << "'\n" << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR: " << one_line(e.what()) << "\n";
    const auto sub = app.get_subcommands();
    std::cerr << (sub.empty() ? app.help() : sub.front()->help());
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (*cmd_synth) run_synth(synth);
    else if (*cmd_train) run_train(tr);
    else if (*cmd_infer) run_infer(inf);
    else if (*cmd_ablate) run_ablate(ab);
    else if (*cmd_gc) run_gradcheck(gc_config);
    else if (*cmd_eval) run_evaluate(ev);
  } catch (const std::exception& e) {
    std::cout.flush();
    std::cerr << "ERROR: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}
