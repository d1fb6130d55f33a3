// cartoon: train, render, reconstruct, check.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure,
// 4 memory limit exceeded (--mem-limit-mb).

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "cartoon/config.hpp"
#include "cartoon/image_io.hpp"
#include "cartoon/inference.hpp"
#include "cartoon/selfcheck.hpp"
#include "cartoon/trainer.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3, kMemory = 4 };

// Images above this many pixels are tiled unless --tile is given.
constexpr std::int64_t kAutoTilePixels = 1024 * 1024;

struct TrainArgs {
  std::string config;
  std::optional<std::string> photo_dir, cartoon_dir, out, resume, mode, device;
  std::optional<std::int64_t> epochs, max_steps;
  std::optional<std::uint64_t> seed;
};

struct RenderArgs {
  std::string photo, style, ckpt, out, device = "cpu";
  std::optional<std::int64_t> tile;
  std::int64_t overlap = 64;
  std::size_t mem_limit_mb = 0;
};

struct ReconArgs {
  std::string input, ckpt, out, device = "cpu";
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int run_train(const TrainArgs& a) {
  cr::TrainingConfig cfg = cr::TrainingConfig::load(a.config);
  cfg.apply_env_overrides();
  if (a.photo_dir) cfg.photo_dir = *a.photo_dir;
  if (a.cartoon_dir) cfg.cartoon_dir = *a.cartoon_dir;
  if (a.out) cfg.out_dir = *a.out;
  if (a.mode) cfg.set("mode", *a.mode);
  if (a.device) cfg.device = *a.device;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.max_steps) cfg.max_steps = *a.max_steps;
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  cr::apply_device(cfg.device);

  cr::TrainOptions opts;
  opts.resume = a.resume;
  opts.progress = &std::cerr;
  const auto t0 = std::chrono::steady_clock::now();
  const cr::TrainResult r = cr::train(cfg, opts);
  std::printf("trained %lld steps in %.1fs\ncheckpoint %s\nlog %s\n", r.steps, seconds_since(t0), r.checkpoint.c_str(),
              r.log.c_str());
  return kOk;
}

int run_render(const RenderArgs& a) {
  cr::apply_device(a.device);
  const cr::CartoonModel model = cr::CartoonModel::load(a.ckpt);
  const cr::Tensor<float> photo = cr::load_image(a.photo);
  const cr::Tensor<float> style = cr::load_image(a.style);

  std::optional<cr::MemoryLimitScope> limit;
  if (a.mem_limit_mb > 0) limit.emplace(a.mem_limit_mb * 1024 * 1024);

  const bool tiled = a.tile ? *a.tile > 0 : photo.h() * photo.w() > kAutoTilePixels;
  const auto t0 = std::chrono::steady_clock::now();
  cr::Tensor<float> y;
  if (tiled) {
    cr::HighresReport rep;
    y = cr::cartoonize_highres(photo, style, model, {a.tile.value_or(512), a.overlap}, &rep);
    std::fprintf(stderr, "tiled: %zu tiles, peak tensor memory %.1f MiB, %.1fs\n", rep.tiles,
                 static_cast<double>(rep.peak_bytes) / (1024.0 * 1024.0), seconds_since(t0));
  } else {
    cr::MemoryTracker::reset_peak();
    y = cr::cartoonize(photo, style, model);
    std::fprintf(stderr, "untiled: peak tensor memory %.1f MiB, %.1fs\n",
                 static_cast<double>(cr::MemoryTracker::peak()) / (1024.0 * 1024.0), seconds_since(t0));
  }
  limit.reset();
  cr::save_png(a.out, y);
  return kOk;
}

int run_reconstruct(const ReconArgs& a) {
  cr::apply_device(a.device);
  const cr::CartoonModel model = cr::CartoonModel::load(a.ckpt);
  cr::save_png(a.out, cr::reconstruct(cr::load_image(a.input), model));
  return kOk;
}

int run_check() {
  bool all = true;
  for (const cr::CheckResult& r : cr::run_property_checks()) {
    std::printf("%s  %s: %s\n", r.ok ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    all = all && r.ok;
  }
  return all ? kOk : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CartoonRenderer: photo cartoonization with a frozen VGG encoder, Soft-AdaIN and a trained renderer"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train from a config file");
  train->add_option("--config", ta.config, "key = value config file")->required();
  train->add_option("--photo-dir", ta.photo_dir);
  train->add_option("--cartoon-dir", ta.cartoon_dir);
  train->add_option("--epochs", ta.epochs);
  train->add_option("--max-steps", ta.max_steps);
  train->add_option("--seed", ta.seed);
  train->add_option("--out", ta.out, "output directory");
  train->add_option("--mode", ta.mode, "full | reconstruction");
  train->add_option("--device", ta.device, "cpu | cpu:scalar | cpu:avx2 | cpu:avx512");
  train->add_option("--resume", ta.resume, "checkpoint to continue from");

  RenderArgs ra;
  auto* render = app.add_subcommand("render", "cartoonize a photo with a reference cartoon");
  render->add_option("--photo", ra.photo)->required();
  render->add_option("--style", ra.style)->required();
  render->add_option("--ckpt", ra.ckpt)->required();
  render->add_option("--out", ra.out, "output PNG")->required();
  render->add_option("--tile", ra.tile, "tile side (multiple of 8); 0 forces the untiled path");
  render->add_option("--overlap", ra.overlap, "tile margin in pixels")->capture_default_str();
  render->add_option("--mem-limit-mb", ra.mem_limit_mb, "fail if tensor memory would exceed this");
  render->add_option("--device", ra.device)->capture_default_str();

  ReconArgs ca;
  auto* recon = app.add_subcommand("reconstruct", "render the uncoordinated feature model of an image");
  recon->add_option("--input", ca.input)->required();
  recon->add_option("--ckpt", ca.ckpt)->required();
  recon->add_option("--out", ca.out)->required();
  recon->add_option("--device", ca.device)->capture_default_str();

  auto* check = app.add_subcommand("check", "run the built-in property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return run_train(ta);
    if (*render) return run_render(ra);
    if (*recon) return run_reconstruct(ca);
    if (*check) return run_check();
  } catch (const cr::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const cr::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const cr::MemoryBudgetError& e) {
    std::cerr << "memory limit: " << e.what() << "\n";
    return kMemory;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
