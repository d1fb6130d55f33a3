#pragma once

// Training configuration. The file format is one `key = value` pair per line;
// blank lines and lines starting with '#' are ignored. Keys:
//
//   photo_dir, cartoon_dir   image directories (PNG/JPEG)
//   crop                     square crop side, multiple of 8 (256)
//   batch_size               images per domain per step (1)
//   epochs                   passes over the larger corpus (200)
//   max_steps                stop after this many steps; 0 = use epochs (0)
//   lr_g, lr_d               Adam learning rates (0.0002)
//   beta1, beta2, adam_eps   Adam coefficients (0.9, 0.999, 1e-8)
//   seed                     model init and sampling seed (0)
//   w_style, w_content, w_recon, w_adv    loss weights (20, 1, 0.0001, 1)
//   mode                     full | reconstruction (full)
//   checkpoint_every         steps between checkpoints; 0 = final only (1000)
//   out_dir                  checkpoints and loss log (runs)
//   vgg_weights              converted VGG-19 archive; empty = seeded weights
//   vgg_seed                 seed for the seeded VGG weights (0)
//   disc_width               first discriminator width (64)
//   device                   cpu | cpu:scalar | cpu:avx2 | cpu:avx512 (cpu)
//
// CR_PHOTO_DIR, CR_CARTOON_DIR and CR_DEVICE override the matching keys.

#include <cstdint>
#include <string>

#include "cartoon/losses.hpp"

namespace cr {

enum class TrainMode { Full, Reconstruction };

struct TrainingConfig {
  std::string photo_dir;
  std::string cartoon_dir;
  std::int64_t crop = 256;
  std::int64_t batch_size = 1;
  std::int64_t epochs = 200;
  std::int64_t max_steps = 0;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  LossWeights weights;
  TrainMode mode = TrainMode::Full;
  std::int64_t checkpoint_every = 1000;
  std::string out_dir = "runs";
  std::string vgg_weights;
  std::uint64_t vgg_seed = 0;
  std::int64_t disc_width = 64;
  std::string device = "cpu";

  /// Throws std::invalid_argument describing the first bad field.
  void validate() const;

  /// Canonical text form; parse(serialize()) reproduces the config.
  std::string serialize() const;
  /// Unknown keys and malformed values throw DataError with the line number.
  static TrainingConfig parse(const std::string& text, const std::string& origin = "config");
  static TrainingConfig load(const std::string& path);

  void apply_env_overrides();
  /// Sets one key from its text value (also used for CLI overrides).
  void set(const std::string& key, const std::string& value);
};

/// Selects the SIMD kernel set for a device string; throws on unknown or
/// unsupported devices.
void apply_device(const std::string& device);

}  // namespace cr
