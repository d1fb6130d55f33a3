#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "cartoon/adversary.hpp"
#include "cartoon/config.hpp"
#include "cartoon/dataset.hpp"
#include "cartoon/model.hpp"
#include "cartoon/optim.hpp"

namespace cr {

/// Models, optimizers and step counter of one training run.
class Trainer {
 public:
  explicit Trainer(const TrainingConfig& cfg);

  /// One D-then-G update on (batch,3,H,W) photo and cartoon tensors. In
  /// reconstruction mode only the renderer is trained, on
  /// w_recon * reconstruction. Throws NumericError naming the first
  /// non-finite term and the step.
  LossReport step(const Tensor<float>& photos, const Tensor<float>& cartoons);

  long long step_count() const { return step_; }
  const TrainingConfig& config() const { return cfg_; }
  CartoonModel& model() { return model_; }
  const CartoonModel& model() const { return model_; }
  MultiScaleDiscriminator<float>& discriminator() { return disc_; }

  /// Parameters, optimizer moments, step and config snapshot.
  WeightArchive checkpoint() const;
  /// Restores everything checkpoint() wrote; the config snapshot replaces cfg.
  static Trainer from_checkpoint(const WeightArchive& ar);

 private:
  TrainingConfig cfg_;
  CartoonModel model_;
  MultiScaleDiscriminator<float> disc_;
  Adam opt_g_, opt_d_;
  long long step_ = 0;
};

struct TrainOptions {
  std::optional<std::string> resume;  // checkpoint path
  std::ostream* progress = nullptr;   // human-readable progress lines
  long long stop_after = 0;           // stop once this many steps ran in this call (0 = no limit)
  long long progress_every = 10;
};

struct TrainResult {
  long long steps = 0;
  std::string checkpoint;  // path of the last checkpoint written
  std::string log;         // path of the loss log
  LossReport last;
};

/// Steps per epoch: ceil(max(#photos, #cartoons) / batch_size).
long long planned_steps(const TrainingConfig& cfg, std::size_t photos, std::size_t cartoons);

/// Full training driver: loads data, trains, appends one log record per step
/// to <out_dir>/train_log.tsv and writes <out_dir>/step_<n>.crw checkpoints
/// plus <out_dir>/last.crw. Resuming takes the config snapshot and sampler
/// states from the checkpoint.
TrainResult train(const TrainingConfig& cfg, const TrainOptions& opts = {});

}  // namespace cr
