#include "cartoon/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace cr {

namespace fs = std::filesystem;

namespace {

AdamConfig adam(const TrainingConfig& c, double lr) { return {lr, c.beta1, c.beta2, c.adam_eps}; }

double scalar(const Var<float>& v) { return v.defined() ? static_cast<double>(v.value()[0]) : 0.0; }

void require_finite(const char* term, double v, long long step) {
  if (!std::isfinite(v)) throw NumericError("non-finite loss term: " + std::string(term) + " at step " + std::to_string(step));
}

}  // namespace

Trainer::Trainer(const TrainingConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  model_ = CartoonModel::create(cfg_.seed, cfg_.vgg_weights, cfg_.vgg_seed);
  Rng drng(cfg_.seed ^ 0x9e3779b97f4a7c15ULL);
  disc_ = MultiScaleDiscriminator<float>(drng, cfg_.disc_width);
  opt_g_ = Adam(model_.generator_params(), adam(cfg_, cfg_.lr_g));
  opt_d_ = Adam(disc_.parameters(), adam(cfg_, cfg_.lr_d));
}

LossReport Trainer::step(const Tensor<float>& photos, const Tensor<float>& cartoons) {
  const long long at = step_ + 1;
  const Var<float> p(photos), c(cartoons);
  const LossWeights& w = cfg_.weights;
  LossReport rep;

  // Frozen encoder on fixed inputs: no graph is recorded here.
  FeatureModel<float> fp, fc;
  {
    NoGradGuard ng;
    fp = extract_feature_model(p, model_.modeling);
    fc = extract_feature_model(c, model_.modeling);
  }

  const Var<float> xp_rec = render(fp, model_.renderer);
  const Var<float> xc_rec = render(fc, model_.renderer);
  const Var<float> recon = reconstruction_loss(xp_rec, p, xc_rec, c);
  rep.reconstruction = scalar(recon);
  require_finite("reconstruction", rep.reconstruction, at);

  if (cfg_.mode == TrainMode::Reconstruction) {
    const Var<float> total = total_generator_loss(Var<float>(), Var<float>(), recon, Var<float>(), w);
    rep.total = scalar(total);
    opt_g_.zero_grad();
    backward(total);
    opt_g_.step();
    ++step_;
    return rep;
  }

  const Var<float> y = render(coordinate(fp, fc, model_.coordinator), model_.renderer);

  // Discriminator update: real cartoons vs detached fakes.
  {
    const Var<float> loss_d = adversarial_loss_d(discriminate(c, disc_), discriminate(y.detach(), disc_));
    rep.adversarial_d = scalar(loss_d);
    require_finite("adversarial_d", rep.adversarial_d, at);
    opt_d_.zero_grad();
    backward(loss_d);
    opt_d_.step();
  }

  // Generator update with the discriminator frozen.
  set_trainable(disc_.parameters(), false);
  try {
    const FeatureModel<float> fy = extract_feature_model(y, model_.modeling);
    const Var<float> content = content_loss(fy, fp);
    const Var<float> style = style_loss(fy, fc);
    const Var<float> adv_g = adversarial_loss_g(discriminate(y, disc_));
    rep.content = scalar(content);
    rep.style = scalar(style);
    rep.adversarial_g = scalar(adv_g);
    require_finite("content", rep.content, at);
    require_finite("style", rep.style, at);
    require_finite("adversarial_g", rep.adversarial_g, at);
    const Var<float> total = total_generator_loss(content, style, recon, adv_g, w);
    rep.total = scalar(total);
    require_finite("total", rep.total, at);
    opt_g_.zero_grad();
    backward(total);
    opt_g_.step();
  } catch (...) {
    set_trainable(disc_.parameters(), true);
    throw;
  }
  set_trainable(disc_.parameters(), true);
  ++step_;
  return rep;
}

WeightArchive Trainer::checkpoint() const {
  WeightArchive ar;
  ar.meta["architecture"] = kModelArchitecture;
  ar.meta["kind"] = "training-checkpoint";
  ar.meta["step"] = std::to_string(step_);
  ar.meta["config"] = cfg_.serialize();
  ar.meta["encoder"] = cfg_.vgg_weights.empty() ? "seeded:" + std::to_string(cfg_.vgg_seed) : cfg_.vgg_weights;
  store_params(ar, model_.inference_params());
  store_params(ar, disc_.parameters());
  opt_g_.save(ar, "adam_g");
  opt_d_.save(ar, "adam_d");
  return ar;
}

Trainer Trainer::from_checkpoint(const WeightArchive& ar) {
  if (ar.meta_at("architecture") != kModelArchitecture) throw DataError("checkpoint has a foreign architecture id");
  if (ar.meta_at("kind") != "training-checkpoint") throw DataError("archive is not a training checkpoint");
  TrainingConfig cfg = TrainingConfig::parse(ar.meta_at("config"), "checkpoint config");
  // Weights come from the checkpoint; do not require the original VGG file.
  const std::string vgg = cfg.vgg_weights;
  cfg.vgg_weights.clear();
  Trainer t(cfg);
  t.cfg_.vgg_weights = vgg;
  load_params(ar, t.model_.inference_params());
  load_params(ar, t.disc_.parameters());
  t.opt_g_.load(ar, "adam_g");
  t.opt_d_.load(ar, "adam_d");
  t.step_ = std::stoll(ar.meta_at("step"));
  return t;
}

long long planned_steps(const TrainingConfig& cfg, std::size_t photos, std::size_t cartoons) {
  if (cfg.max_steps > 0) return cfg.max_steps;
  const auto larger = static_cast<long long>(std::max(photos, cartoons));
  const long long per_epoch = (larger + cfg.batch_size - 1) / cfg.batch_size;
  return per_epoch * cfg.epochs;
}

TrainResult train(const TrainingConfig& cfg_in, const TrainOptions& opts) {
  std::optional<Trainer> trainer;
  WeightArchive resumed;
  if (opts.resume) {
    resumed = WeightArchive::load(*opts.resume);
    trainer.emplace(Trainer::from_checkpoint(resumed));
  } else {
    trainer.emplace(cfg_in);
  }
  const TrainingConfig& cfg = trainer->config();
  apply_device(cfg.device);

  // Fail on an unwritable output location before any work.
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  const fs::path probe = fs::path(cfg.out_dir) / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw DataError("checkpoint directory '" + cfg.out_dir + "' is not writable");
  }
  fs::remove(probe, ec);

  Datasets data = load_datasets(cfg);
  if (opts.resume) {
    data.photos.set_rng_state(resumed.meta_at("sampler.photo"));
    data.cartoons.set_rng_state(resumed.meta_at("sampler.cartoon"));
  }
  for (const auto* set : {&data.photos.images(), &data.cartoons.images()}) {
    if (opts.progress) {
      for (const auto& wmsg : set->warnings) *opts.progress << "warning: " << wmsg << "\n";
    }
  }
  const long long total = planned_steps(cfg, data.photos.images().paths.size(), data.cartoons.images().paths.size());

  TrainResult res;
  res.log = (fs::path(cfg.out_dir) / "train_log.tsv").string();
  const bool fresh_log = !fs::exists(res.log) || !opts.resume;
  std::ofstream log(res.log, fresh_log ? std::ios::trunc : std::ios::app);
  if (!log) throw DataError("cannot write loss log " + res.log);
  if (fresh_log) log << loss_log_header() << "\n";

  auto save = [&](const std::string& name) {
    WeightArchive ar = trainer->checkpoint();
    ar.meta["sampler.photo"] = data.photos.rng_state();
    ar.meta["sampler.cartoon"] = data.cartoons.rng_state();
    const std::string path = (fs::path(cfg.out_dir) / name).string();
    ar.save(path);
    res.checkpoint = path;
  };

  long long ran = 0;
  while (trainer->step_count() < total && (opts.stop_after == 0 || ran < opts.stop_after)) {
    const Tensor<float> pb = data.photos.next(cfg.batch_size);
    const Tensor<float> cb = data.cartoons.next(cfg.batch_size);
    res.last = trainer->step(pb, cb);
    ++ran;
    const long long s = trainer->step_count();
    log << loss_log_line(s, res.last) << "\n";
    log.flush();
    if (opts.progress && (s % opts.progress_every == 0 || s == total)) {
      *opts.progress << "step " << s << "/" << total << "  total " << res.last.total << "  recon "
                     << res.last.reconstruction << "\n";
    }
    if (cfg.checkpoint_every > 0 && s % cfg.checkpoint_every == 0) save("step_" + std::to_string(s) + ".crw");
  }
  save("last.crw");
  res.steps = trainer->step_count();
  return res;
}

}  // namespace cr
