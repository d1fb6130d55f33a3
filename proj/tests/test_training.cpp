#include <cmath>
#include <fstream>
#include <sstream>

#include "cartoon/trainer.hpp"
#include "doctest.h"
#include "support/corpus.hpp"
#include "support/gradcheck.hpp"
#include "support/tempdir.hpp"

using namespace cr;
using crtest::TempDir;

namespace {

TrainingConfig small_config(TrainMode mode) {
  TrainingConfig cfg;
  cfg.crop = 64;
  cfg.seed = 5;
  cfg.mode = mode;
  cfg.disc_width = 8;
  return cfg;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t hash_of(const ParamList<float>& ps) { return parameter_hash(ps); }

}  // namespace

TEST_SUITE_BEGIN("training");

TEST_CASE("planned_steps: ceil(max(#photos, #cartoons) / batch) per epoch") {
  TrainingConfig cfg;
  cfg.batch_size = 2;
  cfg.epochs = 3;
  CHECK(planned_steps(cfg, 5, 3) == 9);
  CHECK(planned_steps(cfg, 2, 8) == 12);
  cfg.max_steps = 4;
  CHECK(planned_steps(cfg, 5, 3) == 4);
}

TEST_CASE("one full step moves generator and discriminator but not the encoder") {
  Trainer t(small_config(TrainMode::Full));
  const auto enc = t.model().modeling.parameter_hash();
  const auto coord = hash_of(t.model().coordinator.parameters());
  const auto rend = hash_of(t.model().renderer.parameters());
  const auto disc = hash_of(t.discriminator().parameters());
  const LossReport r = t.step(crtest::synth_photo(1, 64, 64), crtest::synth_cartoon(2, 64, 64));
  for (double v : {r.content, r.style, r.adversarial_g, r.adversarial_d, r.reconstruction, r.total}) CHECK(std::isfinite(v));
  CHECK(r.content > 0);
  CHECK(r.style > 0);
  CHECK(r.total == doctest::Approx(total_generator_loss(r, t.config().weights)));
  CHECK(t.step_count() == 1);
  CHECK(t.model().modeling.parameter_hash() == enc);
  CHECK(hash_of(t.model().coordinator.parameters()) != coord);
  CHECK(hash_of(t.model().renderer.parameters()) != rend);
  CHECK(hash_of(t.discriminator().parameters()) != disc);
}

TEST_CASE("reconstruction mode trains only the renderer") {
  TrainingConfig cfg = small_config(TrainMode::Reconstruction);
  cfg.crop = 32;
  Trainer t(cfg);
  const auto coord = hash_of(t.model().coordinator.parameters());
  const auto rend = hash_of(t.model().renderer.parameters());
  const auto disc = hash_of(t.discriminator().parameters());
  const LossReport r = t.step(crtest::synth_photo(1, 32, 32), crtest::synth_cartoon(2, 32, 32));
  CHECK(r.reconstruction > 0);
  CHECK(r.content == 0);
  CHECK(r.adversarial_d == 0);
  CHECK(r.total == doctest::Approx(cfg.weights.recon * r.reconstruction));
  CHECK(hash_of(t.model().coordinator.parameters()) == coord);
  CHECK(hash_of(t.discriminator().parameters()) == disc);
  CHECK(hash_of(t.model().renderer.parameters()) != rend);
}

TEST_CASE("non-finite inputs stop the step with a named term") {
  Trainer t(small_config(TrainMode::Full));
  Tensor<float> bad = crtest::synth_photo(1, 64, 64);
  bad[17] = std::nanf("");
  CHECK_THROWS_WITH_AS(t.step(bad, crtest::synth_cartoon(2, 64, 64)), doctest::Contains("non-finite loss term"),
                       NumericError);
}

TEST_CASE("checkpoint save -> load -> save is byte-identical") {
  Trainer t(small_config(TrainMode::Full));
  t.step(crtest::synth_photo(1, 64, 64), crtest::synth_cartoon(2, 64, 64));
  const auto bytes = t.checkpoint().serialize();
  const Trainer back = Trainer::from_checkpoint(WeightArchive::parse(bytes, "mem"));
  CHECK(back.checkpoint().serialize() == bytes);
  CHECK(back.step_count() == 1);
  CHECK(back.config().serialize() == t.config().serialize());
  const WeightArchive ar = WeightArchive::parse(bytes, "mem");
  CHECK(ar.meta_at("kind") == "training-checkpoint");
  CHECK(ar.has("modeling.conv4_1.weight"));
  CHECK(ar.has("adam_g.m.renderer.head.weight"));
  CHECK(ar.has("adam_d.v.discriminator.scale0.head.bias"));
}

TEST_CASE("continuing from a checkpoint equals training straight through") {
  const Tensor<float> p1 = crtest::synth_photo(1, 64, 64), p2 = crtest::synth_photo(3, 64, 64);
  const Tensor<float> c1 = crtest::synth_cartoon(2, 64, 64), c2 = crtest::synth_cartoon(4, 64, 64);
  Trainer a(small_config(TrainMode::Full));
  a.step(p1, c1);
  const LossReport ra = a.step(p2, c2);

  Trainer b(small_config(TrainMode::Full));
  b.step(p1, c1);
  Trainer b2 = Trainer::from_checkpoint(WeightArchive::parse(b.checkpoint().serialize(), "mem"));
  const LossReport rb = b2.step(p2, c2);
  CHECK(ra.total == rb.total);
  CHECK(a.checkpoint().serialize() == b2.checkpoint().serialize());
}

TEST_CASE("train(): logs, checkpoints and an interrupted run resumes exactly") {
  TempDir dir("train");
  crtest::write_corpus(dir.path() / "photos", "p", 3, 40, 40, 1, crtest::synth_photo);
  crtest::write_corpus(dir.path() / "cartoons", "c", 2, 40, 40, 7, crtest::synth_cartoon);
  TrainingConfig cfg = small_config(TrainMode::Reconstruction);
  cfg.crop = 32;
  cfg.photo_dir = dir.str("photos");
  cfg.cartoon_dir = dir.str("cartoons");
  cfg.out_dir = dir.str("run");
  cfg.max_steps = 4;
  cfg.checkpoint_every = 2;

  const TrainResult straight = train(cfg);
  CHECK(straight.steps == 4);
  CHECK(std::filesystem::exists(dir.str("run/step_2.crw")));
  CHECK(std::filesystem::exists(dir.str("run/step_4.crw")));
  const std::string log = read_text(straight.log);
  const std::string last = read_text(dir.str("run/last.crw"));
  std::istringstream lines(log);
  std::string header, line;
  std::getline(lines, header);
  CHECK(header == loss_log_header());
  int n = 0;
  while (std::getline(lines, line)) {
    ++n;
    CHECK(line.rfind(std::to_string(n) + "\t", 0) == 0);
  }
  CHECK(n == 4);

  std::filesystem::remove_all(dir.str("run"));
  TrainOptions stop;
  stop.stop_after = 3;
  CHECK(train(cfg, stop).steps == 3);
  TrainOptions resume;
  resume.resume = dir.str("run/last.crw");
  TrainingConfig ignored = cfg;
  ignored.seed = 999;  // the snapshot wins on resume
  const TrainResult resumed = train(ignored, resume);
  CHECK(resumed.steps == 4);
  CHECK(read_text(resumed.log) == log);
  CHECK(read_text(dir.str("run/last.crw")) == last);
}

TEST_CASE("train(): unusable inputs fail before any step") {
  TempDir dir("trainbad");
  TrainingConfig cfg = small_config(TrainMode::Reconstruction);
  cfg.photo_dir = dir.str("missing");
  cfg.cartoon_dir = dir.str("missing");
  cfg.out_dir = dir.str("run");
  CHECK_THROWS_AS(train(cfg), DataError);
  CHECK_FALSE(std::filesystem::exists(dir.str("run/last.crw")));
}

TEST_SUITE_END();
