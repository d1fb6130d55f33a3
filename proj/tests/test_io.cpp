#include <cmath>
#include <cstdlib>
#include <fstream>
#include <json.hpp>

#include "cartoon/archive.hpp"
#include "cartoon/config.hpp"
#include "cartoon/dataset.hpp"
#include "cartoon/image_io.hpp"
#include "cartoon/optim.hpp"
#include "cartoon/simd/kernels.hpp"
#include "doctest.h"
#include "support/corpus.hpp"
#include "support/gradcheck.hpp"
#include "support/tempdir.hpp"

using namespace cr;
using crtest::TempDir;

namespace {

std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::string& path, const std::vector<unsigned char>& b) {
  std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

WeightArchive sample_archive() {
  WeightArchive ar;
  ar.meta["architecture"] = "test";
  ar.meta["zeta"] = "last";
  ar.put("b.weight", crtest::random_tensor_f({2, 3, 3, 3}, 1));
  ar.put("a.bias", crtest::random_tensor_f({1, 2, 1, 1}, 2));
  ar.put("d.double", crtest::random_tensor({1, 1, 2, 2}, 3));
  return ar;
}

}  // namespace

TEST_SUITE_BEGIN("archive");

TEST_CASE("FNV-1a 64 reference digests") {
  CHECK(fnv1a_hex({}) == "cbf29ce484222325");
  CHECK(fnv1a_hex({'a'}) == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex({'f', 'o', 'o', 'b', 'a', 'r'}) == "85944171f73967e8");
}

TEST_CASE("archive header layout") {
  const std::vector<unsigned char> b = sample_archive().serialize();
  REQUIRE(b.size() > 16);
  CHECK(std::string(b.begin(), b.begin() + 8) == std::string("CRWARCH\0", 8));
  CHECK(b[8] == 1);
  CHECK(b[9] == 0);
  CHECK(b[12] == 2);  // two metadata entries
}

TEST_CASE("serialize -> parse -> serialize is byte-identical and lossless") {
  const WeightArchive ar = sample_archive();
  const auto bytes = ar.serialize();
  const WeightArchive back = WeightArchive::parse(bytes, "mem");
  CHECK(back.serialize() == bytes);
  CHECK(back.meta == ar.meta);
  const Tensor<float> w = back.get_f32("b.weight");
  const Tensor<float> orig = crtest::random_tensor_f({2, 3, 3, 3}, 1);
  REQUIRE(w.shape() == orig.shape());
  for (std::int64_t i = 0; i < w.numel(); ++i) CHECK(w[i] == orig[i]);
  CHECK(back.tensors.at("d.double").dtype == 2);
}

TEST_CASE("insertion order does not change the bytes") {
  WeightArchive a, b;
  a.put("x", Tensor<float>(1, 1, 1, 2, 1.f));
  a.put("y", Tensor<float>(1, 1, 1, 2, 2.f));
  b.put("y", Tensor<float>(1, 1, 1, 2, 2.f));
  b.put("x", Tensor<float>(1, 1, 1, 2, 1.f));
  CHECK(a.serialize() == b.serialize());
}

TEST_CASE("corruption is detected") {
  const auto good = sample_archive().serialize();
  SUBCASE("flipped payload byte") {
    auto bad = good;
    bad[bad.size() / 2] ^= 0x40;
    CHECK_THROWS_WITH_AS(WeightArchive::parse(bad, "f"), doctest::Contains("checksum mismatch"), DataError);
  }
  SUBCASE("truncated") {
    auto bad = good;
    bad.resize(bad.size() - 9);
    CHECK_THROWS_AS(WeightArchive::parse(bad, "f"), DataError);
  }
  SUBCASE("bad magic") {
    auto bad = good;
    bad[0] = 'X';
    CHECK_THROWS_WITH_AS(WeightArchive::parse(bad, "f"), doctest::Contains("bad magic"), DataError);
  }
  SUBCASE("empty") { CHECK_THROWS_AS(WeightArchive::parse({}, "f"), DataError); }
}

TEST_CASE("save/load through a file; no temporary left behind") {
  TempDir dir("archive");
  const WeightArchive ar = sample_archive();
  ar.save(dir.str("a.crw"));
  CHECK_FALSE(std::filesystem::exists(dir.str("a.crw.tmp")));
  CHECK(read_bytes(dir.str("a.crw")) == ar.serialize());
  CHECK(WeightArchive::load(dir.str("a.crw")).serialize() == ar.serialize());
  CHECK_THROWS_WITH_AS(WeightArchive::load(dir.str("missing.crw")), doctest::Contains("cannot open"), DataError);
}

TEST_CASE("load_params names missing and mismatched tensors") {
  Rng rng(1);
  Conv2dLayer<float> conv(2, 4, 3, {}, rng);
  ParamList<float> ps;
  conv.collect("m.conv", ps);
  WeightArchive ar;
  store_params(ar, ps);
  Rng rng2(2);
  Conv2dLayer<float> other(2, 4, 3, {}, rng2);
  ParamList<float> qs;
  other.collect("m.conv", qs);
  load_params(ar, qs);
  CHECK(parameter_hash(qs) == parameter_hash(ps));

  ar.tensors.erase("m.conv.bias");
  CHECK_THROWS_WITH_AS(load_params(ar, qs), doctest::Contains("m.conv.bias"), DataError);
  Conv2dLayer<float> wide(3, 4, 3, {}, rng2);
  ParamList<float> ws;
  wide.collect("m.conv", ws);
  store_params(ar, ps);
  CHECK_THROWS_WITH_AS(load_params(ar, ws), doctest::Contains("m.conv.weight"), DataError);
}

TEST_CASE("Adam moments survive a save/load and continue identically") {
  auto make = [] {
    Rng rng(4);
    LinearLayer<float> lin(3, 2, rng);
    ParamList<float> ps;
    lin.collect("lin", ps);
    return std::pair{lin, ps};
  };
  auto run_step = [](ParamList<float>& ps, Adam& opt) {
    opt.zero_grad();
    const Var<float> x(crtest::random_tensor_f({2, 3, 1, 1}, 9));
    Var<float> y = ops::linear(x, ps[0].var, ps[1].var);
    backward(ops::mean_sq_diff(y, Var<float>(Tensor<float>(y.shape(), 0.5f))));
    opt.step();
  };
  auto [la, pa] = make();
  Adam oa(pa, {});
  run_step(pa, oa);
  WeightArchive ar;
  store_params(ar, pa);
  oa.save(ar, "adam");
  run_step(pa, oa);

  auto [lb, pb] = make();
  load_params(ar, pb);
  Adam ob(pb, {});
  ob.load(ar, "adam");
  CHECK(ob.steps() == 1);
  run_step(pb, ob);
  CHECK(parameter_hash(pa) == parameter_hash(pb));
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("config");

TEST_CASE("defaults follow the documented values") {
  const TrainingConfig c;
  CHECK(c.crop == 256);
  CHECK(c.weights.style == 20);
  CHECK(c.weights.content == 1);
  CHECK(c.weights.recon == 0.0001);
  CHECK(c.weights.adv == 1);
  CHECK(c.mode == TrainMode::Full);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("parse(serialize()) reproduces every field") {
  TrainingConfig c;
  c.photo_dir = "/data/photos";
  c.cartoon_dir = "/data/cartoons";
  c.crop = 64;
  c.batch_size = 3;
  c.max_steps = 17;
  c.lr_g = 1.0 / 3.0;
  c.seed = 0xfffffffffffffff1ull;
  c.weights.recon = 0.1 + 0.2;
  c.mode = TrainMode::Reconstruction;
  c.device = "cpu:scalar";
  const std::string text = c.serialize();
  const TrainingConfig d = TrainingConfig::parse(text);
  CHECK(d.serialize() == text);
  CHECK(d.lr_g == c.lr_g);
  CHECK(d.weights.recon == c.weights.recon);
  CHECK(d.seed == c.seed);
  CHECK(d.mode == TrainMode::Reconstruction);
}

TEST_CASE("comments, blanks and whitespace are tolerated") {
  const TrainingConfig c = TrainingConfig::parse("# run\n\n  crop =  64 \nmode=reconstruction\n");
  CHECK(c.crop == 64);
  CHECK(c.mode == TrainMode::Reconstruction);
}

TEST_CASE("errors carry the line number") {
  CHECK_THROWS_WITH_AS(TrainingConfig::parse("crop = 64\nbogus = 1\n", "x.cfg"), doctest::Contains("x.cfg:2"), DataError);
  CHECK_THROWS_WITH_AS(TrainingConfig::parse("crop 64\n", "x.cfg"), doctest::Contains("x.cfg:1"), DataError);
  CHECK_THROWS_WITH_AS(TrainingConfig::parse("epochs = ten\n", "x.cfg"), doctest::Contains("not an integer"), DataError);
  CHECK_THROWS_WITH_AS(TrainingConfig::parse("mode = both\n", "x.cfg"), doctest::Contains("mode"), DataError);
}

TEST_CASE("validate rejects bad values") {
  TrainingConfig c;
  c.crop = 60;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.weights.style = -1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.beta1 = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("environment overrides") {
  TrainingConfig c;
  c.photo_dir = "a";
  ::setenv("CR_PHOTO_DIR", "/env/photos", 1);
  ::setenv("CR_DEVICE", "cpu:scalar", 1);
  c.apply_env_overrides();
  ::unsetenv("CR_PHOTO_DIR");
  ::unsetenv("CR_DEVICE");
  CHECK(c.photo_dir == "/env/photos");
  CHECK(c.device == "cpu:scalar");
  CHECK(c.cartoon_dir.empty());
}

TEST_CASE("device strings select kernels") {
  const simd::Isa before = simd::active_isa();
  apply_device("cpu:scalar");
  CHECK(simd::active_isa() == simd::Isa::Scalar);
  apply_device("cpu");
  CHECK(simd::active_isa() == simd::default_isa());
  CHECK_THROWS_AS(apply_device("cuda:0"), std::invalid_argument);
  CHECK_THROWS_AS(apply_device("cpu:neon"), std::invalid_argument);
  simd::set_active_isa(before);
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("image_io");

TEST_CASE("byte mapping is affine with round-half-to-even") {
  CHECK(to_byte(-1.f) == 0);
  CHECK(to_byte(1.f) == 255);
  CHECK(to_byte(-2.f) == 0);
  CHECK(to_byte(3.f) == 255);
  // (v + 1) * 127.5 is exact in double for float v, so the only tie is v = 0.
  CHECK(to_byte(0.f) == 128);
  for (int b = 0; b < 256; ++b) {
    const float v = static_cast<float>(b / 127.5 - 1.0);
    CHECK(to_byte(v) == b);
    CHECK(to_byte(std::nextafter(v, 2.f)) == b);
    CHECK(to_byte(std::nextafter(v, -2.f)) == b);
  }
}

TEST_CASE("PNG round trip is exact on the 8-bit lattice") {
  TempDir dir("png");
  Tensor<float> img(1, 3, 5, 7);
  for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = static_cast<float>((i * 37 % 256) / 127.5 - 1.0);
  save_png(dir.str("a.png"), img);
  const Tensor<float> back = load_image(dir.str("a.png"));
  REQUIRE(back.shape() == img.shape());
  for (std::int64_t i = 0; i < img.numel(); ++i) CHECK(to_byte(back[i]) == to_byte(img[i]));
  const ImageInfo info = probe_image(dir.str("a.png"));
  CHECK(info.width == 7);
  CHECK(info.height == 5);
}

TEST_CASE("JPEG decode matches Pillow") {
  const std::string fx = std::string(CARTOON_FIXTURE_DIR);
  const auto doc = nlohmann::json::parse(std::ifstream(fx + "/image_reference.json"))["jpeg"];
  const Tensor<float> img = load_image(fx + "/sample.jpg");
  REQUIRE(img.h() == doc["height"].get<int>());
  REQUIRE(img.w() == doc["width"].get<int>());
  int worst = 0;
  for (std::int64_t y = 0; y < img.h(); ++y)
    for (std::int64_t x = 0; x < img.w(); ++x)
      for (int c = 0; c < 3; ++c) {
        const int want = doc["rgb"][static_cast<std::size_t>((y * img.w() + x) * 3 + c)].get<int>();
        worst = std::max(worst, std::abs(to_byte(img.at(0, c, y, x)) - want));
      }
  CHECK(worst <= 1);
}

TEST_CASE("unreadable files raise DataError") {
  TempDir dir("bad");
  CHECK_THROWS_AS(load_image(dir.str("none.png")), DataError);
  std::ofstream(dir.str("junk.png")) << "definitely not an image";
  CHECK_THROWS_WITH_AS(load_image(dir.str("junk.png")), doctest::Contains("not a PNG or JPEG"), DataError);
  auto png = std::vector<unsigned char>{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n', 0, 0, 0};
  write_bytes(dir.str("trunc.png"), png);
  CHECK_THROWS_AS(load_image(dir.str("trunc.png")), DataError);
}

TEST_CASE("resize matches Pillow's bilinear filter") {
  const auto doc = nlohmann::json::parse(std::ifstream(std::string(CARTOON_FIXTURE_DIR) + "/image_reference.json"));
  const std::int64_t h = doc["input"]["height"], w = doc["input"]["width"];
  Tensor<float> src(1, 3, h, w);
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        src.at(0, c, y, x) = static_cast<float>(std::sin(0.7 * y) + 0.5 * std::cos(1.3 * x) + 0.01 * y * x);
  for (const auto& cs : doc["resize"]) {
    const std::int64_t th = cs["height"], tw = cs["width"];
    CAPTURE(th);
    CAPTURE(tw);
    const Tensor<float> out = resize(src, th, tw);
    double worst = 0;
    for (std::int64_t y = 0; y < th; ++y)
      for (std::int64_t x = 0; x < tw; ++x)
        worst = std::max(worst, std::fabs(out.at(0, 1, y, x) - cs["values"][static_cast<std::size_t>(y * tw + x)].get<double>()));
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("resize properties") {
  const Tensor<float> flat(1, 3, 9, 14, 0.3f);
  const Tensor<float> r = resize(flat, 31, 5);
  for (std::int64_t i = 0; i < r.numel(); ++i) CHECK(r[i] == doctest::Approx(0.3).epsilon(1e-6));
  const Tensor<float> img = crtest::random_tensor_f({1, 3, 6, 6}, 3);
  const Tensor<float> same = resize(img, 6, 6);
  for (std::int64_t i = 0; i < img.numel(); ++i) CHECK(same[i] == img[i]);
  const Tensor<float> m = resize_min_side(crtest::random_tensor_f({1, 3, 100, 150}, 4), 256);
  CHECK(m.h() == 256);
  CHECK(m.w() == 384);
  CHECK_THROWS_AS(resize(img, 0, 3), ShapeError);
}

TEST_CASE("pad_to_multiple reflects bottom/right") {
  Tensor<float> img(1, 3, 6, 5);
  for (std::int64_t y = 0; y < 6; ++y)
    for (std::int64_t x = 0; x < 5; ++x)
      for (int c = 0; c < 3; ++c) img.at(0, c, y, x) = static_cast<float>(10 * y + x + 100 * c);
  const Tensor<float> p = pad_to_multiple(img, 8);
  REQUIRE(p.h() == 8);
  REQUIRE(p.w() == 8);
  for (std::int64_t y = 0; y < 6; ++y)
    for (std::int64_t x = 0; x < 5; ++x) CHECK(p.at(0, 2, y, x) == img.at(0, 2, y, x));
  CHECK(p.at(0, 0, 6, 0) == img.at(0, 0, 4, 0));
  CHECK(p.at(0, 0, 7, 0) == img.at(0, 0, 3, 0));
  CHECK(p.at(0, 0, 0, 5) == img.at(0, 0, 0, 3));
  CHECK(p.at(0, 0, 0, 7) == img.at(0, 0, 0, 1));
  const Tensor<float> q = pad_to_multiple(p, 8);
  CHECK(q.shape() == p.shape());
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("dataset");

TEST_CASE("scan skips undersized and undecodable files with warnings") {
  TempDir dir("scan");
  crtest::write_corpus(dir.path(), "ok", 3, 40, 48, 1, crtest::synth_photo);
  crtest::write_corpus(dir.path(), "small", 2, 16, 64, 2, crtest::synth_photo);
  std::ofstream(dir.str("broken.png")) << "xx";
  std::ofstream(dir.str("notes.txt")) << "ignored";
  const ImageSet s = scan_image_dir(dir.str(), 32, "photo");
  CHECK(s.paths.size() == 3);
  CHECK(s.skipped == 3);
  CHECK(s.warnings.size() == 3);
  CHECK(std::is_sorted(s.paths.begin(), s.paths.end()));
}

TEST_CASE("missing or unusable directories raise DataError") {
  TempDir dir("empty");
  CHECK_THROWS_WITH_AS(scan_image_dir(dir.str("nope"), 8, "photo"), doctest::Contains("does not exist"), DataError);
  CHECK_THROWS_WITH_AS(scan_image_dir(dir.str(), 8, "cartoon"), doctest::Contains("no usable images"), DataError);
}

TEST_CASE("crop sampler is a pure function of its seed") {
  TempDir dir("sampler");
  crtest::write_corpus(dir.path(), "img", 4, 40, 56, 3, crtest::synth_photo);
  const ImageSet set = scan_image_dir(dir.str(), 32, "photo");
  CropSampler a(set, 32, 7), b(set, 32, 7), c(set, 32, 8);
  const Tensor<float> ta = a.next(3), tb = b.next(3), tc = c.next(3);
  CHECK(ta.shape() == Shape{3, 3, 32, 32});
  bool same = true, differ = false;
  for (std::int64_t i = 0; i < ta.numel(); ++i) {
    same = same && ta[i] == tb[i];
    differ = differ || ta[i] != tc[i];
  }
  CHECK(same);
  CHECK(differ);

  const std::string state = a.rng_state();
  const Tensor<float> next1 = a.next(2);
  b.set_rng_state(state);
  const Tensor<float> next2 = b.next(2);
  for (std::int64_t i = 0; i < next1.numel(); ++i) REQUIRE(next1[i] == next2[i]);
  CHECK_THROWS_AS(b.set_rng_state("garbage"), DataError);
}

TEST_CASE("crops are windows of the source images") {
  TempDir dir("window");
  crtest::write_corpus(dir.path(), "img", 1, 40, 48, 5, crtest::synth_photo);
  const ImageSet set = scan_image_dir(dir.str(), 32, "photo");
  const Tensor<float> full = load_image(set.paths[0]);
  CropSampler s(set, 32, 1);
  for (int k = 0; k < 5; ++k) {
    const Tensor<float> c = s.next(1);
    bool found = false;
    for (std::int64_t y0 = 0; y0 + 32 <= full.h() && !found; ++y0)
      for (std::int64_t x0 = 0; x0 + 32 <= full.w() && !found; ++x0) {
        bool eq = true;
        for (int ch = 0; ch < 3 && eq; ++ch)
          for (std::int64_t y = 0; y < 32 && eq; ++y)
            for (std::int64_t x = 0; x < 32 && eq; ++x) eq = c.at(0, ch, y, x) == full.at(0, ch, y0 + y, x0 + x);
        found = eq;
      }
    CHECK(found);
  }
}

TEST_CASE("photo and cartoon streams are independent of each other's corpus") {
  TempDir dir("streams");
  crtest::write_corpus(dir.path() / "p", "p", 3, 40, 40, 1, crtest::synth_photo);
  crtest::write_corpus(dir.path() / "c1", "c", 2, 40, 40, 9, crtest::synth_cartoon);
  crtest::write_corpus(dir.path() / "c2", "c", 5, 40, 40, 9, crtest::synth_cartoon);
  TrainingConfig cfg;
  cfg.crop = 32;
  cfg.seed = 3;
  cfg.photo_dir = dir.str("p");
  cfg.cartoon_dir = dir.str("c1");
  Datasets d1 = load_datasets(cfg);
  cfg.cartoon_dir = dir.str("c2");
  Datasets d2 = load_datasets(cfg);
  const Tensor<float> a = d1.photos.next(2), b = d2.photos.next(2);
  for (std::int64_t i = 0; i < a.numel(); ++i) REQUIRE(a[i] == b[i]);
}

TEST_SUITE_END();
