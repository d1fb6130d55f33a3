#include <cmath>
#include <fstream>

#include "cartoon/features.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/gradcheck.hpp"

using namespace cr;
using crtest::random_tensor;

TEST_SUITE_BEGIN("features");

namespace {

Var<double> two_by_two() {
  Tensor<double> t(1, 1, 2, 2);
  t[0] = 1;
  t[1] = 3;
  t[2] = 5;
  t[3] = 7;
  return Var<double>(t);
}

}  // namespace

TEST_CASE("channel_stats worked example") {
  const auto st = channel_stats(two_by_two());
  // population variance of {1,3,5,7}: ((9+1+1+9)/4) = 5
  CHECK(st.mu.value()[0] == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(st.sigma.value()[0] == doctest::Approx(std::sqrt(5.0 + 1e-5)).epsilon(1e-12));
  CHECK(st.sigma.value()[0] == doctest::Approx(2.2360703).epsilon(1e-7));
}

TEST_CASE("channel_stats of a constant map is eps-floored") {
  const auto st = channel_stats(Var<double>(Tensor<double>(2, 3, 4, 5, 7.5)));
  for (int i = 0; i < 6; ++i) {
    CHECK(st.mu.value()[i] == doctest::Approx(7.5));
    CHECK(st.sigma.value()[i] == doctest::Approx(std::sqrt(1e-5)));
    CHECK(st.sigma.value()[i] > 0);
  }
  const auto z = normalize(Var<double>(Tensor<double>(1, 2, 3, 3, -2.0))).value();
  for (std::int64_t i = 0; i < z.numel(); ++i) CHECK(z[i] == 0.0);
}

TEST_CASE("normalize worked example") {
  const auto n = normalize(two_by_two()).value();
  const double want[] = {-1.3416, -0.4472, 0.4472, 1.3416};
  for (int i = 0; i < 4; ++i) CHECK(std::abs(n[i] - want[i]) < 1e-3);
}

TEST_CASE("statistics are per batch item and per channel") {
  Tensor<double> t(2, 2, 1, 2);
  const double v[] = {0, 2, 10, 10, -4, 4, 1, 3};
  for (int i = 0; i < 8; ++i) t[i] = v[i];
  const auto st = channel_stats(Var<double>(t));
  CHECK(st.mu.shape() == Shape{2, 2, 1, 1});
  CHECK(st.mu.value()[0] == 1);
  CHECK(st.mu.value()[1] == 10);
  CHECK(st.mu.value()[2] == 0);
  CHECK(st.mu.value()[3] == 2);
  CHECK(st.sigma.value()[2] == doctest::Approx(std::sqrt(16 + 1e-5)));
}

TEST_CASE("normalize is idempotent and yields zero mean unit std") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Var<double> x(random_tensor({2, 3, 5, 7}, seed, -3, 5));
    const auto n1 = normalize(x);
    const auto n2 = normalize(n1);
    for (std::int64_t i = 0; i < n1.value().numel(); ++i) CHECK(std::abs(n1.value()[i] - n2.value()[i]) < 1e-4);
    const auto st = channel_stats(n1);
    for (std::int64_t i = 0; i < 6; ++i) {
      CHECK(std::abs(st.mu.value()[i]) < 1e-4);
      CHECK(std::abs(st.sigma.value()[i] - 1) < 1e-4);
    }
  }
}

TEST_CASE("float statistics match double statistics") {
  const auto xd = random_tensor({1, 4, 33, 17}, 3, 100, 101);  // large offset
  const auto sd = channel_stats(Var<double>(xd));
  const auto sf = channel_stats(Var<float>(xd.cast<float>()));
  for (int c = 0; c < 4; ++c) {
    CHECK(sf.mu.value()[c] == doctest::Approx(sd.mu.value()[c]).epsilon(1e-6));
    CHECK(sf.sigma.value()[c] == doctest::Approx(sd.sigma.value()[c]).epsilon(1e-4));
  }
}

TEST_CASE("tap table") {
  CHECK(kScales[0].id == 4);
  CHECK(kScales[1].id == 11);
  CHECK(kScales[2].id == 18);
  CHECK(kScales[3].id == 31);
  CHECK(scale_index(18) == 2);
  CHECK_THROWS_AS(scale_index(5), ShapeError);
}

TEST_CASE("feature model shapes follow the ladder") {
  const auto net = ModelingNetwork<float>::seeded(1);
  const std::int64_t sizes[][2] = {{64, 64}, {96, 128}, {8, 16}};
  for (const auto& hw : sizes) {
    const Var<float> img(crtest::random_tensor_f({1, 3, hw[0], hw[1]}, 2));
    const auto m = extract_feature_model(img, net);
    m.require_ladder("test");
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(m.maps[i].scale_id == kScales[i].id);
      CHECK(m.maps[i].shape() == Shape{1, kScales[i].channels, hw[0] / kScales[i].stride, hw[1] / kScales[i].stride});
    }
  }
}

TEST_CASE("256x256 feature shapes") {
  const auto net = ModelingNetwork<float>::seeded(1);
  NoGradGuard ng;
  const auto m = extract_feature_model(Var<float>(Tensor<float>(1, 3, 256, 256, 0.1f)), net);
  CHECK(m.at(4).shape() == Shape{1, 64, 256, 256});
  CHECK(m.at(11).shape() == Shape{1, 128, 128, 128});
  CHECK(m.at(18).shape() == Shape{1, 256, 64, 64});
  CHECK(m.at(31).shape() == Shape{1, 512, 32, 32});
}

TEST_CASE("dimension errors name the offending dimension") {
  const auto net = ModelingNetwork<double>::seeded(0);
  try {
    extract_feature_model(Var<double>(Tensor<double>(1, 3, 20, 16)), net);
    FAIL("expected a sizing error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("height 20") != std::string::npos);
  }
  try {
    extract_feature_model(Var<double>(Tensor<double>(1, 3, 16, 12)), net);
    FAIL("expected a sizing error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("width 12") != std::string::npos);
  }
}

TEST_CASE("extraction is deterministic and the network is frozen") {
  const auto net = ModelingNetwork<float>::seeded(3);
  const auto h0 = net.parameter_hash();
  const Var<float> img(crtest::random_tensor_f({1, 3, 16, 16}, 4), true);
  const auto a = extract_feature_model(img, net);
  const auto b = extract_feature_model(img, net);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::int64_t j = 0; j < a.maps[i].data.value().numel(); ++j)
      REQUIRE(a.maps[i].data.value()[j] == b.maps[i].data.value()[j]);
  // Gradients reach the image, not the weights.
  backward(ops::mean_sq_diff(a.at(31).data, Var<float>(Tensor<float>(a.at(31).shape()))));
  CHECK(img.grad().numel() > 0);
  for (const auto& p : net.parameters()) CHECK(p.var.grad().numel() == 0);
  CHECK(net.parameter_hash() == h0);
  CHECK(net.parameters().size() == 18);
  CHECK(net.parameters().front().name == "modeling.conv1_1.weight");
}

TEST_CASE("matches torchvision VGG-19 with closed-form weights") {
  std::ifstream in(std::string(CARTOON_FIXTURE_DIR) + "/vgg_reference.json");
  REQUIRE(in.good());
  const auto ref = nlohmann::json::parse(in);

  auto net = ModelingNetwork<double>::seeded(0);
  for (std::size_t l = 0; l < 9; ++l) {
    auto& conv = net.layers()[l];
    Tensor<double>& w = conv.weight().mutable_value();
    const Shape s = w.shape();
    const double scale = std::sqrt(2.0 / static_cast<double>(s.c * s.h * s.w));
    for (std::int64_t o = 0; o < s.n; ++o)
      for (std::int64_t c = 0; c < s.c; ++c)
        for (std::int64_t u = 0; u < s.h; ++u)
          for (std::int64_t v = 0; v < s.w; ++v)
            w.at(o, c, u, v) = std::sin(0.131 * o + 0.377 * c + 0.911 * u + 1.733 * v + 0.5 * l) * scale;
    Tensor<double>& b = conv.bias().mutable_value();
    for (std::int64_t o = 0; o < s.n; ++o) b[o] = 0.05 * std::cos(0.7 * o + l);
  }
  const auto dims = ref["input"];
  Tensor<double> img(dims[0], dims[1], dims[2], dims[3]);
  for (std::int64_t c = 0; c < 3; ++c)
    for (std::int64_t h = 0; h < img.shape().h; ++h)
      for (std::int64_t w = 0; w < img.shape().w; ++w) img.at(0, c, h, w) = 0.9 * std::sin(0.3 * h + 0.7 * w + 1.1 * c);

  const auto model = extract_feature_model(Var<double>(img), net);
  REQUIRE(ref["taps"].size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& tap = ref["taps"][i];
    const Tensor<double>& f = model.maps[i].data.value();
    INFO(tap["activation"].get<std::string>());
    CHECK(tap["activation"].get<std::string>() == kScales[i].activation);
    const auto shape = tap["shape"];
    CHECK(f.shape() == Shape{shape[0], shape[1], shape[2], shape[3]});
    double sum = 0, sq = 0;
    for (std::int64_t j = 0; j < f.numel(); ++j) {
      sum += f[j];
      sq += f[j] * f[j];
    }
    CHECK(sum == doctest::Approx(tap["sum"].get<double>()).epsilon(1e-9));
    CHECK(sq == doctest::Approx(tap["sum_sq"].get<double>()).epsilon(1e-9));
    for (const auto& smp : tap["samples"]) {
      CHECK(std::abs(f[smp[0].get<std::int64_t>()] - smp[1].get<double>()) < 1e-9);
    }
  }
}

TEST_SUITE_END();
