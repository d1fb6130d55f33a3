#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "cartoon/coordination.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/gradcheck.hpp"

using namespace cr;
using crtest::gradcheck;
using crtest::random_tensor;

TEST_SUITE_BEGIN("coordination");

namespace {

double max_abs(const Tensor<double>& a, const Tensor<double>& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

ChannelStats<double> stats_of(std::initializer_list<double> mu, std::initializer_list<double> sigma) {
  const auto n = static_cast<std::int64_t>(mu.size());
  Tensor<double> m(1, n, 1, 1), s(1, n, 1, 1);
  std::copy(mu.begin(), mu.end(), m.data());
  std::copy(sigma.begin(), sigma.end(), s.data());
  return {Var<double>(m), Var<double>(s)};
}

}  // namespace

TEST_CASE("adain worked example and identity") {
  Tensor<double> c(1, 1, 2, 2);
  c[0] = 1;
  c[1] = 3;
  c[2] = 5;
  c[3] = 7;
  // A style map with mean 0 and population std 1: {-1, 1}.
  Tensor<double> s(1, 1, 1, 2);
  s[0] = -1;
  s[1] = 1;
  const auto y = adain(Var<double>(c), Var<double>(s)).value();
  const double want[] = {-1.3416, -0.4472, 0.4472, 1.3416};
  for (int i = 0; i < 4; ++i) CHECK(std::abs(y[i] - want[i]) < 1e-3);

  const Var<double> x(random_tensor({2, 3, 4, 5}, 1));
  CHECK(max_abs(adain(x, x).value(), x.value()) < 1e-4);
}

TEST_CASE("adain output carries the style statistics") {
  const Var<double> c(random_tensor({2, 4, 6, 5}, 2, -2, 3)), s(random_tensor({2, 4, 3, 9}, 3, 0, 5));
  const auto y = adain(c, s);
  CHECK(y.shape() == c.shape());
  const auto sy = channel_stats(y), ss = channel_stats(s);
  CHECK(max_abs(sy.mu.value(), ss.mu.value()) < 1e-4);
  CHECK(max_abs(sy.sigma.value(), ss.sigma.value()) < 1e-4);
  CHECK_THROWS_AS(adain(c, Var<double>(Tensor<double>(2, 3, 2, 2))), ShapeError);
}

TEST_CASE("gate accepts mismatched spatial sizes and stays in (0,1)") {
  Rng rng(0);
  GateNetwork<float> g(64, rng);
  const Var<float> xp(crtest::random_tensor_f({1, 64, 32, 32}, 1, 0, 4));
  const Var<float> xc(crtest::random_tensor_f({1, 64, 17, 23}, 2, 0, 4));
  const auto w = gate_weights(xp, xc, g).value();
  CHECK(w.shape() == Shape{1, 64, 1, 1});
  for (std::int64_t i = 0; i < w.numel(); ++i) {
    CHECK(w[i] > 0.f);
    CHECK(w[i] < 1.f);
  }
  CHECK_THROWS_AS(gate_weights(xp, Var<float>(Tensor<float>(1, 32, 8, 8)), g), ShapeError);
}

TEST_CASE("gate starts near one half") {
  Rng rng(5);
  GateNetwork<double> g(16, rng);
  const auto w = g.weights(Var<double>(random_tensor({1, 16, 8, 8}, 6, 0, 2)),
                           Var<double>(random_tensor({1, 16, 8, 8}, 7, 0, 2)))
                     .value();
  for (std::int64_t i = 0; i < w.numel(); ++i) CHECK(std::abs(w[i] - 0.5) < 0.2);
}

TEST_CASE("gate golden vector") {
  Rng rng(0);
  GateNetwork<double> g(8, rng);
  const auto w = g.weights(Var<double>(random_tensor({1, 8, 6, 6}, 11)), Var<double>(random_tensor({1, 8, 5, 7}, 12)))
                     .value();
  const std::string path = std::string(CARTOON_FIXTURE_DIR) + "/gate_golden.json";
  if (std::getenv("CARTOON_REGEN_GOLDEN")) {
    nlohmann::json j = std::vector<double>(w.data(), w.data() + w.numel());
    std::ofstream(path) << j.dump(1) << "\n";
  }
  std::ifstream in(path);
  REQUIRE(in.good());
  const auto golden = nlohmann::json::parse(in).get<std::vector<double>>();
  REQUIRE(golden.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(w[static_cast<std::int64_t>(i)] == golden[i]);
}

TEST_CASE("blend_stats endpoints and midpoint") {
  const auto sp = stats_of({0.0}, {2.0}), sc = stats_of({10.0}, {4.0});
  const auto half = blend_stats(sp, sc, Var<double>(Tensor<double>(1, 1, 1, 1, 0.5)));
  CHECK(half.sigma_prime.value()[0] == 3.0);
  CHECK(half.mu_prime.value()[0] == 5.0);
  const auto one = blend_stats(sp, sc, Var<double>(Tensor<double>(1, 1, 1, 1, 1.0)));
  CHECK(one.sigma_prime.value()[0] == 4.0);
  CHECK(one.mu_prime.value()[0] == 10.0);
  const auto zero = blend_stats(sp, sc, Var<double>(Tensor<double>(1, 1, 1, 1, 0.0)));
  CHECK(zero.sigma_prime.value()[0] == 2.0);
  CHECK(zero.mu_prime.value()[0] == 0.0);
  CHECK_THROWS_AS(blend_stats(sp, stats_of({1, 2}, {1, 2}), Var<double>(Tensor<double>(1, 1, 1, 1))), ShapeError);
}

TEST_CASE("blended statistics are convex") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ChannelStats<double> sp{Var<double>(random_tensor({2, 6, 1, 1}, seed)),
                                  Var<double>(random_tensor({2, 6, 1, 1}, seed + 100, 0.1, 3))};
    const ChannelStats<double> sc{Var<double>(random_tensor({2, 6, 1, 1}, seed + 200)),
                                  Var<double>(random_tensor({2, 6, 1, 1}, seed + 300, 0.1, 3))};
    const auto b = blend_stats(sp, sc, Var<double>(random_tensor({2, 6, 1, 1}, seed + 400, 0, 1)));
    for (std::int64_t i = 0; i < 12; ++i) {
      const double s1 = sp.sigma.value()[i], s2 = sc.sigma.value()[i];
      CHECK(b.sigma_prime.value()[i] >= std::min(s1, s2));
      CHECK(b.sigma_prime.value()[i] <= std::max(s1, s2));
      const double m1 = sp.mu.value()[i], m2 = sc.mu.value()[i];
      CHECK(b.mu_prime.value()[i] >= std::min(m1, m2));
      CHECK(b.mu_prime.value()[i] <= std::max(m1, m2));
    }
  }
}

TEST_CASE("soft_adain reductions") {
  Rng rng(1);
  GateNetwork<double> g(4, rng);
  const Var<double> xp(random_tensor({1, 4, 6, 6}, 1, -1, 2)), xc(random_tensor({1, 4, 5, 9}, 2, 0, 3));
  g.force(1.0);
  CHECK(max_abs(soft_adain(xp, xc, g).value(), adain(xp, xc).value()) < 1e-5);
  g.force(0.0);
  CHECK(max_abs(soft_adain(xp, xc, g).value(), xp.value()) < 1e-4);
  g.force(std::nullopt);
  CHECK(max_abs(soft_adain(xp, xp, g).value(), xp.value()) < 1e-4);
}

TEST_CASE("soft_adain output statistics equal the blended statistics") {
  Rng rng(2);
  GateNetwork<double> g(5, rng);
  const Var<double> xp(random_tensor({2, 5, 7, 6}, 3, -2, 2)), xc(random_tensor({2, 5, 4, 4}, 4, -1, 4));
  const auto r = soft_adain_detailed(xp, xc, g);
  const auto so = channel_stats(r.output);
  CHECK(max_abs(so.mu.value(), r.blended.mu_prime.value()) < 1e-4);
  CHECK(max_abs(so.sigma.value(), r.blended.sigma_prime.value()) < 1e-4);
}

TEST_CASE("soft_adain gradients w.r.t. inputs and gate parameters") {
  Rng rng(3);
  GateNetwork<double> g(4, rng);
  ParamList<double> params;
  g.collect("g", params);
  std::vector<Var<double>> inputs = {Var<double>(random_tensor({1, 4, 4, 4}, 5, -1, 2), true),
                                     Var<double>(random_tensor({1, 4, 4, 4}, 6, 0, 3), true)};
  for (auto& p : params) inputs.push_back(p.var);
  const auto r = gradcheck([&](const std::vector<Var<double>>& v) { return soft_adain(v[0], v[1], g); }, inputs);
  INFO("rel=", r.rel_error);
  CHECK(r.rel_error < 1e-3);
  for (const auto& p : params) {
    INFO(p.name);
    CHECK(p.var.grad().numel() > 0);
  }
}

TEST_CASE("coordinator naming, scale checks and shape contract") {
  Rng rng(4);
  Coordinator<double> coord({2, 3, 4, 5}, rng);
  const auto params = coord.parameters();
  CHECK(params.size() == 4 * 12);
  CHECK(params.front().name == "coordinator.block4.theta_p.conv1.weight");
  CHECK(params.back().name == "coordinator.block31.fc2.bias");

  FeatureModel<double> p, c;
  const std::int64_t ch[] = {2, 3, 4, 5};
  for (std::size_t i = 0; i < 4; ++i) {
    const std::int64_t f = kScales[i].stride;
    p.maps[i] = {Var<double>(random_tensor({1, ch[i], 32 / f, 32 / f}, i, -1, 2)), kScales[i].id};
    c.maps[i] = {Var<double>(random_tensor({1, ch[i], 24 / f, 40 / f}, 10 + i, 0, 3)), kScales[i].id};
  }
  const auto y = coordinate(p, c, coord);
  for (std::size_t i = 0; i < 4; ++i) CHECK(y.maps[i].shape() == p.maps[i].shape());

  const auto self = coordinate(p, p, coord);
  for (std::size_t i = 0; i < 4; ++i) CHECK(max_abs(self.maps[i].data.value(), p.maps[i].data.value()) < 1e-4);

  CHECK_THROWS_AS(coord.apply(11, p.at(4), c.at(4)), ShapeError);

  FeatureModel<double> missing = c;
  missing.maps[2] = {};
  try {
    coordinate(p, missing, coord);
    FAIL("expected missing-scale error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("scale 18") != std::string::npos);
  }
}

TEST_SUITE_END();
