#include "cartoon/selfcheck.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "cartoon/losses.hpp"
#include "cartoon/model.hpp"

namespace cr {

namespace {

Tensor<double> uniform(Shape s, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor<double> t(s);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = d(rng);
  return t;
}

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

CheckResult check_reductions() {
  Rng rng(11);
  GateNetwork<double> gate(8, rng);
  const Var<double> xp(uniform({1, 8, 12, 12}, rng, -1, 2));
  const Var<double> xc(uniform({1, 8, 20, 16}, rng, -3, 1));
  NoGradGuard ng;
  gate.force(1.0);
  const double e1 = max_abs_diff(soft_adain(xp, xc, gate).value(), adain(xp, xc).value());
  gate.force(0.0);
  const double e0 = max_abs_diff(soft_adain(xp, xc, gate).value(), xp.value());
  return {"soft-adain reductions", e1 <= 1e-5 && e0 <= 1e-4, fmt("omega=1 err %.3g", e1) + fmt(", omega=0 err %.3g", e0)};
}

CheckResult check_stats_contract() {
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::uniform_int_distribution<int> ext(2, 10);
    GateNetwork<double> gate(4, rng);
    const Var<double> xp(uniform({1, 4, ext(rng), ext(rng)}, rng, -2, 2));
    const Var<double> xc(uniform({1, 4, ext(rng), ext(rng)}, rng, -1, 3));
    NoGradGuard ng;
    const SoftAdainResult<double> r = soft_adain_detailed(xp, xc, gate);
    const ChannelStats<double> out = channel_stats(r.output);
    worst = std::max({worst, max_abs_diff(out.mu.value(), r.blended.mu_prime.value()),
                      max_abs_diff(out.sigma.value(), r.blended.sigma_prime.value())});
  }
  return {"statistics contract", worst <= 1e-4, fmt("max err %.3g over 20 cases", worst)};
}

CheckResult check_gradient() {
  Rng rng(5);
  GateNetwork<double> gate(4, rng);
  Var<double> xp(uniform({1, 4, 6, 6}, rng, -1, 1), true);
  const Var<double> xc(uniform({1, 4, 8, 8}, rng, -1, 1));
  const Var<double> target(uniform({1, 4, 6, 6}, rng, -1, 1));
  auto loss = [&] { return ops::mean_sq_diff(soft_adain(xp, xc, gate), target); };
  backward(loss());
  const Tensor<double> g = xp.grad();
  NoGradGuard ng;
  double d2 = 0, n2 = 0;
  const double h = 1e-6;
  Tensor<double>& x = xp.mutable_value();
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = loss().value()[0];
    x[i] = keep - h;
    const double dn = loss().value()[0];
    x[i] = keep;
    const double num = (up - dn) / (2 * h);
    d2 += (num - g[i]) * (num - g[i]);
    n2 += num * num;
  }
  const double rel = std::sqrt(d2) / std::max(std::sqrt(n2), 1e-12);
  return {"soft-adain gradient", rel < 1e-3, fmt("relative error %.3g", rel)};
}

CheckResult check_loss_arithmetic() {
  LossReport r;
  r.content = r.style = r.reconstruction = r.adversarial_g = 1.0;
  const double total = total_generator_loss(r, LossWeights{});
  return {"weighted total", total == 20.0 + 1.0 + 0.0001 + 1.0, fmt("total %.17g", total)};
}

CheckResult check_ladder() {
  const CartoonModel model = CartoonModel::create(1, "", 1);
  NoGradGuard ng;
  std::string detail;
  bool ok = true;
  for (auto [h, w] : {std::pair<std::int64_t, std::int64_t>{64, 64}, {96, 128}}) {
    const Var<float> img(Tensor<float>(1, 3, h, w, 0.25f));
    const FeatureModel<float> f = model.modeling.extract(img);
    f.require_ladder("check");
    for (std::size_t s = 0; s < 4; ++s) {
      const Shape& sh = f.maps[s].shape();
      ok = ok && sh.c == kScales[s].channels && sh.h == h / kScales[s].stride && sh.w == w / kScales[s].stride;
    }
    const Var<float> y = model.renderer.render(coordinate(f, f, model.coordinator));
    ok = ok && y.shape() == Shape{1, 3, h, w};
    detail += (detail.empty() ? "" : ", ") + std::to_string(h) + "x" + std::to_string(w) + " -> " + y.shape().str();
  }
  return {"shape ladder", ok, detail};
}

}  // namespace

std::vector<CheckResult> run_property_checks() {
  std::vector<CheckResult> out;
  for (auto* fn : {&check_reductions, &check_stats_contract, &check_gradient, &check_loss_arithmetic, &check_ladder}) {
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      out.push_back({"(exception)", false, e.what()});
    }
  }
  return out;
}

}  // namespace cr
