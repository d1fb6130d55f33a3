#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cartoon/ops.hpp"

namespace cr {

using Rng = std::mt19937_64;

template <typename T>
struct NamedParam {
  std::string name;
  Var<T> var;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

/// He-normal fill: std = gain / sqrt(fan_in).
template <typename T>
Tensor<T> he_normal(Shape shape, std::int64_t fan_in, Rng& rng, double gain = std::sqrt(2.0)) {
  Tensor<T> t(shape);
  std::normal_distribution<double> dist(0.0, gain / std::sqrt(static_cast<double>(fan_in)));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(std::int64_t in_ch, std::int64_t out_ch, int kernel, ops::ConvSpec spec, Rng& rng,
              double gain = std::sqrt(2.0), bool trainable = true)
      : spec_(spec),
        weight_(he_normal<T>(Shape{out_ch, in_ch, kernel, kernel}, in_ch * kernel * kernel, rng, gain), trainable),
        bias_(Tensor<T>(1, out_ch, 1, 1), trainable) {}

  Var<T> operator()(const Var<T>& x) const { return ops::conv2d(x, weight_, bias_, spec_); }

  void collect(const std::string& prefix, ParamList<T>& out) const {
    out.push_back({prefix + ".weight", weight_});
    out.push_back({prefix + ".bias", bias_});
  }

  const ops::ConvSpec& spec() const { return spec_; }
  Var<T>& weight() { return weight_; }
  Var<T>& bias() { return bias_; }
  std::int64_t in_channels() const { return weight_.shape().c; }
  std::int64_t out_channels() const { return weight_.shape().n; }
  int kernel() const { return static_cast<int>(weight_.shape().h); }

 private:
  ops::ConvSpec spec_{};
  Var<T> weight_;
  Var<T> bias_;
};

template <typename T>
class LinearLayer {
 public:
  LinearLayer() = default;
  LinearLayer(std::int64_t in_f, std::int64_t out_f, Rng& rng, double gain = std::sqrt(2.0))
      : weight_(he_normal<T>(Shape{out_f, in_f, 1, 1}, in_f, rng, gain), true), bias_(Tensor<T>(1, out_f, 1, 1), true) {}

  Var<T> operator()(const Var<T>& x) const { return ops::linear(x, weight_, bias_); }

  void collect(const std::string& prefix, ParamList<T>& out) const {
    out.push_back({prefix + ".weight", weight_});
    out.push_back({prefix + ".bias", bias_});
  }

  Var<T>& weight() { return weight_; }
  Var<T>& bias() { return bias_; }

 private:
  Var<T> weight_;
  Var<T> bias_;
};

/// Total element count of a parameter list.
template <typename T>
std::int64_t parameter_count(const ParamList<T>& params) {
  std::int64_t n = 0;
  for (const auto& p : params) n += p.var.value().numel();
  return n;
}

/// FNV-1a over names and raw parameter bytes; changes iff any value changes.
template <typename T>
std::uint64_t parameter_hash(const ParamList<T>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const unsigned char* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : params) {
    mix(reinterpret_cast<const unsigned char*>(p.name.data()), p.name.size());
    mix(reinterpret_cast<const unsigned char*>(p.var.value().data()),
        static_cast<std::size_t>(p.var.value().numel()) * sizeof(T));
  }
  return h;
}

template <typename T>
void zero_grads(const ParamList<T>& params) {
  for (auto p : params) p.var.zero_grad();
}

template <typename T>
void set_trainable(const ParamList<T>& params, bool on) {
  for (auto p : params) p.var.set_requires_grad(on);
}

}  // namespace cr
