#include "cartoon/optim.hpp"

#include <cmath>

namespace cr {

Adam::Adam(ParamList<float> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.var.shape());
    v_.emplace_back(p.var.shape());
  }
}

void Adam::step() {
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const auto step_size = static_cast<float>(cfg_.lr / c1);
  const auto inv_c2 = static_cast<float>(1.0 / c2);
  const auto eps = static_cast<float>(cfg_.eps);
  const auto fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var<float> v = params_[i].var;
    const Tensor<float>& g = v.grad();
    if (g.empty()) continue;
    Tensor<float>& w = v.mutable_value();
    float* m = m_[i].data();
    float* s = v_[i].data();
    for (std::int64_t k = 0; k < w.numel(); ++k) {
      m[k] = fb1 * m[k] + (1.f - fb1) * g[k];
      s[k] = fb2 * s[k] + (1.f - fb2) * g[k] * g[k];
      w[k] -= step_size * m[k] / (std::sqrt(s[k] * inv_c2) + eps);
    }
  }
}

void Adam::save(WeightArchive& ar, const std::string& prefix) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ar.put(prefix + ".m." + params_[i].name, m_[i]);
    ar.put(prefix + ".v." + params_[i].name, v_[i]);
  }
  ar.meta[prefix + ".t"] = std::to_string(t_);
}

void Adam::load(const WeightArchive& ar, const std::string& prefix) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor<float> m = ar.get_f32(prefix + ".m." + params_[i].name);
    Tensor<float> v = ar.get_f32(prefix + ".v." + params_[i].name);
    if (m.shape() != m_[i].shape() || v.shape() != v_[i].shape()) {
      throw DataError("optimizer state for '" + params_[i].name + "' has the wrong shape");
    }
    m_[i] = std::move(m);
    v_[i] = std::move(v);
  }
  t_ = std::stoll(ar.meta_at(prefix + ".t"));
}

}  // namespace cr
