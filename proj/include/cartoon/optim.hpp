#pragma once

#include <string>
#include <vector>

#include "cartoon/archive.hpp"

namespace cr {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter list. Parameters whose gradient
/// buffer is empty for a step are left untouched (their moments do not decay).
class Adam {
 public:
  Adam() = default;
  Adam(ParamList<float> params, AdamConfig cfg);

  void step();
  void zero_grad() { zero_grads(params_); }

  long long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  const ParamList<float>& params() const { return params_; }

  /// Moments go under "<prefix>.m.<param>" / "<prefix>.v.<param>", the step
  /// count under metadata "<prefix>.t".
  void save(WeightArchive& ar, const std::string& prefix) const;
  void load(const WeightArchive& ar, const std::string& prefix);

 private:
  ParamList<float> params_;
  AdamConfig cfg_;
  std::vector<Tensor<float>> m_, v_;
  long long t_ = 0;
};

}  // namespace cr
