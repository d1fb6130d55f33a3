#pragma once

#include <array>
#include <vector>

#include "cartoon/layers.hpp"

namespace cr {

/// Multi-scale patch discriminator (MUNIT layout). Each of three scales runs
/// four reflection-padded 4x4 stride-2 convolutions with LeakyReLU(0.2)
/// (widths 64, 128, 256, 512) and a 1x1 conv to one raw logit per patch.
/// Scale k+1 sees the input after a 3x3 stride-2 average pool.
template <typename T>
class MultiScaleDiscriminator {
 public:
  static constexpr int kNumScales = 3;
  static constexpr int kLayersPerScale = 4;
  static constexpr std::int64_t kMinExtent = 64;
  static constexpr double kLeakySlope = 0.2;

  MultiScaleDiscriminator() = default;
  explicit MultiScaleDiscriminator(Rng& rng, std::int64_t base_width = 64);

  /// One logit map per scale, finest first. Input must be at least 64x64.
  std::vector<Var<T>> discriminate(const Var<T>& img) const;

  ParamList<T> parameters() const;

 private:
  struct Scale {
    std::array<Conv2dLayer<T>, kLayersPerScale> convs;
    Conv2dLayer<T> head;
  };
  std::array<Scale, kNumScales> scales_;
};

template <typename T>
std::vector<Var<T>> discriminate(const Var<T>& img, const MultiScaleDiscriminator<T>& d) {
  return d.discriminate(img);
}

}  // namespace cr
