#pragma once

// Rendering network: decodes a feature model back to an RGB image.
//
// Blocks 1-3 each have an upsampling path (x2 nearest -> reflection-padded
// 3x3 conv -> ReLU) and a concatenation path (reflection-padded 3x3 conv on
// the skip map -> ReLU); the two are concatenated along channels and passed
// through one more ReLU. Block 1 upsamples t31 with skip t18, block 2 uses
// t11, block 3 uses t4. t31 sits at 1/8 scale, so those three x2 steps
// already reach full resolution; block 4 keeps the same path structure
// with resampling factor 1 and no skip. A 3x3 conv to RGB and tanh follow.
//
// Block output widths are 256, 128, 64, 64 (each concatenation splits its
// width evenly between the two paths).

#include <array>
#include <string>

#include "cartoon/features.hpp"
#include "cartoon/layers.hpp"

namespace cr {

template <typename T>
class RenderBlock {
 public:
  RenderBlock() = default;
  /// skip_channels == 0 builds a pure upsampling block.
  RenderBlock(std::int64_t in_channels, std::int64_t skip_channels, std::int64_t out_channels, int factor, Rng& rng);

  /// `skip` is ignored (and may be undefined) for a pure block.
  Var<T> forward(const Var<T>& upstream, const Var<T>& skip) const;

  bool has_skip() const { return has_skip_; }
  int factor() const { return factor_; }
  std::int64_t out_channels() const { return out_channels_; }
  void collect(const std::string& prefix, ParamList<T>& out) const;

 private:
  bool has_skip_ = false;
  int factor_ = 2;
  std::int64_t out_channels_ = 0;
  Conv2dLayer<T> up_conv_;
  Conv2dLayer<T> skip_conv_;
};

template <typename T>
class RenderingNetwork {
 public:
  RenderingNetwork() = default;
  explicit RenderingNetwork(Rng& rng);

  /// Output (N,3,H,W) in [-1,1] where H x W is the extent of the scale-4 map.
  Var<T> render(const FeatureModel<T>& model) const;

  const std::array<RenderBlock<T>, 4>& blocks() const { return blocks_; }
  ParamList<T> parameters() const;

 private:
  std::array<RenderBlock<T>, 4> blocks_;
  Conv2dLayer<T> head_;
};

template <typename T>
Var<T> render(const FeatureModel<T>& model, const RenderingNetwork<T>& net) {
  return net.render(model);
}

}  // namespace cr
