#include "cartoon/rendering.hpp"

namespace cr {

namespace {
constexpr ops::ConvSpec kReflect3{1, 1, ops::Padding::Reflect};
}

template <typename T>
RenderBlock<T>::RenderBlock(std::int64_t in_channels, std::int64_t skip_channels, std::int64_t out_channels,
                            int factor, Rng& rng)
    : has_skip_(skip_channels > 0), factor_(factor), out_channels_(out_channels) {
  if (has_skip_) {
    if (out_channels % 2 != 0) throw ShapeError("RenderBlock: concatenating block needs an even output width");
    up_conv_ = Conv2dLayer<T>(in_channels, out_channels / 2, 3, kReflect3, rng);
    skip_conv_ = Conv2dLayer<T>(skip_channels, out_channels / 2, 3, kReflect3, rng);
  } else {
    up_conv_ = Conv2dLayer<T>(in_channels, out_channels, 3, kReflect3, rng);
  }
}

template <typename T>
Var<T> RenderBlock<T>::forward(const Var<T>& upstream, const Var<T>& skip) const {
  const Var<T> up = ops::relu(up_conv_(ops::upsample_nearest(upstream, factor_)));
  if (!has_skip_) return up;
  if (skip.shape().h != up.shape().h || skip.shape().w != up.shape().w) {
    throw ShapeError("RenderBlock: skip map " + skip.shape().str() + " does not match upsampled " + up.shape().str());
  }
  const Var<T> side = ops::relu(skip_conv_(skip));
  return ops::relu(ops::concat_channels(up, side));
}

template <typename T>
void RenderBlock<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  up_conv_.collect(prefix + ".up", out);
  if (has_skip_) skip_conv_.collect(prefix + ".skip", out);
}

template <typename T>
RenderingNetwork<T>::RenderingNetwork(Rng& rng)
    : blocks_{RenderBlock<T>(512, 256, 256, 2, rng), RenderBlock<T>(256, 128, 128, 2, rng),
              RenderBlock<T>(128, 64, 64, 2, rng), RenderBlock<T>(64, 0, 64, 1, rng)},
      head_(64, 3, 3, kReflect3, rng, 1.0) {}

template <typename T>
Var<T> RenderingNetwork<T>::render(const FeatureModel<T>& model) const {
  model.require_ladder("render");
  Var<T> x = blocks_[0].forward(model.at(31).data, model.at(18).data);
  x = blocks_[1].forward(x, model.at(11).data);
  x = blocks_[2].forward(x, model.at(4).data);
  x = blocks_[3].forward(x, Var<T>());
  return ops::tanh(head_(x));
}

template <typename T>
ParamList<T> RenderingNetwork<T>::parameters() const {
  ParamList<T> out;
  for (std::size_t i = 0; i < 4; ++i) blocks_[i].collect("renderer.block" + std::to_string(i + 1), out);
  head_.collect("renderer.head", out);
  return out;
}

template class RenderBlock<float>;
template class RenderBlock<double>;
template class RenderingNetwork<float>;
template class RenderingNetwork<double>;

}  // namespace cr
