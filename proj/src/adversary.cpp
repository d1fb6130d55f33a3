#include "cartoon/adversary.hpp"

#include <string>

namespace cr {

template <typename T>
MultiScaleDiscriminator<T>::MultiScaleDiscriminator(Rng& rng, std::int64_t base_width) {
  const ops::ConvSpec down{2, 1, ops::Padding::Reflect};
  for (auto& s : scales_) {
    std::int64_t in = 3, width = base_width;
    for (auto& conv : s.convs) {
      conv = Conv2dLayer<T>(in, width, 4, down, rng);
      in = width;
      width *= 2;
    }
    s.head = Conv2dLayer<T>(in, 1, 1, ops::ConvSpec{}, rng, 1.0);
  }
}

template <typename T>
std::vector<Var<T>> MultiScaleDiscriminator<T>::discriminate(const Var<T>& img) const {
  const Shape& s = img.shape();
  if (s.c != 3 || s.h < kMinExtent || s.w < kMinExtent) {
    throw ShapeError("discriminate: input " + s.str() + " below the 64x64 minimum");
  }
  std::vector<Var<T>> logits;
  Var<T> level = img;
  for (std::size_t k = 0; k < scales_.size(); ++k) {
    if (k > 0) level = ops::avg_pool3s2(level);
    Var<T> x = level;
    for (const auto& conv : scales_[k].convs) x = ops::leaky_relu(conv(x), static_cast<T>(kLeakySlope));
    logits.push_back(scales_[k].head(x));
  }
  return logits;
}

template <typename T>
ParamList<T> MultiScaleDiscriminator<T>::parameters() const {
  ParamList<T> out;
  for (std::size_t k = 0; k < scales_.size(); ++k) {
    const std::string prefix = "discriminator.scale" + std::to_string(k);
    for (std::size_t i = 0; i < scales_[k].convs.size(); ++i) {
      scales_[k].convs[i].collect(prefix + ".conv" + std::to_string(i + 1), out);
    }
    scales_[k].head.collect(prefix + ".head", out);
  }
  return out;
}

template class MultiScaleDiscriminator<float>;
template class MultiScaleDiscriminator<double>;

}  // namespace cr
