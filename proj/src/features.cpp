#include "cartoon/features.hpp"

#include <string>

namespace cr {

int scale_index(int scale_id) {
  for (std::size_t i = 0; i < kScales.size(); ++i) {
    if (kScales[i].id == scale_id) return static_cast<int>(i);
  }
  throw ShapeError("unknown feature scale " + std::to_string(scale_id) + " (expected 4, 11, 18 or 31)");
}

template <typename T>
void FeatureModel<T>::require_complete(const char* what) const {
  for (std::size_t i = 0; i < 4; ++i) {
    if (!maps[i].defined()) {
      throw ShapeError(std::string(what) + ": feature model is missing scale " + std::to_string(kScales[i].id));
    }
    if (maps[i].scale_id != kScales[i].id) {
      throw ShapeError(std::string(what) + ": slot for scale " + std::to_string(kScales[i].id) + " holds scale " +
                       std::to_string(maps[i].scale_id));
    }
  }
}

template <typename T>
void FeatureModel<T>::require_ladder(const char* what) const {
  require_complete(what);
  const Shape& base = maps[0].shape();
  for (std::size_t i = 0; i < 4; ++i) {
    const Shape& s = maps[i].shape();
    const std::int64_t f = kScales[i].stride;
    if (s.c != kScales[i].channels || s.n != base.n || s.h * f != base.h || s.w * f != base.w) {
      throw ShapeError(std::string(what) + ": scale " + std::to_string(kScales[i].id) + " has shape " + s.str() +
                       ", inconsistent with the x2 ladder from " + base.str());
    }
  }
}

template <typename T>
ChannelStats<T> channel_stats(const Var<T>& x) {
  if (x.value().numel() == 0) throw ShapeError("channel_stats: empty feature map");
  return {ops::channel_mean(x), ops::channel_std(x, static_cast<T>(kStatEps))};
}

template <typename T>
Var<T> normalize(const Var<T>& x) {
  const ChannelStats<T> st = channel_stats(x);
  const Shape s{x.shape().n, x.shape().c, 1, 1};
  return ops::affine_normalize(x, st.mu, st.sigma, Var<T>(Tensor<T>(s, T(1))), Var<T>(Tensor<T>(s, T(0))));
}

void require_image_dims(const Shape& img, const char* what) {
  if (img.c != 3) throw ShapeError(std::string(what) + ": expected 3 channels, got " + img.str());
  if (img.h < 8 || img.w < 8) throw ShapeError(std::string(what) + ": image smaller than 8x8: " + img.str());
  if (img.h % 8 != 0) {
    throw ShapeError(std::string(what) + ": height " + std::to_string(img.h) + " is not divisible by 8");
  }
  if (img.w % 8 != 0) {
    throw ShapeError(std::string(what) + ": width " + std::to_string(img.w) + " is not divisible by 8");
  }
}

namespace {

struct VggConv {
  const char* name;
  std::int64_t in, out;
};

constexpr std::array<VggConv, 9> kVgg{{
    {"conv1_1", 3, 64},
    {"conv1_2", 64, 64},
    {"conv2_1", 64, 128},
    {"conv2_2", 128, 128},
    {"conv3_1", 128, 256},
    {"conv3_2", 256, 256},
    {"conv3_3", 256, 256},
    {"conv3_4", 256, 256},
    {"conv4_1", 256, 512},
}};

// ImageNet statistics of the classifier's [0,1] input.
constexpr std::array<double, 3> kMean{0.485, 0.456, 0.406};
constexpr std::array<double, 3> kStd{0.229, 0.224, 0.225};

}  // namespace

template <typename T>
const std::array<const char*, 9>& ModelingNetwork<T>::layer_names() {
  static const std::array<const char*, 9> names = [] {
    std::array<const char*, 9> n{};
    for (std::size_t i = 0; i < kVgg.size(); ++i) n[i] = kVgg[i].name;
    return n;
  }();
  return names;
}

template <typename T>
ModelingNetwork<T> ModelingNetwork<T>::seeded(std::uint64_t seed) {
  ModelingNetwork net;
  Rng rng(seed);
  for (std::size_t i = 0; i < kVgg.size(); ++i) {
    net.convs_[i] = Conv2dLayer<T>(kVgg[i].in, kVgg[i].out, 3, ops::ConvSpec{1, 1, ops::Padding::Zero}, rng,
                                   std::sqrt(2.0), /*trainable=*/false);
  }
  return net;
}

template <typename T>
ParamList<T> ModelingNetwork<T>::parameters() const {
  ParamList<T> out;
  for (std::size_t i = 0; i < kVgg.size(); ++i) convs_[i].collect(std::string("modeling.") + kVgg[i].name, out);
  return out;
}

template <typename T>
FeatureModel<T> ModelingNetwork<T>::extract(const Var<T>& img) const {
  require_image_dims(img.shape(), "extract_feature_model");
  const std::int64_t n = img.shape().n;

  // [-1,1] -> classifier input: ((x + 1) / 2 - mean) / std
  Tensor<T> zero(n, 3, 1, 1), one(n, 3, 1, 1, T(1)), gain(n, 3, 1, 1), offset(n, 3, 1, 1);
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t c = 0; c < 3; ++c) {
      gain.at(b, c, 0, 0) = static_cast<T>(0.5 / kStd[static_cast<std::size_t>(c)]);
      offset.at(b, c, 0, 0) =
          static_cast<T>((0.5 - kMean[static_cast<std::size_t>(c)]) / kStd[static_cast<std::size_t>(c)]);
    }
  }
  Var<T> x = ops::affine_normalize(img, Var<T>(zero), Var<T>(one), Var<T>(gain), Var<T>(offset));

  auto conv_relu = [this](const Var<T>& v, std::size_t i) { return ops::relu(convs_[i](v)); };

  FeatureModel<T> model;
  x = conv_relu(x, 0);
  model.maps[0] = {x, 4};
  x = conv_relu(x, 1);
  x = ops::max_pool2(x);
  x = conv_relu(x, 2);
  model.maps[1] = {x, 11};
  x = conv_relu(x, 3);
  x = ops::max_pool2(x);
  x = conv_relu(x, 4);
  model.maps[2] = {x, 18};
  x = conv_relu(x, 5);
  x = conv_relu(x, 6);
  x = conv_relu(x, 7);
  x = ops::max_pool2(x);
  x = conv_relu(x, 8);
  model.maps[3] = {x, 31};
  return model;
}

template struct FeatureModel<float>;
template struct FeatureModel<double>;
template class ModelingNetwork<float>;
template class ModelingNetwork<double>;
template ChannelStats<float> channel_stats<float>(const Var<float>&);
template ChannelStats<double> channel_stats<double>(const Var<double>&);
template Var<float> normalize<float>(const Var<float>&);
template Var<double> normalize<double>(const Var<double>&);

}  // namespace cr
