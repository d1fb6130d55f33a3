#pragma once

// Feature modeling: a frozen VGG-19 convolutional prefix tapped at four depths
// ("feature model"), plus the instance statistics and normalization that
// every other module builds on.
//
// Tap numbering follows the layer count of the normalized VGG-19 commonly used
// for AdaIN, whose module list prefixes a 1x1 input conv and inserts a padding
// module before every 3x3 conv. Counting those modules from 1:
//
//   tap  activation  torchvision features[i]  channels  stride
//    4   relu1_1      1                          64       1
//   11   relu2_1      6                         128       2
//   18   relu3_1     11                         256       4
//   31   relu4_1     20                         512       8
//
// The stride/channel ladder is what the renderer's x2 upsampling and skip
// concatenations require.

#include <array>
#include <cstdint>
#include <string>

#include "cartoon/layers.hpp"

namespace cr {

inline constexpr double kStatEps = 1e-5;

struct ScaleInfo {
  int id;
  std::int64_t channels;
  std::int64_t stride;
  const char* activation;
};

inline constexpr std::array<ScaleInfo, 4> kScales{{
    {4, 64, 1, "relu1_1"},
    {11, 128, 2, "relu2_1"},
    {18, 256, 4, "relu3_1"},
    {31, 512, 8, "relu4_1"},
}};

/// Index 0..3 of a tap id; throws for anything other than 4/11/18/31.
int scale_index(int scale_id);

template <typename T>
struct FeatureMap {
  Var<T> data;
  int scale_id = 0;

  bool defined() const { return data.defined(); }
  const Shape& shape() const { return data.shape(); }
};

/// Four tapped feature maps of one image; an undefined entry is a missing scale.
template <typename T>
struct FeatureModel {
  std::array<FeatureMap<T>, 4> maps;

  FeatureMap<T>& at(int scale_id) { return maps[static_cast<std::size_t>(scale_index(scale_id))]; }
  const FeatureMap<T>& at(int scale_id) const { return maps[static_cast<std::size_t>(scale_index(scale_id))]; }

  /// Throws ShapeError naming the first missing scale.
  void require_complete(const char* what) const;
  /// Throws ShapeError unless channels match kScales and spatial extents
  /// halve from each scale to the next.
  void require_ladder(const char* what) const;

  FeatureModel detached() const {
    FeatureModel out;
    for (std::size_t i = 0; i < 4; ++i) out.maps[i] = {maps[i].data.detach(), maps[i].scale_id};
    return out;
  }
};

template <typename T>
struct ChannelStats {
  Var<T> mu;     // (N,C,1,1)
  Var<T> sigma;  // (N,C,1,1), >= sqrt(eps)
};

/// Per (batch item, channel) spatial mean and sqrt(population variance + 1e-5).
template <typename T>
ChannelStats<T> channel_stats(const Var<T>& x);

/// (x - mu) / sigma per channel, using channel_stats.
template <typename T>
Var<T> normalize(const Var<T>& x);

/// Throws ShapeError unless img is (N,3,H,W) with H, W >= 8 and divisible by 8.
void require_image_dims(const Shape& img, const char* what);

/// Frozen VGG-19 prefix through relu4_1. Parameters never require gradients;
/// gradients still flow to the input image.
template <typename T>
class ModelingNetwork {
 public:
  static constexpr const char* kArchitecture = "vgg19-prefix-relu4_1";

  /// He-initialized weights; stands in when no converted classifier weights are given.
  static ModelingNetwork seeded(std::uint64_t seed);

  /// Layer names in execution order, e.g. "conv1_1".
  static const std::array<const char*, 9>& layer_names();

  FeatureModel<T> extract(const Var<T>& img) const;

  ParamList<T> parameters() const;
  std::uint64_t parameter_hash() const { return cr::parameter_hash(parameters()); }
  std::array<Conv2dLayer<T>, 9>& layers() { return convs_; }

 private:
  std::array<Conv2dLayer<T>, 9> convs_;
};

template <typename T>
FeatureModel<T> extract_feature_model(const Var<T>& img, const ModelingNetwork<T>& net) {
  return net.extract(img);
}

}  // namespace cr
