#pragma once

// Coordination: aligns the photo's feature model to the cartoon's with one
// Soft-AdaIN block per scale. Each block learns channel-wise weights
// omega in (0,1) that blend content and style statistics:
//
//   sigma' = sigma(xc) * omega + sigma(xp) * (1 - omega)
//   mu'    = mu(xc)    * omega + mu(xp)    * (1 - omega)
//   out    = sigma' * (xp - mu(xp)) / sigma(xp) + mu'
//
// omega comes from a gate: two small conv stacks (theta_p on xp, theta_c on
// xc), global average pooling of each to (N,ch,1,1), channel concatenation,
// then fc1 -> ReLU -> fc2 -> sigmoid. Pooling lets xp and xc differ in size.

#include <array>
#include <optional>
#include <string>

#include "cartoon/features.hpp"
#include "cartoon/layers.hpp"

namespace cr {

template <typename T>
struct BlendedStats {
  Var<T> sigma_prime;  // (N,C,1,1)
  Var<T> mu_prime;     // (N,C,1,1)
};

/// sigma(style) * (content - mu(content)) / sigma(content) + mu(style).
/// Channel counts must agree; spatial sizes may differ.
template <typename T>
Var<T> adain(const Var<T>& content, const Var<T>& style);

template <typename T>
class GateNetwork {
 public:
  GateNetwork() = default;
  GateNetwork(std::int64_t channels, Rng& rng);

  std::int64_t channels() const { return channels_; }

  /// theta_p / theta_c before pooling: 3x3 conv -> ReLU -> 3x3 conv, reflection padded.
  Var<T> theta_p(const Var<T>& xp) const;
  Var<T> theta_c(const Var<T>& xc) const;
  /// fc1 -> ReLU -> fc2 -> sigmoid on pooled (N,ch,1,1) responses.
  Var<T> head(const Var<T>& pooled_p, const Var<T>& pooled_c) const;

  /// Full gate: omega (N,ch,1,1). Honors force().
  Var<T> weights(const Var<T>& xp, const Var<T>& xc) const;

  /// Clamp the gate output to a constant (testing the AdaIN/identity reductions).
  void force(std::optional<T> omega) { forced_ = omega; }
  std::optional<T> forced() const { return forced_; }

  void collect(const std::string& prefix, ParamList<T>& out) const;

 private:
  void require_channels(const Var<T>& x, const char* which) const;

  std::int64_t channels_ = 0;
  Conv2dLayer<T> theta_p1_, theta_p2_, theta_c1_, theta_c2_;
  LinearLayer<T> fc1_, fc2_;
  std::optional<T> forced_;
};

template <typename T>
Var<T> gate_weights(const Var<T>& xp, const Var<T>& xc, const GateNetwork<T>& gate) {
  return gate.weights(xp, xc);
}

/// Componentwise convex combination of two ChannelStats with weight omega on sc.
template <typename T>
BlendedStats<T> blend_stats(const ChannelStats<T>& sp, const ChannelStats<T>& sc, const Var<T>& omega);

template <typename T>
struct SoftAdainResult {
  Var<T> output;
  Var<T> omega;
  ChannelStats<T> content_stats;
  ChannelStats<T> style_stats;
  BlendedStats<T> blended;
};

template <typename T>
SoftAdainResult<T> soft_adain_detailed(const Var<T>& xp, const Var<T>& xc, const GateNetwork<T>& gate);

template <typename T>
Var<T> soft_adain(const Var<T>& xp, const Var<T>& xc, const GateNetwork<T>& gate) {
  return soft_adain_detailed(xp, xc, gate).output;
}

/// Four Soft-AdaIN blocks keyed by scale id 4/11/18/31.
template <typename T>
class Coordinator {
 public:
  Coordinator() = default;
  explicit Coordinator(Rng& rng);
  /// Custom channel counts per scale (small models in tests).
  Coordinator(const std::array<std::int64_t, 4>& channels, Rng& rng);

  GateNetwork<T>& block(int scale_id) { return blocks_[static_cast<std::size_t>(scale_index(scale_id))]; }
  const GateNetwork<T>& block(int scale_id) const {
    return blocks_[static_cast<std::size_t>(scale_index(scale_id))];
  }

  /// Soft-AdaIN at one scale; both maps must carry `scale_id`.
  FeatureMap<T> apply(int scale_id, const FeatureMap<T>& xp, const FeatureMap<T>& xc) const;

  void force_all(std::optional<T> omega) {
    for (auto& b : blocks_) b.force(omega);
  }

  ParamList<T> parameters() const;

 private:
  std::array<GateNetwork<T>, 4> blocks_;
};

/// t^l = soft_adain(f_l(p), f_l(c)) for every scale; result has the photo's extents.
template <typename T>
FeatureModel<T> coordinate(const FeatureModel<T>& photo, const FeatureModel<T>& cartoon,
                           const Coordinator<T>& coordinator);

}  // namespace cr
