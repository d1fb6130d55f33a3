#include "cartoon/coordination.hpp"

namespace cr {

namespace {

template <typename T>
void require_same_channels(const Var<T>& a, const Var<T>& b, const char* what) {
  if (a.shape().c != b.shape().c) {
    throw ShapeError(std::string(what) + ": channel mismatch " + std::to_string(a.shape().c) + " vs " +
                     std::to_string(b.shape().c));
  }
  if (a.shape().n != b.shape().n) {
    throw ShapeError(std::string(what) + ": batch mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

constexpr ops::ConvSpec kThetaConv{1, 1, ops::Padding::Reflect};

}  // namespace

template <typename T>
Var<T> adain(const Var<T>& content, const Var<T>& style) {
  require_same_channels(content, style, "adain");
  const ChannelStats<T> sc = channel_stats(content);
  const ChannelStats<T> ss = channel_stats(style);
  return ops::affine_normalize(content, sc.mu, sc.sigma, ss.sigma, ss.mu);
}

template <typename T>
GateNetwork<T>::GateNetwork(std::int64_t channels, Rng& rng)
    : channels_(channels),
      theta_p1_(channels, channels, 3, kThetaConv, rng),
      theta_p2_(channels, channels, 3, kThetaConv, rng),
      theta_c1_(channels, channels, 3, kThetaConv, rng),
      theta_c2_(channels, channels, 3, kThetaConv, rng),
      fc1_(2 * channels, channels, rng),
      // Small fc2 weights and zero bias start omega near 0.5.
      fc2_(channels, channels, rng, 0.1) {}

template <typename T>
void GateNetwork<T>::require_channels(const Var<T>& x, const char* which) const {
  if (x.shape().c != channels_) {
    throw ShapeError(std::string("gate_weights: ") + which + " has " + std::to_string(x.shape().c) +
                     " channels, gate expects " + std::to_string(channels_));
  }
}

template <typename T>
Var<T> GateNetwork<T>::theta_p(const Var<T>& xp) const {
  return theta_p2_(ops::relu(theta_p1_(xp)));
}

template <typename T>
Var<T> GateNetwork<T>::theta_c(const Var<T>& xc) const {
  return theta_c2_(ops::relu(theta_c1_(xc)));
}

template <typename T>
Var<T> GateNetwork<T>::head(const Var<T>& pooled_p, const Var<T>& pooled_c) const {
  const Var<T> joined = ops::concat_channels(pooled_p, pooled_c);
  return ops::sigmoid(fc2_(ops::relu(fc1_(joined))));
}

template <typename T>
Var<T> GateNetwork<T>::weights(const Var<T>& xp, const Var<T>& xc) const {
  require_channels(xp, "content input");
  require_channels(xc, "style input");
  require_same_channels(xp, xc, "gate_weights");
  if (forced_) return Var<T>(Tensor<T>(xp.shape().n, channels_, 1, 1, *forced_));
  return head(ops::global_avg_pool(theta_p(xp)), ops::global_avg_pool(theta_c(xc)));
}

template <typename T>
void GateNetwork<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  theta_p1_.collect(prefix + ".theta_p.conv1", out);
  theta_p2_.collect(prefix + ".theta_p.conv2", out);
  theta_c1_.collect(prefix + ".theta_c.conv1", out);
  theta_c2_.collect(prefix + ".theta_c.conv2", out);
  fc1_.collect(prefix + ".fc1", out);
  fc2_.collect(prefix + ".fc2", out);
}

template <typename T>
BlendedStats<T> blend_stats(const ChannelStats<T>& sp, const ChannelStats<T>& sc, const Var<T>& omega) {
  for (const Var<T>* v : {&sp.sigma, &sc.mu, &sc.sigma, &omega}) {
    if (v->shape() != sp.mu.shape()) {
      throw ShapeError("blend_stats: length mismatch " + v->shape().str() + " vs " + sp.mu.shape().str());
    }
  }
  return {ops::lerp(sc.sigma, sp.sigma, omega), ops::lerp(sc.mu, sp.mu, omega)};
}

template <typename T>
SoftAdainResult<T> soft_adain_detailed(const Var<T>& xp, const Var<T>& xc, const GateNetwork<T>& gate) {
  require_same_channels(xp, xc, "soft_adain");
  SoftAdainResult<T> r;
  r.omega = gate.weights(xp, xc);
  r.content_stats = channel_stats(xp);
  r.style_stats = channel_stats(xc);
  r.blended = blend_stats(r.content_stats, r.style_stats, r.omega);
  r.output = ops::affine_normalize(xp, r.content_stats.mu, r.content_stats.sigma, r.blended.sigma_prime,
                                   r.blended.mu_prime);
  return r;
}

template <typename T>
Coordinator<T>::Coordinator(Rng& rng)
    : Coordinator({kScales[0].channels, kScales[1].channels, kScales[2].channels, kScales[3].channels}, rng) {}

template <typename T>
Coordinator<T>::Coordinator(const std::array<std::int64_t, 4>& channels, Rng& rng) {
  for (std::size_t i = 0; i < 4; ++i) blocks_[i] = GateNetwork<T>(channels[i], rng);
}

template <typename T>
FeatureMap<T> Coordinator<T>::apply(int scale_id, const FeatureMap<T>& xp, const FeatureMap<T>& xc) const {
  if (xp.scale_id != scale_id || xc.scale_id != scale_id) {
    throw ShapeError("Soft-AdaIN block " + std::to_string(scale_id) + " received maps of scale " +
                     std::to_string(xp.scale_id) + " / " + std::to_string(xc.scale_id));
  }
  return {soft_adain(xp.data, xc.data, block(scale_id)), scale_id};
}

template <typename T>
ParamList<T> Coordinator<T>::parameters() const {
  ParamList<T> out;
  for (std::size_t i = 0; i < 4; ++i) blocks_[i].collect("coordinator.block" + std::to_string(kScales[i].id), out);
  return out;
}

template <typename T>
FeatureModel<T> coordinate(const FeatureModel<T>& photo, const FeatureModel<T>& cartoon,
                           const Coordinator<T>& coordinator) {
  photo.require_complete("coordinate (photo)");
  cartoon.require_complete("coordinate (cartoon)");
  FeatureModel<T> out;
  for (std::size_t i = 0; i < 4; ++i) {
    const int id = kScales[i].id;
    out.maps[i] = coordinator.apply(id, photo.at(id), cartoon.at(id));
  }
  return out;
}

#define CARTOON_INSTANTIATE_COORD(T)                                                                         \
  template Var<T> adain<T>(const Var<T>&, const Var<T>&);                                                   \
  template class GateNetwork<T>;                                                                            \
  template BlendedStats<T> blend_stats<T>(const ChannelStats<T>&, const ChannelStats<T>&, const Var<T>&);   \
  template SoftAdainResult<T> soft_adain_detailed<T>(const Var<T>&, const Var<T>&, const GateNetwork<T>&); \
  template class Coordinator<T>;                                                                            \
  template FeatureModel<T> coordinate<T>(const FeatureModel<T>&, const FeatureModel<T>&, const Coordinator<T>&);

CARTOON_INSTANTIATE_COORD(float)
CARTOON_INSTANTIATE_COORD(double)

}  // namespace cr
