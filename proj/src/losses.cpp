#include "cartoon/losses.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace cr {

void LossWeights::validate() const {
  const std::pair<const char*, double> all[] = {{"style", style}, {"content", content}, {"recon", recon}, {"adv", adv}};
  for (const auto& [name, v] : all) {
    if (!std::isfinite(v) || v < 0) throw std::invalid_argument(std::string("loss weight ") + name + " must be >= 0");
  }
}

std::string loss_log_header() { return "step\tcontent\tstyle\tadversarial_g\tadversarial_d\treconstruction\ttotal"; }

std::string loss_log_line(long long step, const LossReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%lld\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g", step, r.content, r.style, r.adversarial_g,
                r.adversarial_d, r.reconstruction, r.total);
  return buf;
}

namespace {

template <typename T>
Var<T> sum_scalars(const std::vector<Var<T>>& terms) {
  return ops::weighted_sum(terms, std::vector<T>(terms.size(), T(1)));
}

}  // namespace

template <typename T>
Var<T> content_loss(const FeatureModel<T>& gen, const FeatureModel<T>& photo) {
  gen.require_complete("content_loss (generated)");
  photo.require_complete("content_loss (photo)");
  std::vector<Var<T>> terms;
  for (const auto& s : kScales) {
    const Var<T>& a = gen.at(s.id).data;
    const Var<T>& b = photo.at(s.id).data;
    if (a.shape() != b.shape()) {
      throw ShapeError("content_loss: scale " + std::to_string(s.id) + " shapes " + a.shape().str() + " vs " +
                       b.shape().str());
    }
    terms.push_back(ops::mean_abs_diff(normalize(a), normalize(b)));
  }
  return sum_scalars(terms);
}

template <typename T>
Var<T> style_loss(const FeatureModel<T>& gen, const FeatureModel<T>& style) {
  gen.require_complete("style_loss (generated)");
  style.require_complete("style_loss (style)");
  std::vector<Var<T>> terms;
  for (const auto& s : kScales) {
    const Var<T>& a = gen.at(s.id).data;
    const Var<T>& b = style.at(s.id).data;
    if (a.shape().c != b.shape().c || a.shape().n != b.shape().n) {
      throw ShapeError("style_loss: scale " + std::to_string(s.id) + " shapes " + a.shape().str() + " vs " +
                       b.shape().str());
    }
    const ChannelStats<T> sa = channel_stats(a);
    const ChannelStats<T> sb = channel_stats(b);
    terms.push_back(ops::mean_l2_diff(sa.sigma, sb.sigma));
    terms.push_back(ops::mean_l2_diff(sa.mu, sb.mu));
  }
  return sum_scalars(terms);
}

template <typename T>
Var<T> adversarial_loss_d(const std::vector<Var<T>>& real_logits, const std::vector<Var<T>>& fake_logits) {
  if (real_logits.size() != fake_logits.size() || real_logits.empty()) {
    throw ShapeError("adversarial_loss_d: " + std::to_string(real_logits.size()) + " real vs " +
                     std::to_string(fake_logits.size()) + " fake scales");
  }
  std::vector<Var<T>> terms;
  for (std::size_t k = 0; k < real_logits.size(); ++k) {
    terms.push_back(ops::bce_with_logits(real_logits[k], true));
    terms.push_back(ops::bce_with_logits(fake_logits[k], false));
  }
  return sum_scalars(terms);
}

template <typename T>
Var<T> adversarial_loss_g(const std::vector<Var<T>>& fake_logits) {
  if (fake_logits.empty()) throw ShapeError("adversarial_loss_g: no logit maps");
  std::vector<Var<T>> terms;
  for (const auto& l : fake_logits) terms.push_back(ops::bce_with_logits(l, true));
  return sum_scalars(terms);
}

template <typename T>
Var<T> reconstruction_loss(const Var<T>& xp_rec, const Var<T>& xp, const Var<T>& xc_rec, const Var<T>& xc) {
  if (xp_rec.shape() != xp.shape()) {
    throw ShapeError("reconstruction_loss: photo pair " + xp_rec.shape().str() + " vs " + xp.shape().str());
  }
  if (xc_rec.shape() != xc.shape()) {
    throw ShapeError("reconstruction_loss: cartoon pair " + xc_rec.shape().str() + " vs " + xc.shape().str());
  }
  return ops::add(ops::mean_sq_diff(xp_rec, xp), ops::mean_sq_diff(xc_rec, xc));
}

double total_generator_loss(const LossReport& r, const LossWeights& w) {
  const std::pair<const char*, double> parts[] = {
      {"style", r.style}, {"content", r.content}, {"reconstruction", r.reconstruction}, {"adversarial_g", r.adversarial_g}};
  for (const auto& [name, v] : parts) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite loss term: ") + name);
  }
  return w.style * r.style + w.content * r.content + w.recon * r.reconstruction + w.adv * r.adversarial_g;
}

template <typename T>
Var<T> total_generator_loss(const Var<T>& content, const Var<T>& style, const Var<T>& reconstruction,
                            const Var<T>& adversarial_g, const LossWeights& w) {
  const std::pair<const char*, std::pair<const Var<T>*, double>> parts[] = {
      {"style", {&style, w.style}},
      {"content", {&content, w.content}},
      {"reconstruction", {&reconstruction, w.recon}},
      {"adversarial_g", {&adversarial_g, w.adv}},
  };
  std::vector<Var<T>> terms;
  std::vector<T> weights;
  for (const auto& [name, tw] : parts) {
    const Var<T>& v = *tw.first;
    if (!v.defined()) continue;
    if (!std::isfinite(static_cast<double>(v.value()[0]))) {
      throw NumericError(std::string("non-finite loss term: ") + name);
    }
    terms.push_back(v);
    weights.push_back(static_cast<T>(tw.second));
  }
  if (terms.empty()) return Var<T>(Tensor<T>::scalar(T(0)));
  return ops::weighted_sum(terms, weights);
}

#define CARTOON_INSTANTIATE_LOSSES(T)                                                                         \
  template Var<T> content_loss<T>(const FeatureModel<T>&, const FeatureModel<T>&);                           \
  template Var<T> style_loss<T>(const FeatureModel<T>&, const FeatureModel<T>&);                             \
  template Var<T> adversarial_loss_d<T>(const std::vector<Var<T>>&, const std::vector<Var<T>>&);             \
  template Var<T> adversarial_loss_g<T>(const std::vector<Var<T>>&);                                         \
  template Var<T> reconstruction_loss<T>(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&);        \
  template Var<T> total_generator_loss<T>(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&,        \
                                          const LossWeights&);

CARTOON_INSTANTIATE_LOSSES(float)
CARTOON_INSTANTIATE_LOSSES(double)

}  // namespace cr
