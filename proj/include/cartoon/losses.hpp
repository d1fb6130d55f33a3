#pragma once

// Training objectives. Within one scale every L1/L2 term is a mean over
// elements; scales are then summed.

#include <string>
#include <vector>

#include "cartoon/features.hpp"

namespace cr {

struct LossWeights {
  double style = 20.0;
  double content = 1.0;
  double recon = 0.0001;
  double adv = 1.0;

  /// Throws std::invalid_argument on a negative or non-finite weight.
  void validate() const;
};

/// One training step's terms. adversarial_d is reported but not part of total.
struct LossReport {
  double content = 0;
  double style = 0;
  double adversarial_g = 0;
  double adversarial_d = 0;
  double reconstruction = 0;
  double total = 0;
};

/// Tab-separated log record: step, content, style, adversarial_g,
/// adversarial_d, reconstruction, total.
std::string loss_log_header();
std::string loss_log_line(long long step, const LossReport& r);

/// Sum over scales of mean |Norm(gen) - Norm(photo)|.
template <typename T>
Var<T> content_loss(const FeatureModel<T>& gen, const FeatureModel<T>& photo);

/// Sum over scales of ||sigma(gen) - sigma(style)||_2 + ||mu(gen) - mu(style)||_2
/// (norm over channels, mean over the batch). Spatial sizes may differ.
template <typename T>
Var<T> style_loss(const FeatureModel<T>& gen, const FeatureModel<T>& style);

/// Discriminator objective: sum over scales of BCE(real, 1) + BCE(fake, 0).
template <typename T>
Var<T> adversarial_loss_d(const std::vector<Var<T>>& real_logits, const std::vector<Var<T>>& fake_logits);

/// Non-saturating generator objective: sum over scales of BCE(fake, 1).
template <typename T>
Var<T> adversarial_loss_g(const std::vector<Var<T>>& fake_logits);

/// MSE(xp_rec, xp) + MSE(xc_rec, xc).
template <typename T>
Var<T> reconstruction_loss(const Var<T>& xp_rec, const Var<T>& xp, const Var<T>& xc_rec, const Var<T>& xc);

/// Weighted generator total from scalar partials (content, style,
/// reconstruction, adversarial_g of `r`). Throws NumericError naming the
/// first non-finite partial.
double total_generator_loss(const LossReport& r, const LossWeights& w);

/// Differentiable form of the same sum; undefined terms count as zero.
template <typename T>
Var<T> total_generator_loss(const Var<T>& content, const Var<T>& style, const Var<T>& reconstruction,
                            const Var<T>& adversarial_g, const LossWeights& w);

}  // namespace cr
