#pragma once

// Differentiable tensor operations. All ops are templated on the scalar type
// and explicitly instantiated for float (training/inference) and double
// (gradient verification).

#include <cstdint>

#include "cartoon/autograd.hpp"

namespace cr::ops {

enum class Padding { Zero, Reflect };

struct ConvSpec {
  int stride = 1;
  int pad = 0;
  Padding padding = Padding::Zero;
};

/// x (N,Ci,H,W), weight (Co,Ci,K,K), bias (1,Co,1,1) or undefined.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, ConvSpec spec);

/// x (N,Ci,1,1), weight (Co,Ci,1,1), bias (1,Co,1,1) or undefined.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

template <typename T>
Var<T> relu(const Var<T>& x);
template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope);
template <typename T>
Var<T> tanh(const Var<T>& x);
template <typename T>
Var<T> sigmoid(const Var<T>& x);

/// 2x2 max pooling, stride 2 (floor on odd extents).
template <typename T>
Var<T> max_pool2(const Var<T>& x);
/// 3x3 average pooling, stride 2, padding 1, padded cells excluded from the count.
template <typename T>
Var<T> avg_pool3s2(const Var<T>& x);
/// Nearest-neighbour upsampling by an integer factor.
template <typename T>
Var<T> upsample_nearest(const Var<T>& x, int factor);

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b);
/// Spatial mean per (n, c): output (N,C,1,1).
template <typename T>
Var<T> global_avg_pool(const Var<T>& x);

/// Instance statistics: spatial mean / sqrt(population variance + eps), both (N,C,1,1).
template <typename T>
Var<T> channel_mean(const Var<T>& x);
template <typename T>
Var<T> channel_std(const Var<T>& x, T eps);

/// scale * (x - mean) / stdev + shift, the four (N,C,1,1) operands broadcast over space.
template <typename T>
Var<T> affine_normalize(const Var<T>& x, const Var<T>& mean, const Var<T>& stdev, const Var<T>& scale,
                        const Var<T>& shift);

/// a * w + b * (1 - w), elementwise over equal shapes.
template <typename T>
Var<T> lerp(const Var<T>& a, const Var<T>& b, const Var<T>& w);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& a, T k);

/// mean |a - b| over all elements -> scalar.
template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b);
/// mean (a - b)^2 over all elements -> scalar.
template <typename T>
Var<T> mean_sq_diff(const Var<T>& a, const Var<T>& b);
/// For (N,C,1,1) operands: batch mean of the per-item Euclidean norm of a - b.
template <typename T>
Var<T> mean_l2_diff(const Var<T>& a, const Var<T>& b);
/// Mean binary cross-entropy of logits against a constant label (1 or 0),
/// evaluated through the stable softplus forms.
template <typename T>
Var<T> bce_with_logits(const Var<T>& logits, bool target_real);

/// Single-element sum of single-element operands with constant weights.
template <typename T>
Var<T> weighted_sum(const std::vector<Var<T>>& terms, const std::vector<T>& weights);

/// Reflection index map; valid for pad < extent.
inline std::int64_t reflect_index(std::int64_t i, std::int64_t n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace cr::ops
