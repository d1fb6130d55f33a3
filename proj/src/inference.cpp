#include "cartoon/inference.hpp"

#include <algorithm>
#include <cmath>

#include "cartoon/image_io.hpp"

namespace cr {

namespace {

Tensor<float> prepare_reference(const Tensor<float>& ref) {
  return pad_to_multiple(resize_min_side(ref, kReferenceSide), 8);
}

Tensor<float> uncrop(const Tensor<float>& out, const Tensor<float>& like) {
  if (out.h() == like.h() && out.w() == like.w()) return out;
  return crop(out, 0, 0, like.h(), like.w());
}

// ---- receptive field by interval propagation along one axis ----

struct Interval {
  std::int64_t lo, hi;
  Interval widen(std::int64_t r) const { return {lo - r, hi + r}; }
  Interval hull(const Interval& o) const { return {std::min(lo, o.lo), std::max(hi, o.hi)}; }
};

std::int64_t floor_div(std::int64_t a, std::int64_t b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

enum class Op { Conv3, Pool2 };

// Encoder layers in order, with the tap after the conv at the given position.
constexpr Op kEncoder[] = {Op::Conv3, Op::Conv3, Op::Pool2, Op::Conv3, Op::Conv3, Op::Pool2, Op::Conv3,
                           Op::Conv3, Op::Conv3, Op::Conv3, Op::Pool2, Op::Conv3};
constexpr std::size_t kTapEnd[] = {1, 4, 7, 12};  // layers up to and including each tap's conv

// Image rows that reach the given interval of tap `scale` (0..3).
Interval encoder_footprint(std::size_t scale, Interval iv) {
  for (std::size_t i = kTapEnd[scale]; i-- > 0;) {
    iv = kEncoder[i] == Op::Conv3 ? iv.widen(1) : Interval{2 * iv.lo, 2 * iv.hi + 1};
  }
  return iv;
}

// Renderer block k (0..3) output interval -> image interval.
Interval block_footprint(int k, Interval iv) {
  static constexpr int kFactor[] = {2, 2, 2, 1};
  static constexpr int kSkipScale[] = {2, 1, 0, -1};
  const Interval conv_in = iv.widen(1);
  const Interval up = kFactor[k] == 2 ? Interval{floor_div(conv_in.lo, 2), floor_div(conv_in.hi, 2)} : conv_in;
  Interval out = k == 0 ? encoder_footprint(3, up) : block_footprint(k - 1, up);
  if (kSkipScale[k] >= 0) out = out.hull(encoder_footprint(static_cast<std::size_t>(kSkipScale[k]), conv_in));
  return out;
}

std::int64_t round_up8(std::int64_t v) { return (v + 7) / 8 * 8; }

// ---- streamed statistics ----

struct Moments {
  std::vector<double> count, mean, m2;

  explicit Moments(std::int64_t c = 0)
      : count(static_cast<std::size_t>(c), 0.0), mean(count), m2(count) {}

  // Chan et al. parallel merge of one channel's block moments.
  void merge(std::size_t c, double n, double mu, double q) {
    if (n == 0) return;
    const double na = count[c];
    const double total = na + n;
    const double delta = mu - mean[c];
    mean[c] += delta * n / total;
    m2[c] += q + delta * delta * na * n / total;
    count[c] = total;
  }
};

// Core window of one feature map in that map's coordinates.
struct Window {
  std::int64_t y0, x0, h, w;
};

Window core_window(const Tile& t, std::int64_t stride) {
  return {(t.y0 - t.py0) / stride, (t.x0 - t.px0) / stride, (t.y1 - t.y0) / stride, (t.x1 - t.x0) / stride};
}

void accumulate_moments(const Tensor<float>& f, const Window& win, Moments& acc) {
  const double n = static_cast<double>(win.h * win.w);
  for (std::int64_t c = 0; c < f.c(); ++c) {
    double sum = 0;
    for (std::int64_t y = 0; y < win.h; ++y) {
      const float* row = &f.at(0, c, win.y0 + y, win.x0);
      for (std::int64_t x = 0; x < win.w; ++x) sum += row[x];
    }
    const double mu = sum / n;
    double q = 0;
    for (std::int64_t y = 0; y < win.h; ++y) {
      const float* row = &f.at(0, c, win.y0 + y, win.x0);
      for (std::int64_t x = 0; x < win.w; ++x) {
        const double d = row[x] - mu;
        q += d * d;
      }
    }
    acc.merge(static_cast<std::size_t>(c), n, mu, q);
  }
}

void accumulate_sums(const Tensor<float>& f, const Window& win, std::vector<double>& sums) {
  for (std::int64_t c = 0; c < f.c(); ++c) {
    double sum = 0;
    for (std::int64_t y = 0; y < win.h; ++y) {
      const float* row = &f.at(0, c, win.y0 + y, win.x0);
      for (std::int64_t x = 0; x < win.w; ++x) sum += row[x];
    }
    sums[static_cast<std::size_t>(c)] += sum;
  }
}

Var<float> column(const std::vector<double>& v) {
  Tensor<float> t(1, static_cast<std::int64_t>(v.size()), 1, 1);
  for (std::size_t i = 0; i < v.size(); ++i) t[static_cast<std::int64_t>(i)] = static_cast<float>(v[i]);
  return Var<float>(t);
}

std::vector<double> to_doubles(const Tensor<float>& t) { return {t.data(), t.data() + t.numel()}; }

}  // namespace

Tensor<float> cartoonize(const Tensor<float>& photo, const Tensor<float>& reference, const CartoonModel& model) {
  NoGradGuard guard;
  const Tensor<float> p = pad_to_multiple(photo, 8);
  const FeatureModel<float> fp = model.modeling.extract(Var<float>(p));
  const FeatureModel<float> fc = model.modeling.extract(Var<float>(prepare_reference(reference)));
  const Var<float> y = model.renderer.render(coordinate(fp, fc, model.coordinator));
  return uncrop(y.value(), photo);
}

Tensor<float> reconstruct(const Tensor<float>& img, const CartoonModel& model) {
  NoGradGuard guard;
  const Tensor<float> p = pad_to_multiple(img, 8);
  const Var<float> y = model.renderer.render(model.modeling.extract(Var<float>(p)));
  return uncrop(y.value(), img);
}

std::int64_t render_radius() {
  std::int64_t r = 0;
  for (std::int64_t x = 800; x < 808; ++x) {
    const Interval iv = block_footprint(3, Interval{x, x}.widen(1));  // head conv
    r = std::max({r, x - iv.lo, iv.hi - x});
  }
  return r;
}

std::int64_t statistics_radius() {
  std::int64_t r = 0;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::int64_t stride = kScales[s].stride;
    const std::int64_t u = 100;
    const Interval iv = encoder_footprint(s, Interval{u, u}.widen(2));  // theta_p: two 3x3 convs
    r = std::max({r, stride * u - iv.lo, iv.hi - (stride * u + stride - 1)});
  }
  return r;
}

std::int64_t receptive_radius() { return std::max(render_radius(), statistics_radius()); }

std::int64_t min_overlap() { return round_up8(receptive_radius()); }

std::vector<Tile> make_tile_grid(std::int64_t h, std::int64_t w, std::int64_t tile, std::int64_t overlap) {
  if (tile <= 0 || tile % 8 != 0) throw ShapeError("tile size " + std::to_string(tile) + " is not a positive multiple of 8");
  if (overlap < 0 || overlap % 8 != 0) throw ShapeError("tile overlap " + std::to_string(overlap) + " is not a multiple of 8");
  if (h <= 0 || w <= 0 || h % 8 != 0 || w % 8 != 0) {
    throw ShapeError("tile grid needs extents divisible by 8, got " + std::to_string(h) + "x" + std::to_string(w));
  }
  std::vector<Tile> grid;
  for (std::int64_t y0 = 0; y0 < h; y0 += tile) {
    for (std::int64_t x0 = 0; x0 < w; x0 += tile) {
      Tile t{};
      t.y0 = y0;
      t.x0 = x0;
      t.y1 = std::min(h, y0 + tile);
      t.x1 = std::min(w, x0 + tile);
      t.py0 = std::max<std::int64_t>(0, t.y0 - overlap);
      t.px0 = std::max<std::int64_t>(0, t.x0 - overlap);
      t.py1 = std::min(h, t.y1 + overlap);
      t.px1 = std::min(w, t.x1 + overlap);
      grid.push_back(t);
    }
  }
  return grid;
}

Tensor<float> cartoonize_highres(const Tensor<float>& photo, const Tensor<float>& reference, const CartoonModel& model,
                                 const TileOptions& opts, HighresReport* report) {
  if (opts.tile <= 0 || opts.tile % 8 != 0) {
    throw ShapeError("tile size " + std::to_string(opts.tile) + " is not a positive multiple of 8");
  }
  if (opts.overlap < receptive_radius()) {
    throw ShapeError("tile overlap " + std::to_string(opts.overlap) + " is below the receptive-field radius " +
                     std::to_string(receptive_radius()));
  }
  if (photo.n() != 1 || photo.c() != 3) throw ShapeError("cartoonize_highres: expected (1,3,H,W), got " + photo.shape().str());
  NoGradGuard guard;
  MemoryTracker::reset_peak();

  // Margins are kept on the 8-pixel lattice so that pooling phases match the full image.
  const std::int64_t margin = round_up8(opts.overlap);
  Tensor<float> p = pad_to_multiple(photo, 8);
  const std::vector<Tile> grid = make_tile_grid(p.h(), p.w(), opts.tile, margin);

  // Style side is small (min side 256) and handled in one piece.
  std::array<ChannelStats<float>, 4> style_stats;
  std::array<Var<float>, 4> pooled_c;
  {
    const FeatureModel<float> fc = model.modeling.extract(Var<float>(prepare_reference(reference)));
    for (std::size_t s = 0; s < 4; ++s) {
      const Var<float>& x = fc.maps[s].data;
      style_stats[s] = channel_stats(x);
      pooled_c[s] = ops::global_avg_pool(model.coordinator.block(kScales[s].id).theta_c(x));
    }
  }

  // Pass 1: exact global moments of every scale and pooled theta_p responses.
  std::array<Moments, 4> moments;
  std::array<std::vector<double>, 4> theta_sums;
  for (std::size_t s = 0; s < 4; ++s) {
    moments[s] = Moments(kScales[s].channels);
    theta_sums[s].assign(static_cast<std::size_t>(kScales[s].channels), 0.0);
  }
  for (const Tile& t : grid) {
    const FeatureModel<float> f = model.modeling.extract(Var<float>(crop(p, t.py0, t.px0, t.py1 - t.py0, t.px1 - t.px0)));
    for (std::size_t s = 0; s < 4; ++s) {
      const Window win = core_window(t, kScales[s].stride);
      accumulate_moments(f.maps[s].data.value(), win, moments[s]);
      const Var<float> th = model.coordinator.block(kScales[s].id).theta_p(f.maps[s].data);
      accumulate_sums(th.value(), win, theta_sums[s]);
    }
  }

  // Frozen per-channel affine maps: (x - mu) / sigma * sigma' + mu'.
  struct Affine {
    Var<float> mu, sigma, sigma_prime, mu_prime;
  };
  std::array<Affine, 4> affine;
  for (std::size_t s = 0; s < 4; ++s) {
    const Moments& m = moments[s];
    const std::size_t c = m.mean.size();
    std::vector<double> sigma(c), pooled(c);
    for (std::size_t i = 0; i < c; ++i) {
      sigma[i] = std::sqrt(m.m2[i] / m.count[i] + kStatEps);
      pooled[i] = theta_sums[s][i] / m.count[i];
    }
    const GateNetwork<float>& gate = model.coordinator.block(kScales[s].id);
    const ChannelStats<float> content{column(m.mean), column(sigma)};
    const Var<float> omega = gate.forced() ? Var<float>(Tensor<float>(1, static_cast<std::int64_t>(c), 1, 1, *gate.forced()))
                                           : gate.head(column(pooled), pooled_c[s]);
    const BlendedStats<float> blended = blend_stats(content, style_stats[s], omega);
    affine[s] = {content.mu, content.sigma, blended.sigma_prime, blended.mu_prime};
    if (report) {
      report->stats[s] = {m.mean, sigma};
      report->omega[s] = to_doubles(omega.value());
    }
  }

  // Pass 2: render each tile with the frozen maps and keep its core.
  Tensor<float> out(1, 3, p.h(), p.w());
  for (const Tile& t : grid) {
    FeatureModel<float> f = model.modeling.extract(Var<float>(crop(p, t.py0, t.px0, t.py1 - t.py0, t.px1 - t.px0)));
    for (std::size_t s = 0; s < 4; ++s) {
      const Affine& a = affine[s];
      f.maps[s].data = ops::affine_normalize(f.maps[s].data, a.mu, a.sigma, a.sigma_prime, a.mu_prime);
    }
    const Tensor<float> y = model.renderer.render(f).value();
    for (std::int64_t c = 0; c < 3; ++c) {
      for (std::int64_t yy = t.y0; yy < t.y1; ++yy) {
        const float* src = &y.at(0, c, yy - t.py0, t.x0 - t.px0);
        std::copy(src, src + (t.x1 - t.x0), &out.at(0, c, yy, t.x0));
      }
    }
  }
  p = Tensor<float>();

  if (report) {
    report->tiles = grid.size();
    report->peak_bytes = MemoryTracker::peak();
  }
  return uncrop(out, photo);
}

}  // namespace cr
