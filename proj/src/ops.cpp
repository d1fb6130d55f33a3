#include "cartoon/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "cartoon/simd/kernels.hpp"

namespace cr::ops {

namespace {

using simd::Trans;

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.data();
  const T* s = src.data();
  for (std::int64_t i = 0; i < dst.numel(); ++i) d[i] += s[i];
}

// Index maps from output coordinate to input coordinate per kernel tap;
// -1 marks a zero-padded tap.
struct ConvGeometry {
  std::int64_t ci = 0, h = 0, w = 0, co = 0, k = 0, ho = 0, wo = 0;
  bool direct = false;  // 1x1, stride 1, no padding: the input plane is the column matrix
  std::vector<std::int64_t> ymap, xmap;

  std::int64_t ckk() const { return ci * k * k; }
  std::int64_t out_plane() const { return ho * wo; }
  std::int64_t in_plane() const { return h * w; }

  std::int64_t chunk() const {
    const std::int64_t budget = (std::int64_t{1} << 20) / std::max<std::int64_t>(ckk(), 1);
    const std::int64_t p = std::max<std::int64_t>(64, budget / 64 * 64);
    return std::min(p, out_plane());
  }
};

ConvGeometry make_geometry(const Shape& xs, const Shape& ws, const ConvSpec& spec) {
  ConvGeometry g;
  g.ci = xs.c;
  g.h = xs.h;
  g.w = xs.w;
  g.co = ws.n;
  g.k = ws.h;
  if (ws.c != xs.c || ws.h != ws.w) {
    throw ShapeError("conv2d: weight " + ws.str() + " incompatible with input " + xs.str());
  }
  if (spec.stride < 1 || spec.pad < 0) throw ShapeError("conv2d: bad stride/pad");
  if (spec.padding == Padding::Reflect && (spec.pad >= g.h || spec.pad >= g.w)) {
    throw ShapeError("conv2d: reflection pad " + std::to_string(spec.pad) + " needs extent > pad, input " + xs.str());
  }
  const std::int64_t hp = g.h + 2 * spec.pad, wp = g.w + 2 * spec.pad;
  if (hp < g.k || wp < g.k) throw ShapeError("conv2d: input " + xs.str() + " smaller than kernel");
  g.ho = (hp - g.k) / spec.stride + 1;
  g.wo = (wp - g.k) / spec.stride + 1;
  g.direct = g.k == 1 && spec.stride == 1 && spec.pad == 0;
  auto map = [&](std::int64_t extent, std::int64_t out, std::vector<std::int64_t>& m) {
    m.resize(static_cast<std::size_t>(g.k * out));
    for (std::int64_t t = 0; t < g.k; ++t) {
      for (std::int64_t o = 0; o < out; ++o) {
        std::int64_t i = o * spec.stride - spec.pad + t;
        if (i < 0 || i >= extent) i = spec.padding == Padding::Reflect ? reflect_index(i, extent) : -1;
        m[static_cast<std::size_t>(t * out + o)] = i;
      }
    }
  };
  map(g.h, g.ho, g.ymap);
  map(g.w, g.wo, g.xmap);
  return g;
}

template <typename T>
void im2col(const ConvGeometry& g, const T* x, std::int64_t p0, std::int64_t count, T* cols) {
  for (std::int64_t c = 0; c < g.ci; ++c) {
    const T* xp = x + c * g.in_plane();
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      const std::int64_t* ym = g.ymap.data() + ky * g.ho;
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        const std::int64_t* xm = g.xmap.data() + kx * g.wo;
        T* dst = cols + ((c * g.k + ky) * g.k + kx) * count;
        std::int64_t oy = p0 / g.wo, ox = p0 % g.wo;
        std::int64_t j = 0;
        while (j < count) {
          const std::int64_t seg = std::min(count - j, g.wo - ox);
          const std::int64_t iy = ym[oy];
          if (iy < 0) {
            std::fill(dst + j, dst + j + seg, T(0));
          } else {
            const T* row = xp + iy * g.w;
            for (std::int64_t s = 0; s < seg; ++s) {
              const std::int64_t ix = xm[ox + s];
              dst[j + s] = ix < 0 ? T(0) : row[ix];
            }
          }
          j += seg;
          ox = 0;
          ++oy;
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* cols, std::int64_t p0, std::int64_t count, T* dx) {
  for (std::int64_t c = 0; c < g.ci; ++c) {
    T* xp = dx + c * g.in_plane();
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      const std::int64_t* ym = g.ymap.data() + ky * g.ho;
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        const std::int64_t* xm = g.xmap.data() + kx * g.wo;
        const T* src = cols + ((c * g.k + ky) * g.k + kx) * count;
        std::int64_t oy = p0 / g.wo, ox = p0 % g.wo;
        std::int64_t j = 0;
        while (j < count) {
          const std::int64_t seg = std::min(count - j, g.wo - ox);
          const std::int64_t iy = ym[oy];
          if (iy >= 0) {
            T* row = xp + iy * g.w;
            for (std::int64_t s = 0; s < seg; ++s) {
              const std::int64_t ix = xm[ox + s];
              if (ix >= 0) row[ix] += src[j + s];
            }
          }
          j += seg;
          ox = 0;
          ++oy;
        }
      }
    }
  }
}

template <typename T>
T stable_sigmoid(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

template <typename T>
T softplus(T z) {
  return std::max(z, T(0)) + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, ConvSpec spec) {
  const Shape& xs = x.shape();
  auto geom = std::make_shared<ConvGeometry>(make_geometry(xs, weight.shape(), spec));
  const ConvGeometry& g = *geom;
  if (bias.defined() && bias.value().numel() != g.co) throw ShapeError("conv2d: bias size mismatch");

  Tensor<T> out(xs.n, g.co, g.ho, g.wo);
  const std::int64_t chunk = g.chunk();
  std::vector<T, TrackingAllocator<T>> cols(g.direct ? 0 : static_cast<std::size_t>(g.ckk() * chunk));
  const T* wptr = weight.value().data();
  for (std::int64_t n = 0; n < xs.n; ++n) {
    const T* xn = x.value().plane(n, 0);
    T* on = out.plane(n, 0);
    for (std::int64_t p0 = 0; p0 < g.out_plane(); p0 += chunk) {
      const std::int64_t cnt = std::min(chunk, g.out_plane() - p0);
      const T* bmat = xn + p0;
      std::int64_t ldb = g.in_plane();
      if (!g.direct) {
        im2col(g, xn, p0, cnt, cols.data());
        bmat = cols.data();
        ldb = cnt;
      }
      simd::gemm(Trans::No, Trans::No, g.co, cnt, g.ckk(), T(1), wptr, g.ckk(), bmat, ldb, T(0), on + p0,
                 g.out_plane());
    }
    if (bias.defined()) {
      const T* b = bias.value().data();
      for (std::int64_t c = 0; c < g.co; ++c) {
        T* plane = on + c * g.out_plane();
        for (std::int64_t i = 0; i < g.out_plane(); ++i) plane[i] += b[c];
      }
    }
  }

  const bool has_bias = bias.defined();
  return make_result<T>(std::move(out), {x, weight, bias}, [geom, has_bias](Node<T>& self) {
    const ConvGeometry& g = *geom;
    Node<T>& xn = *self.parents[0];
    Node<T>& wn = *self.parents[1];
    Node<T>* bn = has_bias ? self.parents[2].get() : nullptr;
    const Tensor<T>& dy = self.grad;
    const std::int64_t batch = dy.n();
    if (bn && bn->requires_grad) {
      T* db = bn->grad_ref().data();
      for (std::int64_t n = 0; n < batch; ++n) {
        for (std::int64_t c = 0; c < g.co; ++c) {
          const T* p = dy.plane(n, c);
          T s = T(0);
          for (std::int64_t i = 0; i < g.out_plane(); ++i) s += p[i];
          db[c] += s;
        }
      }
    }
    const bool gx = xn.requires_grad, gw = wn.requires_grad;
    if (!gx && !gw) return;
    const std::int64_t chunk = g.chunk();
    std::vector<T, TrackingAllocator<T>> cols, dcols;
    if (!g.direct) {
      if (gw) cols.resize(static_cast<std::size_t>(g.ckk() * chunk));
      if (gx) dcols.resize(static_cast<std::size_t>(g.ckk() * chunk));
    }
    T* dw = gw ? wn.grad_ref().data() : nullptr;
    T* dx = gx ? xn.grad_ref().data() : nullptr;
    const T* w = wn.value.data();
    for (std::int64_t n = 0; n < batch; ++n) {
      const T* xin = xn.value.plane(n, 0);
      const T* dyn = dy.plane(n, 0);
      T* dxn = gx ? dx + n * g.ci * g.in_plane() : nullptr;
      for (std::int64_t p0 = 0; p0 < g.out_plane(); p0 += chunk) {
        const std::int64_t cnt = std::min(chunk, g.out_plane() - p0);
        if (gw) {
          const T* bmat = xin + p0;
          std::int64_t ldb = g.in_plane();
          if (!g.direct) {
            im2col(g, xin, p0, cnt, cols.data());
            bmat = cols.data();
            ldb = cnt;
          }
          simd::gemm(Trans::No, Trans::Yes, g.co, g.ckk(), cnt, T(1), dyn + p0, g.out_plane(), bmat, ldb, T(1), dw,
                     g.ckk());
        }
        if (gx) {
          if (g.direct) {
            simd::gemm(Trans::Yes, Trans::No, g.ci, cnt, g.co, T(1), w, g.ci, dyn + p0, g.out_plane(), T(1),
                       dxn + p0, g.in_plane());
          } else {
            simd::gemm(Trans::Yes, Trans::No, g.ckk(), cnt, g.co, T(1), w, g.ckk(), dyn + p0, g.out_plane(), T(0),
                       dcols.data(), cnt);
            col2im_add(g, dcols.data(), p0, cnt, dxn);
          }
        }
      }
    }
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  const std::int64_t in = xs.c * xs.h * xs.w;
  if (ws.c * ws.h * ws.w != in) throw ShapeError("linear: weight " + ws.str() + " vs input " + xs.str());
  const std::int64_t out_f = ws.n;
  Tensor<T> out(xs.n, out_f, 1, 1);
  simd::gemm(Trans::No, Trans::Yes, xs.n, out_f, in, T(1), x.value().data(), in, weight.value().data(), in, T(0),
             out.data(), out_f);
  if (bias.defined()) {
    if (bias.value().numel() != out_f) throw ShapeError("linear: bias size mismatch");
    for (std::int64_t n = 0; n < xs.n; ++n) {
      for (std::int64_t j = 0; j < out_f; ++j) out[n * out_f + j] += bias.value()[j];
    }
  }
  const bool has_bias = bias.defined();
  return make_result<T>(std::move(out), {x, weight, bias}, [in, out_f, has_bias](Node<T>& self) {
    Node<T>& xn = *self.parents[0];
    Node<T>& wn = *self.parents[1];
    const std::int64_t batch = self.grad.n();
    const T* dy = self.grad.data();
    if (xn.requires_grad) {
      simd::gemm(Trans::No, Trans::No, batch, in, out_f, T(1), dy, out_f, wn.value.data(), in, T(1),
                 xn.grad_ref().data(), in);
    }
    if (wn.requires_grad) {
      simd::gemm(Trans::Yes, Trans::No, out_f, in, batch, T(1), dy, out_f, xn.value.data(), in, T(1),
                 wn.grad_ref().data(), in);
    }
    if (has_bias && self.parents[2]->requires_grad) {
      T* db = self.parents[2]->grad_ref().data();
      for (std::int64_t n = 0; n < batch; ++n) {
        for (std::int64_t j = 0; j < out_f; ++j) db[j] += dy[n * out_f + j];
      }
    }
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out(x.shape());
  const T* in = x.value().data();
  T* o = out.data();
  for (std::int64_t i = 0; i < out.numel(); ++i) o[i] = in[i] > T(0) ? in[i] : T(0);
  return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
    Node<T>& xn = *self.parents[0];
    T* dx = xn.grad_ref().data();
    const T* y = self.value.data();
    const T* g = self.grad.data();
    for (std::int64_t i = 0; i < self.value.numel(); ++i) {
      if (y[i] > T(0)) dx[i] += g[i];
    }
  });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  Tensor<T> out(x.shape());
  const T* in = x.value().data();
  T* o = out.data();
  for (std::int64_t i = 0; i < out.numel(); ++i) o[i] = in[i] > T(0) ? in[i] : slope * in[i];
  return make_result<T>(std::move(out), {x}, [slope](Node<T>& self) {
    Node<T>& xn = *self.parents[0];
    T* dx = xn.grad_ref().data();
    const T* xv = xn.value.data();
    const T* g = self.grad.data();
    for (std::int64_t i = 0; i < self.value.numel(); ++i) dx[i] += xv[i] > T(0) ? g[i] : slope * g[i];
  });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  Tensor<T> out(x.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(x.value()[i]);
  return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
    T* dx = self.parents[0]->grad_ref().data();
    for (std::int64_t i = 0; i < self.value.numel(); ++i) {
      const T y = self.value[i];
      dx[i] += self.grad[i] * (T(1) - y * y);
    }
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out(x.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = stable_sigmoid(x.value()[i]);
  return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
    T* dx = self.parents[0]->grad_ref().data();
    for (std::int64_t i = 0; i < self.value.numel(); ++i) {
      const T y = self.value[i];
      dx[i] += self.grad[i] * y * (T(1) - y);
    }
  });
}

template <typename T>
Var<T> max_pool2(const Var<T>& x) {
  const Shape& s = x.shape();
  const std::int64_t ho = s.h / 2, wo = s.w / 2;
  if (ho == 0 || wo == 0) throw ShapeError("max_pool2: input too small " + s.str());
  Tensor<T> out(s.n, s.c, ho, wo);
  auto arg = std::make_shared<std::vector<std::int32_t>>(static_cast<std::size_t>(out.numel()));
  for (std::int64_t nc = 0; nc < s.n * s.c; ++nc) {
    const T* in = x.value().data() + nc * s.h * s.w;
    T* o = out.data() + nc * ho * wo;
    std::int32_t* a = arg->data() + nc * ho * wo;
    for (std::int64_t y = 0; y < ho; ++y) {
      for (std::int64_t xx = 0; xx < wo; ++xx) {
        std::int64_t best = (2 * y) * s.w + 2 * xx;
        for (std::int64_t dy = 0; dy < 2; ++dy) {
          for (std::int64_t dx = 0; dx < 2; ++dx) {
            const std::int64_t idx = (2 * y + dy) * s.w + 2 * xx + dx;
            if (in[idx] > in[best]) best = idx;
          }
        }
        o[y * wo + xx] = in[best];
        a[y * wo + xx] = static_cast<std::int32_t>(best);
      }
    }
  }
  return make_result<T>(std::move(out), {x}, [arg](Node<T>& self) {
    Node<T>& xn = *self.parents[0];
    const Shape& s = xn.value.shape();
    const std::int64_t po = self.value.h() * self.value.w();
    T* dx = xn.grad_ref().data();
    for (std::int64_t nc = 0; nc < s.n * s.c; ++nc) {
      T* d = dx + nc * s.h * s.w;
      const T* g = self.grad.data() + nc * po;
      const std::int32_t* a = arg->data() + nc * po;
      for (std::int64_t i = 0; i < po; ++i) d[a[i]] += g[i];
    }
  });
}

template <typename T>
Var<T> avg_pool3s2(const Var<T>& x) {
  const Shape& s = x.shape();
  const std::int64_t ho = (s.h - 1) / 2 + 1, wo = (s.w - 1) / 2 + 1;
  Tensor<T> out(s.n, s.c, ho, wo);
  auto window = [&s](std::int64_t o, std::int64_t extent, std::int64_t& lo, std::int64_t& hi) {
    lo = std::max<std::int64_t>(0, 2 * o - 1);
    hi = std::min<std::int64_t>(extent - 1, 2 * o + 1);
    (void)s;
  };
  for (std::int64_t nc = 0; nc < s.n * s.c; ++nc) {
    const T* in = x.value().data() + nc * s.h * s.w;
    T* o = out.data() + nc * ho * wo;
    for (std::int64_t y = 0; y < ho; ++y) {
      std::int64_t y0, y1;
      window(y, s.h, y0, y1);
      for (std::int64_t xx = 0; xx < wo; ++xx) {
        std::int64_t x0, x1;
        window(xx, s.w, x0, x1);
        T acc = T(0);
        for (std::int64_t iy = y0; iy <= y1; ++iy) {
          for (std::int64_t ix = x0; ix <= x1; ++ix) acc += in[iy * s.w + ix];
        }
        o[y * wo + xx] = acc / static_cast<T>((y1 - y0 + 1) * (x1 - x0 + 1));
      }
    }
  }
  return make_result<T>(std::move(out), {x}, [window](Node<T>& self) {
    Node<T>& xn = *self.parents[0];
    const Shape& s = xn.value.shape();
    const std::int64_t ho = self.value.h(), wo = self.value.w();
    T* dx = xn.grad_ref().data();
    for (std::int64_t nc = 0; nc < s.n * s.c; ++nc) {
      T* d = dx + nc * s.h * s.w;
      const T* g = self.grad.data() + nc * ho * wo;
      for (std::int64_t y = 0; y < ho; ++y) {
        std::int64_t y0, y1;
        window(y, s.h, y0, y1);
        for (std::int64_t xx = 0; xx < wo; ++xx) {
          std::int64_t x0, x1;
          window(xx, s.w, x0, x1);
          const T share = g[y * wo + xx] / static_cast<T>((y1 - y0 + 1) * (x1 - x0 + 1));
          for (std::int64_t iy = y0; iy <= y1; ++iy) {
            for (std::int64_t ix = x0; ix <= x1; ++ix) d[iy * s.w + ix] += share;
          }
        }
      }
    }
  });
}

template <typename T>
Var<T> upsample_nearest(const Var<T>& x, int factor) {
  if (factor < 1) throw ShapeError("upsample_nearest: factor must be >= 1");
  if (factor == 1) return x;
  const Shape& s = x.shape();
  const std::int64_t f = factor;
  Tensor<T> out(s.n, s.c, s.h * f, s.w * f);
  for (std::int64_t nc = 0; nc < s.n * s.c; ++nc) {
    const T* in = x.value().data() + nc * s.h * s.w;
    T* o = out.data() + nc * s.h * s.w * f * f;
    for (std::int64_t y = 0; y < s.h * f; ++y) {
      const T* row = in + (y / f) * s.w;
      T* orow = o + y * s.w * f;
      for (std::int64_t xx = 0; xx < s.w * f; ++xx) orow[xx] = row[xx / f];
    }
  }
  return make_result<T>(std::move(out), {x}, [f](Node<T>& self) {
    Node<T>& xn = *self.parents[0];
    const Shape& s = xn.value.shape();
    T* dx = xn.grad_ref().data();
    for (std::int64_t nc = 0; nc < s.n * s.c; ++nc) {
      T* d = dx + nc * s.h * s.w;
      const T* g = self.grad.data() + nc * s.h * s.w * f * f;
      for (std::int64_t y = 0; y < s.h * f; ++y) {
        T* drow = d + (y / f) * s.w;
        const T* grow = g + y * s.w * f;
        for (std::int64_t xx = 0; xx < s.w * f; ++xx) drow[xx / f] += grow[xx];
      }
    }
  });
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: " + sa.str() + " vs " + sb.str());
  }
  Tensor<T> out(sa.n, sa.c + sb.c, sa.h, sa.w);
  const std::int64_t la = sa.c * sa.h * sa.w, lb = sb.c * sb.h * sb.w;
  for (std::int64_t n = 0; n < sa.n; ++n) {
    std::copy(a.value().data() + n * la, a.value().data() + (n + 1) * la, out.data() + n * (la + lb));
    std::copy(b.value().data() + n * lb, b.value().data() + (n + 1) * lb, out.data() + n * (la + lb) + la);
  }
  return make_result<T>(std::move(out), {a, b}, [la, lb](Node<T>& self) {
    const std::int64_t batch = self.value.n();
    for (int side = 0; side < 2; ++side) {
      Node<T>& p = *self.parents[static_cast<std::size_t>(side)];
      if (!p.requires_grad) continue;
      T* d = p.grad_ref().data();
      const std::int64_t len = side == 0 ? la : lb;
      const std::int64_t off = side == 0 ? 0 : la;
      for (std::int64_t n = 0; n < batch; ++n) {
        const T* g = self.grad.data() + n * (la + lb) + off;
        for (std::int64_t i = 0; i < len; ++i) d[n * len + i] += g[i];
      }
    }
  });
}

template <typename T>
Var<T> channel_mean(const Var<T>& x) {
  const Shape& s = x.shape();
  if (s.h * s.w == 0) throw ShapeError("channel_mean: empty spatial extent");
  Tensor<T> out(s.n, s.c, 1, 1);
  for (std::int64_t nc = 0; nc < s.n * s.c; ++nc) {
    double mean = 0.0, m2 = 0.0;
    simd::moments(x.value().data() + nc * s.plane(), s.plane(), &mean, &m2);
    out[nc] = static_cast<T>(mean);
  }
  return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
    Node<T>& xn = *self.parents[0];
    const std::int64_t plane = xn.value.shape().plane();
    T* dx = xn.grad_ref().data();
    for (std::int64_t nc = 0; nc < self.value.numel(); ++nc) {
      const T share = self.grad[nc] / static_cast<T>(plane);
      T* d = dx + nc * plane;
      for (std::int64_t i = 0; i < plane; ++i) d[i] += share;
    }
  });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  return channel_mean(x);
}

template <typename T>
Var<T> channel_std(const Var<T>& x, T eps) {
  const Shape& s = x.shape();
  if (s.h * s.w == 0) throw ShapeError("channel_std: empty spatial extent");
  Tensor<T> out(s.n, s.c, 1, 1);
  auto means = std::make_shared<std::vector<double>>(static_cast<std::size_t>(s.n * s.c));
  for (std::int64_t nc = 0; nc < s.n * s.c; ++nc) {
    double mean = 0.0, m2 = 0.0;
    simd::moments(x.value().data() + nc * s.plane(), s.plane(), &mean, &m2);
    (*means)[static_cast<std::size_t>(nc)] = mean;
    out[nc] = static_cast<T>(std::sqrt(m2 / static_cast<double>(s.plane()) + static_cast<double>(eps)));
  }
  return make_result<T>(std::move(out), {x}, [means](Node<T>& self) {
    Node<T>& xn = *self.parents[0];
    const std::int64_t plane = xn.value.shape().plane();
    T* dx = xn.grad_ref().data();
    for (std::int64_t nc = 0; nc < self.value.numel(); ++nc) {
      const T mu = static_cast<T>((*means)[static_cast<std::size_t>(nc)]);
      const T k = self.grad[nc] / (static_cast<T>(plane) * self.value[nc]);
      const T* xv = xn.value.data() + nc * plane;
      T* d = dx + nc * plane;
      for (std::int64_t i = 0; i < plane; ++i) d[i] += k * (xv[i] - mu);
    }
  });
}

template <typename T>
Var<T> affine_normalize(const Var<T>& x, const Var<T>& mean, const Var<T>& stdev, const Var<T>& scale,
                        const Var<T>& shift) {
  const Shape& s = x.shape();
  const Shape stat{s.n, s.c, 1, 1};
  for (const Var<T>* v : {&mean, &stdev, &scale, &shift}) {
    if (v->shape() != stat) {
      throw ShapeError("affine_normalize: statistic shape " + v->shape().str() + " expected " + stat.str());
    }
  }
  Tensor<T> out(s);
  for (std::int64_t nc = 0; nc < s.n * s.c; ++nc) {
    const T k = scale.value()[nc] / stdev.value()[nc];
    const T b = shift.value()[nc] - k * mean.value()[nc];
    simd::scale_shift(x.value().data() + nc * s.plane(), out.data() + nc * s.plane(), s.plane(), k, b);
  }
  return make_result<T>(std::move(out), {x, mean, stdev, scale, shift}, [](Node<T>& self) {
    Node<T>& xn = *self.parents[0];
    Node<T>& mn = *self.parents[1];
    Node<T>& sn = *self.parents[2];
    Node<T>& an = *self.parents[3];
    Node<T>& bn = *self.parents[4];
    const std::int64_t plane = xn.value.shape().plane();
    const std::int64_t planes = self.value.n() * self.value.c();
    for (std::int64_t nc = 0; nc < planes; ++nc) {
      const T* g = self.grad.data() + nc * plane;
      const T* xv = xn.value.data() + nc * plane;
      const T mu = mn.value[nc], sd = sn.value[nc], a = an.value[nc];
      const T k = a / sd;
      double sum_g = 0.0, sum_gx = 0.0;
      for (std::int64_t i = 0; i < plane; ++i) {
        sum_g += static_cast<double>(g[i]);
        sum_gx += static_cast<double>(g[i]) * static_cast<double>((xv[i] - mu) / sd);
      }
      if (xn.requires_grad) {
        T* dx = xn.grad_ref().data() + nc * plane;
        for (std::int64_t i = 0; i < plane; ++i) dx[i] += k * g[i];
      }
      if (mn.requires_grad) mn.grad_ref()[nc] -= k * static_cast<T>(sum_g);
      if (sn.requires_grad) sn.grad_ref()[nc] -= k * static_cast<T>(sum_gx);
      if (an.requires_grad) an.grad_ref()[nc] += static_cast<T>(sum_gx);
      if (bn.requires_grad) bn.grad_ref()[nc] += static_cast<T>(sum_g);
    }
  });
}

template <typename T>
Var<T> lerp(const Var<T>& a, const Var<T>& b, const Var<T>& w) {
  require_same_shape(a, b, "lerp");
  require_same_shape(a, w, "lerp");
  Tensor<T> out(a.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    const T wi = w.value()[i];
    out[i] = a.value()[i] * wi + b.value()[i] * (T(1) - wi);
  }
  return make_result<T>(std::move(out), {a, b, w}, [](Node<T>& self) {
    Node<T>& an = *self.parents[0];
    Node<T>& bn = *self.parents[1];
    Node<T>& wn = *self.parents[2];
    for (std::int64_t i = 0; i < self.value.numel(); ++i) {
      const T g = self.grad[i];
      const T wi = wn.value[i];
      if (an.requires_grad) an.grad_ref()[i] += g * wi;
      if (bn.requires_grad) bn.grad_ref()[i] += g * (T(1) - wi);
      if (wn.requires_grad) wn.grad_ref()[i] += g * (an.value[i] - bn.value[i]);
    }
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  add_into(out, b.value());
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (p->requires_grad) add_into(p->grad_ref(), self.grad);
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T k) {
  Tensor<T> out(a.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * k;
  return make_result<T>(std::move(out), {a}, [k](Node<T>& self) {
    T* d = self.parents[0]->grad_ref().data();
    for (std::int64_t i = 0; i < self.value.numel(); ++i) d[i] += k * self.grad[i];
  });
}

template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mean_abs_diff");
  const std::int64_t n = a.value().numel();
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) acc += std::abs(static_cast<double>(a.value()[i]) - b.value()[i]);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
  return make_result<T>(std::move(out), {a, b}, [n](Node<T>& self) {
    Node<T>& an = *self.parents[0];
    Node<T>& bn = *self.parents[1];
    const T k = self.grad[0] / static_cast<T>(n);
    for (std::int64_t i = 0; i < n; ++i) {
      const T d = an.value[i] - bn.value[i];
      const T g = d > T(0) ? k : (d < T(0) ? -k : T(0));
      if (an.requires_grad) an.grad_ref()[i] += g;
      if (bn.requires_grad) bn.grad_ref()[i] -= g;
    }
  });
}

template <typename T>
Var<T> mean_sq_diff(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mean_sq_diff");
  const std::int64_t n = a.value().numel();
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a.value()[i]) - b.value()[i];
    acc += d * d;
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
  return make_result<T>(std::move(out), {a, b}, [n](Node<T>& self) {
    Node<T>& an = *self.parents[0];
    Node<T>& bn = *self.parents[1];
    const T k = T(2) * self.grad[0] / static_cast<T>(n);
    for (std::int64_t i = 0; i < n; ++i) {
      const T g = k * (an.value[i] - bn.value[i]);
      if (an.requires_grad) an.grad_ref()[i] += g;
      if (bn.requires_grad) bn.grad_ref()[i] -= g;
    }
  });
}

template <typename T>
Var<T> mean_l2_diff(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mean_l2_diff");
  const Shape& s = a.shape();
  const std::int64_t len = s.c * s.h * s.w;
  auto norms = std::make_shared<std::vector<T>>(static_cast<std::size_t>(s.n));
  double total = 0.0;
  for (std::int64_t n = 0; n < s.n; ++n) {
    double q = 0.0;
    for (std::int64_t i = 0; i < len; ++i) {
      const double d = static_cast<double>(a.value()[n * len + i]) - b.value()[n * len + i];
      q += d * d;
    }
    (*norms)[static_cast<std::size_t>(n)] = static_cast<T>(std::sqrt(q));
    total += std::sqrt(q);
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(s.n)));
  return make_result<T>(std::move(out), {a, b}, [norms, len](Node<T>& self) {
    Node<T>& an = *self.parents[0];
    Node<T>& bn = *self.parents[1];
    const std::int64_t batch = static_cast<std::int64_t>(norms->size());
    for (std::int64_t n = 0; n < batch; ++n) {
      const T norm = (*norms)[static_cast<std::size_t>(n)];
      if (norm == T(0)) continue;  // subgradient 0 at coincidence
      const T k = self.grad[0] / (static_cast<T>(batch) * norm);
      for (std::int64_t i = 0; i < len; ++i) {
        const std::int64_t j = n * len + i;
        const T g = k * (an.value[j] - bn.value[j]);
        if (an.requires_grad) an.grad_ref()[j] += g;
        if (bn.requires_grad) bn.grad_ref()[j] -= g;
      }
    }
  });
}

template <typename T>
Var<T> bce_with_logits(const Var<T>& logits, bool target_real) {
  const std::int64_t n = logits.value().numel();
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const T z = logits.value()[i];
    acc += static_cast<double>(target_real ? softplus(-z) : softplus(z));
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
  return make_result<T>(std::move(out), {logits}, [n, target_real](Node<T>& self) {
    Node<T>& zn = *self.parents[0];
    T* dz = zn.grad_ref().data();
    const T k = self.grad[0] / static_cast<T>(n);
    for (std::int64_t i = 0; i < n; ++i) {
      const T p = stable_sigmoid(zn.value[i]);
      dz[i] += k * (target_real ? p - T(1) : p);
    }
  });
}

template <typename T>
Var<T> weighted_sum(const std::vector<Var<T>>& terms, const std::vector<T>& weights) {
  if (terms.size() != weights.size() || terms.empty()) throw ShapeError("weighted_sum: size mismatch");
  T acc = T(0);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].value().numel() != 1) throw ShapeError("weighted_sum: terms must be scalars");
    acc += weights[i] * terms[i].value()[0];
  }
  return make_result<T>(Tensor<T>::scalar(acc), terms, [weights](Node<T>& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      if (self.parents[i]->requires_grad) self.parents[i]->grad_ref()[0] += weights[i] * self.grad[0];
    }
  });
}

#define CARTOON_INSTANTIATE_OPS(T)                                                                        \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, ConvSpec);                      \
  template Var<T> linear<T>(const Var<T>&, const Var<T>&, const Var<T>&);                                \
  template Var<T> relu<T>(const Var<T>&);                                                                \
  template Var<T> leaky_relu<T>(const Var<T>&, T);                                                       \
  template Var<T> tanh<T>(const Var<T>&);                                                                \
  template Var<T> sigmoid<T>(const Var<T>&);                                                             \
  template Var<T> max_pool2<T>(const Var<T>&);                                                           \
  template Var<T> avg_pool3s2<T>(const Var<T>&);                                                         \
  template Var<T> upsample_nearest<T>(const Var<T>&, int);                                               \
  template Var<T> concat_channels<T>(const Var<T>&, const Var<T>&);                                      \
  template Var<T> global_avg_pool<T>(const Var<T>&);                                                     \
  template Var<T> channel_mean<T>(const Var<T>&);                                                        \
  template Var<T> channel_std<T>(const Var<T>&, T);                                                      \
  template Var<T> affine_normalize<T>(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&,        \
                                      const Var<T>&);                                                    \
  template Var<T> lerp<T>(const Var<T>&, const Var<T>&, const Var<T>&);                                  \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                                  \
  template Var<T> scale<T>(const Var<T>&, T);                                                            \
  template Var<T> mean_abs_diff<T>(const Var<T>&, const Var<T>&);                                        \
  template Var<T> mean_sq_diff<T>(const Var<T>&, const Var<T>&);                                         \
  template Var<T> mean_l2_diff<T>(const Var<T>&, const Var<T>&);                                         \
  template Var<T> bce_with_logits<T>(const Var<T>&, bool);                                               \
  template Var<T> weighted_sum<T>(const std::vector<Var<T>>&, const std::vector<T>&);

CARTOON_INSTANTIATE_OPS(float)
CARTOON_INSTANTIATE_OPS(double)

}  // namespace cr::ops
