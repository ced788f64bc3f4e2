// Copyright 2026 The cslkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cslkit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cslkit/error.hpp"
#include "cslkit/kernels.hpp"

namespace csl::ops {

const char* to_string(Padding p) { return p == Padding::same ? "same" : "valid"; }
const char* to_string(PoolKind k) { return k == PoolKind::max ? "max" : "avg"; }

AxisGeometry conv_axis(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding) {
  AxisGeometry g;
  if (padding == Padding::same) {
    g.out = (in + stride - 1) / stride;
    const std::size_t span = (g.out - 1) * stride + kernel;
    const std::size_t total = span > in ? span - in : 0;
    g.pad_before = total / 2;
    g.pad_after = total - g.pad_before;
  } else {
    if (in < kernel) {
      throw ShapeError("valid convolution needs input extent >= kernel, got " + std::to_string(in) + " < " +
                       std::to_string(kernel));
    }
    g.out = (in - kernel) / stride + 1;
  }
  return g;
}

namespace {

void check_stride(std::size_t stride) {
  if (stride != 1 && stride != 2) throw ShapeError("stride must be 1 or 2, got " + std::to_string(stride));
}

void check_kernel(const Shape& w) {
  if (w.n != w.c) throw ShapeError("filter bank must be square (K,K,C,N), got " + w.str());
  if (w.n % 2 == 0) throw ShapeError("kernel size must be odd, got " + std::to_string(w.n) + " in " + w.str());
}

struct PlannedConv {
  kernels::ConvGeometry geom;
  AxisGeometry ay;
  AxisGeometry ax;
};

PlannedConv plan(const Shape& x, std::size_t kernel, std::size_t stride, Padding padding, std::size_t out_ch,
                 std::size_t multiplier) {
  PlannedConv p;
  p.ay = conv_axis(x.h, kernel, stride, padding);
  p.ax = conv_axis(x.w, kernel, stride, padding);
  p.geom.in_ch = x.c;
  p.geom.in_h = x.h + p.ay.pad_before + p.ay.pad_after;
  p.geom.in_w = x.w + p.ax.pad_before + p.ax.pad_after;
  p.geom.out_ch = out_ch;
  p.geom.out_h = p.ay.out;
  p.geom.out_w = p.ax.out;
  p.geom.kernel = kernel;
  p.geom.stride = stride;
  p.geom.multiplier = multiplier;
  return p;
}

// Zero-padded copy of batch item n, or a view when no padding is needed.
template <typename T>
const T* padded_item(const Tensor<T>& x, std::size_t n, const PlannedConv& p, std::vector<T>& scratch) {
  const Shape& s = x.shape();
  if (p.ay.pad_before + p.ay.pad_after + p.ax.pad_before + p.ax.pad_after == 0) return x.plane(n, 0);
  scratch.assign(s.c * p.geom.in_h * p.geom.in_w, T{0});
  for (std::size_t c = 0; c < s.c; ++c) {
    const T* src = x.plane(n, c);
    T* dst = scratch.data() + c * p.geom.in_h * p.geom.in_w;
    for (std::size_t y = 0; y < s.h; ++y) {
      std::copy_n(src + y * s.w, s.w, dst + (y + p.ay.pad_before) * p.geom.in_w + p.ax.pad_before);
    }
  }
  return scratch.data();
}

template <typename T>
T softplus(T x) {
  return std::max(x, T{0}) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= 0) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <typename T>
void check_channel_param(const Tensor<T>& x, const Tensor<T>& p, const char* what) {
  const Shape& s = p.shape();
  if (s.n != 1 || s.h != 1 || s.w != 1 || s.c != x.shape().c) {
    throw ShapeError(std::string(what) + " must be (1," + std::to_string(x.shape().c) + ",1,1) for input " +
                     x.shape().str() + ", got " + s.str());
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride, Padding padding, MacCounter* counter,
                 std::string_view layer) {
  check_kernel(w.shape());
  check_stride(stride);
  const Shape& xs = x.shape();
  if (w.shape().h != xs.c) {
    throw ShapeError("conv2d: filter bank " + w.shape().str() + " expects " + std::to_string(w.shape().h) +
                     " input channels but input is " + xs.str());
  }
  const PlannedConv p = plan(xs, w.shape().n, stride, padding, w.shape().w, 1);
  Tensor<T> y(Shape{xs.n, p.geom.out_ch, p.geom.out_h, p.geom.out_w});
  const auto& k = kernels::active_table<T>();
  std::vector<T> scratch;
  std::uint64_t macs = 0;
  for (std::size_t n = 0; n < xs.n; ++n) {
    macs += k.conv2d(p.geom, padded_item(x, n, p, scratch), w.data().data(), y.plane(n, 0));
  }
  if (counter) counter->add(layer, macs);
  return y;
}

template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride, Padding padding,
                           MacCounter* counter, std::string_view layer) {
  check_kernel(w.shape());
  check_stride(stride);
  const Shape& xs = x.shape();
  if (w.shape().h != xs.c) {
    throw ShapeError("depthwise_conv2d: filter bank " + w.shape().str() + " expects " +
                     std::to_string(w.shape().h) + " input channels but input is " + xs.str());
  }
  const std::size_t mult = w.shape().w;
  const PlannedConv p = plan(xs, w.shape().n, stride, padding, xs.c * mult, mult);
  Tensor<T> y(Shape{xs.n, p.geom.out_ch, p.geom.out_h, p.geom.out_w});
  const auto& k = kernels::active_table<T>();
  std::vector<T> scratch;
  std::uint64_t macs = 0;
  for (std::size_t n = 0; n < xs.n; ++n) {
    macs += k.depthwise(p.geom, padded_item(x, n, p, scratch), w.data().data(), y.plane(n, 0));
  }
  if (counter) counter->add(layer, macs);
  return y;
}

template <typename T>
Tensor<T> pointwise_conv2d(const Tensor<T>& x, const Tensor<T>& w, MacCounter* counter, std::string_view layer) {
  if (w.shape().n != 1 || w.shape().c != 1) {
    throw ShapeError("pointwise_conv2d: filter bank must be (1,1,C,N), got " + w.shape().str());
  }
  return conv2d(x, w, 1, Padding::valid, counter, layer);
}

template <typename T>
Tensor<T> bias_add(const Tensor<T>& x, const Tensor<T>& bias) {
  check_channel_param(x, bias, "bias");
  Tensor<T> y = x;
  const Shape& s = x.shape();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      T* p = y.plane(n, c);
      const T b = bias[c];
      for (std::size_t i = 0; i < s.plane(); ++i) p[i] += b;
    }
  }
  return y;
}

template <typename T>
Tensor<T> channel_affine(const Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>& shift) {
  check_channel_param(x, scale, "affine scale");
  check_channel_param(x, shift, "affine shift");
  Tensor<T> y = x;
  const Shape& s = x.shape();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      T* p = y.plane(n, c);
      const T a = scale[c];
      const T b = shift[c];
      for (std::size_t i = 0; i < s.plane(); ++i) p[i] = p[i] * a + b;
    }
  }
  return y;
}

template <typename T>
Tensor<T> mish(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * std::tanh(softplus(x[i]));
  return y;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid_scalar(x[i]);
  return y;
}

template <typename T>
Tensor<T> pool2d(const Tensor<T>& x, PoolKind kind, std::size_t window, std::size_t stride) {
  const Shape& s = x.shape();
  if (window == 0 || stride == 0) throw ShapeError("pool2d: window and stride must be >= 1");
  if (window > s.h || window > s.w) {
    throw ShapeError("pool2d: window " + std::to_string(window) + " exceeds spatial dims of " + s.str());
  }
  const std::size_t oh = (s.h - window) / stride + 1;
  const std::size_t ow = (s.w - window) / stride + 1;
  Tensor<T> y(Shape{s.n, s.c, oh, ow});
  const T inv = T{1} / static_cast<T>(window * window);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* src = x.plane(n, c);
      T* dst = y.plane(n, c);
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          T acc = kind == PoolKind::max ? src[(oy * stride) * s.w + ox * stride] : T{0};
          for (std::size_t ky = 0; ky < window; ++ky) {
            for (std::size_t kx = 0; kx < window; ++kx) {
              const T v = src[(oy * stride + ky) * s.w + ox * stride + kx];
              acc = kind == PoolKind::max ? std::max(acc, v) : acc + v;
            }
          }
          dst[oy * ow + ox] = kind == PoolKind::max ? acc : acc * inv;
        }
      }
    }
  }
  return y;
}

Bin adaptive_bin(std::size_t i, std::size_t in, std::size_t out) { return {i * in / out, (i + 1) * in / out}; }

template <typename T>
Tensor<T> adaptive_avg_pool(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  const Shape& s = x.shape();
  if (out_h == 0 || out_w == 0) throw ShapeError("adaptive_avg_pool: output dims must be >= 1");
  if (out_h > s.h || out_w > s.w) {
    throw ShapeError("adaptive_avg_pool: output (" + std::to_string(out_h) + "," + std::to_string(out_w) +
                     ") larger than input " + s.str());
  }
  Tensor<T> y(Shape{s.n, s.c, out_h, out_w});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* src = x.plane(n, c);
      T* dst = y.plane(n, c);
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        const Bin by = adaptive_bin(oy, s.h, out_h);
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          const Bin bx = adaptive_bin(ox, s.w, out_w);
          T acc = 0;
          for (std::size_t yy = by.begin; yy < by.end; ++yy) {
            for (std::size_t xx = bx.begin; xx < bx.end; ++xx) acc += src[yy * s.w + xx];
          }
          dst[oy * out_w + ox] = acc / static_cast<T>((by.end - by.begin) * (bx.end - bx.begin));
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  return adaptive_avg_pool(x, 1, 1);
}

template <typename T>
Tensor<T> resize_nearest(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  const Shape& s = x.shape();
  if (out_h == 0 || out_w == 0) throw ShapeError("resize_nearest: output dims must be >= 1");
  Tensor<T> y(Shape{s.n, s.c, out_h, out_w});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* src = x.plane(n, c);
      T* dst = y.plane(n, c);
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        const std::size_t sy = nearest_source(oy, s.h, out_h);
        for (std::size_t ox = 0; ox < out_w; ++ox) dst[oy * out_w + ox] = src[sy * s.w + nearest_source(ox, s.w, out_w)];
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> xs) {
  if (xs.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape& first = xs.front()->shape();
  std::size_t channels = 0;
  for (const Tensor<T>* t : xs) {
    const Shape& s = t->shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: " + s.str() + " does not match " + first.str() + " outside channels");
    }
    channels += s.c;
  }
  Tensor<T> y(Shape{first.n, channels, first.h, first.w});
  for (std::size_t n = 0; n < first.n; ++n) {
    std::size_t offset = 0;
    for (const Tensor<T>* t : xs) {
      const std::size_t len = t->shape().c * first.plane();
      std::copy_n(t->plane(n, 0), len, y.plane(n, offset));
      offset += t->shape().c;
    }
  }
  return y;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs) {
  std::vector<const Tensor<T>*> ptrs;
  for (const auto& t : xs) ptrs.push_back(&t);
  return concat_channels<T>(std::span<const Tensor<T>* const>(ptrs));
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, std::span<const std::size_t> sizes) {
  const Shape& s = x.shape();
  std::size_t total = 0;
  for (std::size_t c : sizes) total += c;
  if (total != s.c) {
    throw ShapeError("split_channels: sizes sum to " + std::to_string(total) + " but input is " + s.str());
  }
  std::vector<Tensor<T>> out;
  std::size_t offset = 0;
  for (std::size_t c : sizes) {
    Tensor<T> part(Shape{s.n, c, s.h, s.w});
    for (std::size_t n = 0; n < s.n; ++n) std::copy_n(x.plane(n, offset), c * s.plane(), part.plane(n, 0));
    out.push_back(std::move(part));
    offset += c;
  }
  return out;
}

template <typename T>
Tensor<T> add(std::span<const Tensor<T>* const> xs) {
  if (xs.empty()) throw ShapeError("add: no inputs");
  Tensor<T> y = *xs.front();
  for (std::size_t k = 1; k < xs.size(); ++k) {
    if (xs[k]->shape() != y.shape()) {
      throw ShapeError("add: shape " + xs[k]->shape().str() + " does not match " + y.shape().str());
    }
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += (*xs[k])[i];
  }
  return y;
}

template <typename T>
Tensor<T> add(const std::vector<Tensor<T>>& xs) {
  std::vector<const Tensor<T>*> ptrs;
  for (const auto& t : xs) ptrs.push_back(&t);
  return add<T>(std::span<const Tensor<T>* const>(ptrs));
}

template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s) {
  const Shape& xs = x.shape();
  const Shape& ss = s.shape();
  if (ss.n != xs.n || ss.c != xs.c || ss.h != 1 || ss.w != 1) {
    throw ShapeError("scale_channels: scales " + ss.str() + " do not match input " + xs.str());
  }
  Tensor<T> y = x;
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t c = 0; c < xs.c; ++c) {
      T* p = y.plane(n, c);
      const T a = s.at(n, c, 0, 0);
      for (std::size_t i = 0; i < xs.plane(); ++i) p[i] *= a;
    }
  }
  return y;
}

// ---- backward ---------------------------------------------------------------

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride, Padding padding,
                             const Tensor<T>& dy) {
  const Shape& xs = x.shape();
  const std::size_t K = w.shape().n;
  const std::size_t C = xs.c;
  const std::size_t N = w.shape().w;
  const AxisGeometry ay = conv_axis(xs.h, K, stride, padding);
  const AxisGeometry ax = conv_axis(xs.w, K, stride, padding);
  if (dy.shape() != Shape{xs.n, N, ay.out, ax.out}) {
    throw ShapeError("conv2d_backward: upstream gradient " + dy.shape().str() + " does not match output");
  }
  ConvGrads<T> g{Tensor<T>(xs), Tensor<T>(w.shape())};
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t o = 0; o < N; ++o) {
      for (std::size_t oy = 0; oy < ay.out; ++oy) {
        for (std::size_t ox = 0; ox < ax.out; ++ox) {
          const T d = dy.at(n, o, oy, ox);
          for (std::size_t ky = 0; ky < K; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(ay.pad_before);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(xs.h)) continue;
            for (std::size_t kx = 0; kx < K; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(ax.pad_before);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(xs.w)) continue;
              for (std::size_t c = 0; c < C; ++c) {
                const std::size_t wi = ((ky * K + kx) * C + c) * N + o;
                g.dw[wi] += d * x.at(n, c, iy, ix);
                g.dx.at(n, c, iy, ix) += d * w[wi];
              }
            }
          }
        }
      }
    }
  }
  return g;
}

template <typename T>
ConvGrads<T> depthwise_conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride,
                                       Padding padding, const Tensor<T>& dy) {
  const Shape& xs = x.shape();
  const std::size_t K = w.shape().n;
  const std::size_t C = xs.c;
  const std::size_t M = w.shape().w;
  const AxisGeometry ay = conv_axis(xs.h, K, stride, padding);
  const AxisGeometry ax = conv_axis(xs.w, K, stride, padding);
  if (dy.shape() != Shape{xs.n, C * M, ay.out, ax.out}) {
    throw ShapeError("depthwise_conv2d_backward: upstream gradient " + dy.shape().str() + " does not match output");
  }
  ConvGrads<T> g{Tensor<T>(xs), Tensor<T>(w.shape())};
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t oy = 0; oy < ay.out; ++oy) {
          for (std::size_t ox = 0; ox < ax.out; ++ox) {
            const T d = dy.at(n, c * M + m, oy, ox);
            for (std::size_t ky = 0; ky < K; ++ky) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(ay.pad_before);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(xs.h)) continue;
              for (std::size_t kx = 0; kx < K; ++kx) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(ax.pad_before);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(xs.w)) continue;
                const std::size_t wi = ((ky * K + kx) * C + c) * M + m;
                g.dw[wi] += d * x.at(n, c, iy, ix);
                g.dx.at(n, c, iy, ix) += d * w[wi];
              }
            }
          }
        }
      }
    }
  }
  return g;
}

template <typename T>
Tensor<T> bias_add_backward(const Tensor<T>& dy) {
  const Shape& s = dy.shape();
  Tensor<T> db(Shape{1, s.c, 1, 1});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* p = dy.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) db[c] += p[i];
    }
  }
  return db;
}

template <typename T>
AffineGrads<T> channel_affine_backward(const Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>& dy) {
  const Shape& s = x.shape();
  AffineGrads<T> g{Tensor<T>(s), Tensor<T>(scale.shape()), Tensor<T>(scale.shape())};
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* xp = x.plane(n, c);
      const T* dp = dy.plane(n, c);
      T* gx = g.dx.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) {
        gx[i] = dp[i] * scale[c];
        g.dscale[c] += dp[i] * xp[i];
        g.dshift[c] += dp[i];
      }
    }
  }
  return g;
}

template <typename T>
Tensor<T> mish_backward(const Tensor<T>& x, const Tensor<T>& dy) {
  Tensor<T> dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    const T th = std::tanh(softplus(v));
    dx[i] = dy[i] * (th + v * (T{1} - th * th) * sigmoid_scalar(v));
  }
  return dx;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * y[i] * (T{1} - y[i]);
  return dx;
}

template <typename T>
Tensor<T> pool2d_backward(const Tensor<T>& x, PoolKind kind, std::size_t window, std::size_t stride,
                          const Tensor<T>& dy) {
  const Shape& s = x.shape();
  const std::size_t oh = dy.shape().h;
  const std::size_t ow = dy.shape().w;
  Tensor<T> dx(s);
  const T inv = T{1} / static_cast<T>(window * window);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* src = x.plane(n, c);
      T* dst = dx.plane(n, c);
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const T d = dy.at(n, c, oy, ox);
          if (kind == PoolKind::avg) {
            for (std::size_t ky = 0; ky < window; ++ky) {
              for (std::size_t kx = 0; kx < window; ++kx) dst[(oy * stride + ky) * s.w + ox * stride + kx] += d * inv;
            }
          } else {
            std::size_t best = (oy * stride) * s.w + ox * stride;
            for (std::size_t ky = 0; ky < window; ++ky) {
              for (std::size_t kx = 0; kx < window; ++kx) {
                const std::size_t i = (oy * stride + ky) * s.w + ox * stride + kx;
                if (src[i] > src[best]) best = i;
              }
            }
            dst[best] += d;
          }
        }
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> adaptive_avg_pool_backward(const Shape& xs, const Tensor<T>& dy) {
  Tensor<T> dx(xs);
  const std::size_t oh = dy.shape().h;
  const std::size_t ow = dy.shape().w;
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t c = 0; c < xs.c; ++c) {
      T* dst = dx.plane(n, c);
      for (std::size_t oy = 0; oy < oh; ++oy) {
        const Bin by = adaptive_bin(oy, xs.h, oh);
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const Bin bx = adaptive_bin(ox, xs.w, ow);
          const T d = dy.at(n, c, oy, ox) / static_cast<T>((by.end - by.begin) * (bx.end - bx.begin));
          for (std::size_t yy = by.begin; yy < by.end; ++yy) {
            for (std::size_t xx = bx.begin; xx < bx.end; ++xx) dst[yy * xs.w + xx] += d;
          }
        }
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> resize_nearest_backward(const Shape& xs, const Tensor<T>& dy) {
  Tensor<T> dx(xs);
  const std::size_t oh = dy.shape().h;
  const std::size_t ow = dy.shape().w;
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t c = 0; c < xs.c; ++c) {
      T* dst = dx.plane(n, c);
      for (std::size_t oy = 0; oy < oh; ++oy) {
        const std::size_t sy = nearest_source(oy, xs.h, oh);
        for (std::size_t ox = 0; ox < ow; ++ox) dst[sy * xs.w + nearest_source(ox, xs.w, ow)] += dy.at(n, c, oy, ox);
      }
    }
  }
  return dx;
}

template <typename T>
ScaleGrads<T> scale_channels_backward(const Tensor<T>& x, const Tensor<T>& s, const Tensor<T>& dy) {
  const Shape& xs = x.shape();
  ScaleGrads<T> g{Tensor<T>(xs), Tensor<T>(s.shape())};
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t c = 0; c < xs.c; ++c) {
      const T a = s.at(n, c, 0, 0);
      const T* xp = x.plane(n, c);
      const T* dp = dy.plane(n, c);
      T* gx = g.dx.plane(n, c);
      T acc = 0;
      for (std::size_t i = 0; i < xs.plane(); ++i) {
        gx[i] = dp[i] * a;
        acc += dp[i] * xp[i];
      }
      g.ds.at(n, c, 0, 0) = acc;
    }
  }
  return g;
}

#define CSLKIT_INSTANTIATE_OPS(T)                                                                            \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, std::size_t, Padding, MacCounter*,          \
                            std::string_view);                                                               \
  template Tensor<T> depthwise_conv2d(const Tensor<T>&, const Tensor<T>&, std::size_t, Padding, MacCounter*, \
                                      std::string_view);                                                     \
  template Tensor<T> pointwise_conv2d(const Tensor<T>&, const Tensor<T>&, MacCounter*, std::string_view);   \
  template Tensor<T> bias_add(const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> channel_affine(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> mish(const Tensor<T>&);                                                                 \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                              \
  template Tensor<T> pool2d(const Tensor<T>&, PoolKind, std::size_t, std::size_t);                           \
  template Tensor<T> adaptive_avg_pool(const Tensor<T>&, std::size_t, std::size_t);                          \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                                      \
  template Tensor<T> resize_nearest(const Tensor<T>&, std::size_t, std::size_t);                             \
  template Tensor<T> concat_channels(std::span<const Tensor<T>* const>);                                     \
  template Tensor<T> concat_channels(const std::vector<Tensor<T>>&);                                         \
  template std::vector<Tensor<T>> split_channels(const Tensor<T>&, std::span<const std::size_t>);            \
  template Tensor<T> add(std::span<const Tensor<T>* const>);                                                 \
  template Tensor<T> add(const std::vector<Tensor<T>>&);                                                     \
  template Tensor<T> scale_channels(const Tensor<T>&, const Tensor<T>&);                                     \
  template ConvGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, std::size_t, Padding,            \
                                        const Tensor<T>&);                                                   \
  template ConvGrads<T> depthwise_conv2d_backward(const Tensor<T>&, const Tensor<T>&, std::size_t, Padding,  \
                                                  const Tensor<T>&);                                         \
  template Tensor<T> bias_add_backward(const Tensor<T>&);                                                    \
  template AffineGrads<T> channel_affine_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> mish_backward(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> sigmoid_backward(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> pool2d_backward(const Tensor<T>&, PoolKind, std::size_t, std::size_t, const Tensor<T>&); \
  template Tensor<T> adaptive_avg_pool_backward(const Shape&, const Tensor<T>&);                             \
  template Tensor<T> resize_nearest_backward(const Shape&, const Tensor<T>&);                                \
  template ScaleGrads<T> scale_channels_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);

CSLKIT_INSTANTIATE_OPS(float)
CSLKIT_INSTANTIATE_OPS(double)

#undef CSLKIT_INSTANTIATE_OPS

}  // namespace csl::ops
