#include "watt/conv.hpp"

#include <algorithm>
#include <cmath>

namespace watt {

namespace {

struct ConvDims {
  int64_t n, cin, h, w0;
  int64_t cout, cg, kh, kw;
  int64_t oh, ow;
  int64_t pad_top, pad_left;
};

template <typename T>
ConvDims conv_dims(const Tensor<T>& x, const Tensor<T>& w, int stride, Padding padding,
                   int groups) {
  if (x.rank() != 4) throw ConfigError("conv2d: input must be NCHW, got " + shape_str(x.shape()));
  if (w.rank() != 4) throw ConfigError("conv2d: weight must be 4-D, got " + shape_str(w.shape()));
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  ConvDims d;
  d.n = x.dim(0); d.cin = x.dim(1); d.h = x.dim(2); d.w0 = x.dim(3);
  d.cout = w.dim(0); d.cg = w.dim(1); d.kh = w.dim(2); d.kw = w.dim(3);
  if (groups < 1 || d.cin % groups != 0 || d.cout % groups != 0)
    throw ConfigError("conv2d: channels " + std::to_string(d.cin) + "/" + std::to_string(d.cout) +
                      " not divisible by groups " + std::to_string(groups));
  if (d.cg != d.cin / groups)
    throw ConfigError("conv2d: weight expects " + std::to_string(d.cg) +
                      " channels per group, input provides " + std::to_string(d.cin / groups));
  if (padding == Padding::Valid) {
    if (d.kh > d.h || d.kw > d.w0)
      throw ConfigError("conv2d: kernel " + std::to_string(d.kh) + "x" + std::to_string(d.kw) +
                        " larger than input " + std::to_string(d.h) + "x" + std::to_string(d.w0));
    d.oh = (d.h - d.kh) / stride + 1;
    d.ow = (d.w0 - d.kw) / stride + 1;
    d.pad_top = d.pad_left = 0;
  } else {
    d.oh = (d.h + stride - 1) / stride;
    d.ow = (d.w0 + stride - 1) / stride;
    const int64_t pad_h = std::max<int64_t>((d.oh - 1) * stride + d.kh - d.h, 0);
    const int64_t pad_w = std::max<int64_t>((d.ow - 1) * stride + d.kw - d.w0, 0);
    d.pad_top = pad_h / 2;   // extra padding goes bottom/right
    d.pad_left = pad_w / 2;
  }
  return d;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, int stride,
                 Padding padding, int groups) {
  const ConvDims d = conv_dims(x, w, stride, padding, groups);
  if (bias.defined() && bias.numel() != d.cout)
    throw ConfigError("conv2d: bias has " + std::to_string(bias.numel()) + " entries, expected " +
                      std::to_string(d.cout));

  Tensor<T> out = Tensor<T>::zeros({d.n, d.cout, d.oh, d.ow});
  out.set_requires_grad(x.requires_grad() || w.requires_grad() ||
                        (bias.defined() && bias.requires_grad()));

  const int64_t cout_per_g = d.cout / groups;
  const T* px = x.data().data();
  const T* pw = w.data().data();
  const T* pb = bias.defined() ? bias.data().data() : nullptr;
  T* po = out.data().data();

  for (int64_t n = 0; n < d.n; ++n) {
    for (int64_t co = 0; co < d.cout; ++co) {
      const int64_t g = co / cout_per_g;
      for (int64_t oy = 0; oy < d.oh; ++oy) {
        for (int64_t ox = 0; ox < d.ow; ++ox) {
          T acc = pb ? pb[co] : T{0};
          for (int64_t cg = 0; cg < d.cg; ++cg) {
            const int64_t ci = g * d.cg + cg;
            const T* xp = px + ((n * d.cin + ci) * d.h) * d.w0;
            const T* wp = pw + ((co * d.cg + cg) * d.kh) * d.kw;
            for (int64_t ky = 0; ky < d.kh; ++ky) {
              const int64_t iy = oy * stride - d.pad_top + ky;
              if (iy < 0 || iy >= d.h) continue;
              for (int64_t kx = 0; kx < d.kw; ++kx) {
                const int64_t ix = ox * stride - d.pad_left + kx;
                if (ix < 0 || ix >= d.w0) continue;
                acc += xp[iy * d.w0 + ix] * wp[ky * d.kw + kx];
              }
            }
          }
          po[((n * d.cout + co) * d.oh + oy) * d.ow + ox] = acc;
        }
      }
    }
  }

  if (out.requires_grad() && Tape<T>::active()) {
    Tape<T>::active()->record([=]() mutable {
      auto xv = x, wv = w, bv = bias, ov = out;
      const T* go = ov.grad().data();
      const T* px2 = xv.data().data();
      const T* pw2 = wv.data().data();
      T* gx = xv.requires_grad() ? xv.grad().data() : nullptr;
      T* gw = wv.requires_grad() ? wv.grad().data() : nullptr;
      T* gb = (bv.defined() && bv.requires_grad()) ? bv.grad().data() : nullptr;
      for (int64_t n = 0; n < d.n; ++n) {
        for (int64_t co = 0; co < d.cout; ++co) {
          const int64_t g = co / cout_per_g;
          for (int64_t oy = 0; oy < d.oh; ++oy) {
            for (int64_t ox = 0; ox < d.ow; ++ox) {
              const T gout = go[((n * d.cout + co) * d.oh + oy) * d.ow + ox];
              if (gout == T{0}) continue;
              if (gb) gb[co] += gout;
              for (int64_t cg = 0; cg < d.cg; ++cg) {
                const int64_t ci = g * d.cg + cg;
                const int64_t xbase = (n * d.cin + ci) * d.h;
                const int64_t wbase = (co * d.cg + cg) * d.kh;
                for (int64_t ky = 0; ky < d.kh; ++ky) {
                  const int64_t iy = oy * stride - d.pad_top + ky;
                  if (iy < 0 || iy >= d.h) continue;
                  for (int64_t kx = 0; kx < d.kw; ++kx) {
                    const int64_t ix = ox * stride - d.pad_left + kx;
                    if (ix < 0 || ix >= d.w0) continue;
                    const int64_t xi = (xbase + iy) * d.w0 + ix;
                    const int64_t wi = (wbase + ky) * d.kw + kx;
                    if (gx) gx[xi] += gout * pw2[wi];
                    if (gw) gw[wi] += gout * px2[xi];
                  }
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                           int stride, Padding padding) {
  if (x.rank() != 4) throw ConfigError("depthwise_conv2d: input must be NCHW");
  return conv2d(x, w, bias, stride, padding, static_cast<int>(x.dim(1)));
}

namespace {

template <typename T, bool kMax>
Tensor<T> pool2d_impl(const Tensor<T>& x, int window, int stride) {
  if (x.rank() != 4) throw ConfigError("pool2d: input must be NCHW, got " + shape_str(x.shape()));
  if (stride == 0) stride = window;
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w0 = x.dim(3);
  if (window < 1 || window > h || window > w0)
    throw ConfigError("pool2d: window " + std::to_string(window) + " exceeds input " +
                      std::to_string(h) + "x" + std::to_string(w0));
  const int64_t oh = (h - window) / stride + 1;
  const int64_t ow = (w0 - window) / stride + 1;

  Tensor<T> out = Tensor<T>::zeros({n, c, oh, ow});
  out.set_requires_grad(x.requires_grad());
  const T* px = x.data().data();
  T* po = out.data().data();
  const T inv = T{1} / static_cast<T>(window * window);
  for (int64_t b = 0; b < n; ++b)
    for (int64_t ch = 0; ch < c; ++ch) {
      const T* xp = px + (b * c + ch) * h * w0;
      for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < ow; ++ox) {
          T acc = kMax ? xp[oy * stride * w0 + ox * stride] : T{0};
          for (int64_t ky = 0; ky < window; ++ky)
            for (int64_t kx = 0; kx < window; ++kx) {
              const T v = xp[(oy * stride + ky) * w0 + ox * stride + kx];
              if constexpr (kMax) acc = std::max(acc, v);
              else acc += v;
            }
          po[((b * c + ch) * oh + oy) * ow + ox] = kMax ? acc : acc * inv;
        }
    }

  if (out.requires_grad() && Tape<T>::active()) {
    const int s = stride;
    Tape<T>::active()->record([=]() mutable {
      auto xv = x, ov = out;
      const T* go = ov.grad().data();
      const T* px2 = xv.data().data();
      T* gx = xv.grad().data();
      for (int64_t b = 0; b < n; ++b)
        for (int64_t ch = 0; ch < c; ++ch) {
          const int64_t base = (b * c + ch) * h * w0;
          for (int64_t oy = 0; oy < oh; ++oy)
            for (int64_t ox = 0; ox < ow; ++ox) {
              const T g = go[((b * c + ch) * oh + oy) * ow + ox];
              if constexpr (kMax) {
                // first maximum in row-major order takes the gradient
                int64_t best_i = base + oy * s * w0 + ox * s;
                T best = px2[best_i];
                for (int64_t ky = 0; ky < window; ++ky)
                  for (int64_t kx = 0; kx < window; ++kx) {
                    const int64_t i = base + (oy * s + ky) * w0 + ox * s + kx;
                    if (px2[i] > best) { best = px2[i]; best_i = i; }
                  }
                gx[best_i] += g;
              } else {
                for (int64_t ky = 0; ky < window; ++ky)
                  for (int64_t kx = 0; kx < window; ++kx)
                    gx[base + (oy * s + ky) * w0 + ox * s + kx] += g * inv;
              }
            }
        }
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, int window, int stride) {
  return pool2d_impl<T, false>(x, window, stride);
}

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, int window, int stride) {
  return pool2d_impl<T, true>(x, window, stride);
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  if (x.rank() != 4) throw ConfigError("global_avg_pool: input must be NCHW");
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> out = Tensor<T>::zeros({n, c, 1, 1});
  out.set_requires_grad(x.requires_grad());
  const T* px = x.data().data();
  T* po = out.data().data();
  const T inv = T{1} / static_cast<T>(hw);
  for (int64_t i = 0; i < n * c; ++i) {
    T acc = T{0};
    for (int64_t j = 0; j < hw; ++j) acc += px[i * hw + j];
    po[i] = acc * inv;
  }
  if (out.requires_grad() && Tape<T>::active()) {
    Tape<T>::active()->record([=]() mutable {
      auto xv = x, ov = out;
      const T* go = ov.grad().data();
      T* gx = xv.grad().data();
      for (int64_t i = 0; i < n * c; ++i)
        for (int64_t j = 0; j < hw; ++j) gx[i * hw + j] += go[i] * inv;
    });
  }
  return out;
}

template <typename T>
Tensor<T> global_max_pool(const Tensor<T>& x) {
  if (x.rank() != 4) throw ConfigError("global_max_pool: input must be NCHW");
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> out = Tensor<T>::zeros({n, c, 1, 1});
  out.set_requires_grad(x.requires_grad());
  const T* px = x.data().data();
  T* po = out.data().data();
  for (int64_t i = 0; i < n * c; ++i) {
    T best = px[i * hw];
    for (int64_t j = 1; j < hw; ++j) best = std::max(best, px[i * hw + j]);
    po[i] = best;
  }
  if (out.requires_grad() && Tape<T>::active()) {
    Tape<T>::active()->record([=]() mutable {
      auto xv = x, ov = out;
      const T* go = ov.grad().data();
      const T* px2 = xv.data().data();
      T* gx = xv.grad().data();
      for (int64_t i = 0; i < n * c; ++i) {
        int64_t arg = 0;
        T best = px2[i * hw];
        for (int64_t j = 1; j < hw; ++j)
          if (px2[i * hw + j] > best) { best = px2[i * hw + j]; arg = j; }
        gx[i * hw + arg] += go[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, bool training, T momentum,
                     T eps) {
  if (x.rank() != 4) throw ConfigError("batch_norm: input must be NCHW, got " + shape_str(x.shape()));
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (gamma.numel() != c || beta.numel() != c)
    throw ConfigError("batch_norm: gamma/beta length " + std::to_string(gamma.numel()) + "/" +
                      std::to_string(beta.numel()) + " != channels " + std::to_string(c));
  if (training && n * hw == 0) throw ConfigError("batch_norm: zero batch in training mode");

  Tensor<T> out = Tensor<T>::zeros(x.shape());
  out.set_requires_grad(x.requires_grad() || gamma.requires_grad() || beta.requires_grad());
  const T* px = x.data().data();
  const T* pg = gamma.data().data();
  const T* pbeta = beta.data().data();
  T* po = out.data().data();

  std::vector<T> mean_c(static_cast<size_t>(c)), invstd_c(static_cast<size_t>(c));
  const int64_t cnt = n * hw;
  for (int64_t ch = 0; ch < c; ++ch) {
    T m, v;
    if (training) {
      T acc = T{0};
      for (int64_t b = 0; b < n; ++b)
        for (int64_t j = 0; j < hw; ++j) acc += px[(b * c + ch) * hw + j];
      m = acc / static_cast<T>(cnt);
      T acc2 = T{0};
      for (int64_t b = 0; b < n; ++b)
        for (int64_t j = 0; j < hw; ++j) {
          const T dvi = px[(b * c + ch) * hw + j] - m;
          acc2 += dvi * dvi;
        }
      v = acc2 / static_cast<T>(cnt);
      running_mean.data()[ch] = momentum * running_mean.data()[ch] + (T{1} - momentum) * m;
      running_var.data()[ch] = momentum * running_var.data()[ch] + (T{1} - momentum) * v;
    } else {
      m = running_mean.data()[ch];
      v = running_var.data()[ch];
    }
    mean_c[static_cast<size_t>(ch)] = m;
    invstd_c[static_cast<size_t>(ch)] = T{1} / std::sqrt(v + eps);
  }

  for (int64_t b = 0; b < n; ++b)
    for (int64_t ch = 0; ch < c; ++ch) {
      const T m = mean_c[static_cast<size_t>(ch)];
      const T is = invstd_c[static_cast<size_t>(ch)];
      for (int64_t j = 0; j < hw; ++j) {
        const int64_t i = (b * c + ch) * hw + j;
        po[i] = pg[ch] * (px[i] - m) * is + pbeta[ch];
      }
    }

  if (out.requires_grad() && Tape<T>::active()) {
    Tape<T>::active()->record([=, mean_c = std::move(mean_c),
                               invstd_c = std::move(invstd_c)]() mutable {
      auto xv = x, gv = gamma, bv = beta, ov = out;
      const T* go = ov.grad().data();
      const T* px2 = xv.data().data();
      const T* pg2 = gv.data().data();
      T* gx = xv.requires_grad() ? xv.grad().data() : nullptr;
      T* gg = gv.requires_grad() ? gv.grad().data() : nullptr;
      T* gb = bv.requires_grad() ? bv.grad().data() : nullptr;
      for (int64_t ch = 0; ch < c; ++ch) {
        const T m = mean_c[static_cast<size_t>(ch)];
        const T is = invstd_c[static_cast<size_t>(ch)];
        T sum_dy = T{0}, sum_dy_xhat = T{0};
        for (int64_t b = 0; b < n; ++b)
          for (int64_t j = 0; j < hw; ++j) {
            const int64_t i = (b * c + ch) * hw + j;
            sum_dy += go[i];
            sum_dy_xhat += go[i] * (px2[i] - m) * is;
          }
        if (gg) gg[ch] += sum_dy_xhat;
        if (gb) gb[ch] += sum_dy;
        if (gx) {
          if (training) {
            const T scale = pg2[ch] * is / static_cast<T>(cnt);
            for (int64_t b = 0; b < n; ++b)
              for (int64_t j = 0; j < hw; ++j) {
                const int64_t i = (b * c + ch) * hw + j;
                const T xhat = (px2[i] - m) * is;
                gx[i] += scale * (static_cast<T>(cnt) * go[i] - sum_dy - xhat * sum_dy_xhat);
              }
          } else {
            const T scale = pg2[ch] * is;
            for (int64_t b = 0; b < n; ++b)
              for (int64_t j = 0; j < hw; ++j) {
                const int64_t i = (b * c + ch) * hw + j;
                gx[i] += scale * go[i];
              }
          }
        }
      }
    });
  }
  return out;
}

#define WATT_INSTANTIATE(T)                                                                     \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, Padding, \
                            int);                                                               \
  template Tensor<T> depthwise_conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                      int, Padding);                                           \
  template Tensor<T> avg_pool2d(const Tensor<T>&, int, int);                                   \
  template Tensor<T> max_pool2d(const Tensor<T>&, int, int);                                   \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                        \
  template Tensor<T> global_max_pool(const Tensor<T>&);                                        \
  template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                Tensor<T>&, Tensor<T>&, bool, T, T);

WATT_INSTANTIATE(float)
WATT_INSTANTIATE(double)
#undef WATT_INSTANTIATE

}  // namespace watt
