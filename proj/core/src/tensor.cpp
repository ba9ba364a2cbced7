#include "watt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace watt {

int worker_count() {
  static const int cached = [] {
    if (const char* env = std::getenv("WATT_THREADS")) {
      const long v = std::strtol(env, nullptr, 10);
      if (v >= 1) return static_cast<int>(std::min<long>(v, 256));
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(hw == 0 ? 1 : hw);
  }();
  return cached;
}

namespace {

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (size_t i = 0; i < rank; ++i) {
    const int64_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const int64_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1)
      throw ConfigError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                        " are not broadcast-compatible");
    out[i] = std::max(da, db);
  }
  return out;
}

// Right-aligned strides into `in` for iteration over `out`; 0 on broadcast dims.
std::vector<int64_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<int64_t> strides(out.size(), 0);
  int64_t s = 1;
  for (size_t i = 0; i < in.size(); ++i) {
    const size_t j = in.size() - 1 - i;
    strides[out.size() - 1 - i] = (in[j] == 1 && out[out.size() - 1 - i] != 1) ? 0 : s;
    s *= in[j];
  }
  return strides;
}

int64_t map_index(int64_t idx, const Shape& out, const std::vector<int64_t>& strides) {
  int64_t off = 0;
  for (size_t i = out.size(); i-- > 0;) {
    const int64_t d = out[i];
    off += (idx % d) * strides[i];
    idx /= d;
  }
  return off;
}

template <typename T>
bool recording(const Tensor<T>& out) {
  return out.requires_grad() && Tape<T>::active() != nullptr;
}

// Generic broadcasting binary op with per-element value and partials.
template <typename T, typename FwdFn, typename DaFn, typename DbFn>
Tensor<T> binary_op(const char* name, const Tensor<T>& a, const Tensor<T>& b, FwdFn fwd, DaFn da_fn,
                    DbFn db_fn) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape(), name);
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  out.set_requires_grad(a.requires_grad() || b.requires_grad());
  const int64_t n = out.numel();
  auto* od = out.data().data();

  if (a.shape() == b.shape()) {
    const T* pa = a.data().data();
    const T* pb = b.data().data();
    for (int64_t i = 0; i < n; ++i) od[i] = fwd(pa[i], pb[i]);
    if (recording(out)) {
      Tape<T>::active()->record([=]() mutable {
        auto av = a, bv = b, ov = out;
        const T* go = ov.grad().data();
        const T* xa = av.data().data();
        const T* xb = bv.data().data();
        if (av.requires_grad()) {
          T* ga = av.grad().data();
          for (int64_t i = 0; i < n; ++i) ga[i] += go[i] * da_fn(xa[i], xb[i]);
        }
        if (bv.requires_grad()) {
          T* gb = bv.grad().data();
          for (int64_t i = 0; i < n; ++i) gb[i] += go[i] * db_fn(xa[i], xb[i]);
        }
      });
    }
    return out;
  }

  const auto sa = broadcast_strides(a.shape(), out_shape);
  const auto sb = broadcast_strides(b.shape(), out_shape);
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for (int64_t i = 0; i < n; ++i)
    od[i] = fwd(pa[map_index(i, out_shape, sa)], pb[map_index(i, out_shape, sb)]);
  if (recording(out)) {
    Tape<T>::active()->record([=]() mutable {
      auto av = a, bv = b, ov = out;
      const T* go = ov.grad().data();
      const T* xa = av.data().data();
      const T* xb = bv.data().data();
      T* ga = av.requires_grad() ? av.grad().data() : nullptr;
      T* gb = bv.requires_grad() ? bv.grad().data() : nullptr;
      for (int64_t i = 0; i < n; ++i) {
        const int64_t ia = map_index(i, out_shape, sa);
        const int64_t ib = map_index(i, out_shape, sb);
        if (ga) ga[ia] += go[i] * da_fn(xa[ia], xb[ib]);
        if (gb) gb[ib] += go[i] * db_fn(xa[ia], xb[ib]);
      }
    });
  }
  return out;
}

// Unary op out[i] = f(x[i]), dx[i] += go[i] * dfn(x[i], y[i]).
template <typename T, typename FwdFn, typename DFn>
Tensor<T> unary_op(const Tensor<T>& x, FwdFn fwd, DFn dfn) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  out.set_requires_grad(x.requires_grad());
  const int64_t n = x.numel();
  const T* px = x.data().data();
  T* po = out.data().data();
  for (int64_t i = 0; i < n; ++i) po[i] = fwd(px[i]);
  if (recording(out)) {
    Tape<T>::active()->record([=]() mutable {
      auto xv = x, ov = out;
      const T* go = ov.grad().data();
      const T* vx = xv.data().data();
      const T* vy = ov.data().data();
      T* gx = xv.grad().data();
      for (int64_t i = 0; i < n; ++i) gx[i] += go[i] * dfn(vx[i], vy[i]);
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T{1}; },
      [](T, T) { return T{1}; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T{1}; },
      [](T, T) { return T{-1}; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      "div", a, b, [](T x, T y) { return x / y; }, [](T, T y) { return T{1} / y; },
      [](T x, T y) { return -x / (y * y); });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  return unary_op(a, [s](T x) { return x + s; }, [](T, T) { return T{1}; });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
  return unary_op(a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary_op(x, [](T v) { return v > T{0} ? v : T{0}; },
                  [](T v, T) { return v > T{0} ? T{1} : T{0}; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary_op(x, [](T v) { return T{1} / (T{1} + std::exp(-v)); },
                  [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Tensor<T> log_(const Tensor<T>& x) {
  return unary_op(x, [](T v) { return std::log(v); }, [](T v, T) { return T{1} / v; });
}

template <typename T>
Tensor<T> sqrt_(const Tensor<T>& x) {
  return unary_op(x, [](T v) { return std::sqrt(v); },
                  [](T, T y) { return T{0.5} / y; });
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  return unary_op(x, [lo, hi](T v) { return std::min(std::max(v, lo), hi); },
                  [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T{1} : T{0}; });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const int rank = static_cast<int>(x.rank());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank)
    throw ConfigError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(x.shape()));
  const int64_t n = x.dim(static_cast<size_t>(axis));
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(static_cast<size_t>(i));
  for (int i = axis + 1; i < rank; ++i) inner *= x.dim(static_cast<size_t>(i));

  Tensor<T> out = Tensor<T>::zeros(x.shape());
  out.set_requires_grad(x.requires_grad());
  const T* px = x.data().data();
  T* po = out.data().data();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * n * inner + in;
      T mx = px[base];
      for (int64_t i = 1; i < n; ++i) mx = std::max(mx, px[base + i * inner]);
      T z = T{0};
      for (int64_t i = 0; i < n; ++i) {
        const T e = std::exp(px[base + i * inner] - mx);
        po[base + i * inner] = e;
        z += e;
      }
      for (int64_t i = 0; i < n; ++i) po[base + i * inner] /= z;
    }
  }
  if (recording(out)) {
    Tape<T>::active()->record([=]() mutable {
      auto xv = x, ov = out;
      const T* go = ov.grad().data();
      const T* y = ov.data().data();
      T* gx = xv.grad().data();
      for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
          const int64_t base = o * n * inner + in;
          T dot = T{0};
          for (int64_t i = 0; i < n; ++i) dot += go[base + i * inner] * y[base + i * inner];
          for (int64_t i = 0; i < n; ++i) {
            const int64_t k = base + i * inner;
            gx[k] += y[k] * (go[k] - dot);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ConfigError("matmul: expects 2-D operands, got " + shape_str(a.shape()) + " x " +
                      shape_str(b.shape()));
  const int64_t r = a.dim(0), c = a.dim(1), c2 = b.dim(0), p = b.dim(1);
  if (c != c2)
    throw ConfigError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                      shape_str(b.shape()));
  Tensor<T> out = Tensor<T>::zeros({r, p});
  out.set_requires_grad(a.requires_grad() || b.requires_grad());
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* po = out.data().data();
  for (int64_t i = 0; i < r; ++i)
    for (int64_t k = 0; k < c; ++k) {
      const T av = pa[i * c + k];
      if (av == T{0}) continue;
      for (int64_t j = 0; j < p; ++j) po[i * p + j] += av * pb[k * p + j];
    }
  if (recording(out)) {
    Tape<T>::active()->record([=]() mutable {
      auto av = a, bv = b, ov = out;
      const T* go = ov.grad().data();
      const T* xa = av.data().data();
      const T* xb = bv.data().data();
      if (av.requires_grad()) {
        T* ga = av.grad().data();
        for (int64_t i = 0; i < r; ++i)
          for (int64_t j = 0; j < p; ++j) {
            const T g = go[i * p + j];
            if (g == T{0}) continue;
            for (int64_t k = 0; k < c; ++k) ga[i * c + k] += g * xb[k * p + j];
          }
      }
      if (bv.requires_grad()) {
        T* gb = bv.grad().data();
        for (int64_t i = 0; i < r; ++i)
          for (int64_t k = 0; k < c; ++k) {
            const T x = xa[i * c + k];
            if (x == T{0}) continue;
            for (int64_t j = 0; j < p; ++j) gb[k * p + j] += x * go[i * p + j];
          }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros({1});
  out.set_requires_grad(x.requires_grad());
  T acc = T{0};
  for (T v : x.data()) acc += v;
  out.data()[0] = acc;
  if (recording(out)) {
    Tape<T>::active()->record([=]() mutable {
      auto xv = x, ov = out;
      const T g = ov.grad()[0];
      for (T& gv : xv.grad()) gv += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return mul_scalar(sum(x), T{1} / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> sum_axis(const Tensor<T>& x, int axis) {
  const int rank = static_cast<int>(x.rank());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank)
    throw ConfigError("sum_axis: axis " + std::to_string(axis) + " invalid for " + shape_str(x.shape()));
  Shape out_shape = x.shape();
  const int64_t n = out_shape[static_cast<size_t>(axis)];
  out_shape[static_cast<size_t>(axis)] = 1;
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(static_cast<size_t>(i));
  for (int i = axis + 1; i < rank; ++i) inner *= x.dim(static_cast<size_t>(i));

  Tensor<T> out = Tensor<T>::zeros(out_shape);
  out.set_requires_grad(x.requires_grad());
  const T* px = x.data().data();
  T* po = out.data().data();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t i = 0; i < n; ++i)
      for (int64_t in = 0; in < inner; ++in) po[o * inner + in] += px[(o * n + i) * inner + in];
  if (recording(out)) {
    Tape<T>::active()->record([=]() mutable {
      auto xv = x, ov = out;
      const T* go = ov.grad().data();
      T* gx = xv.grad().data();
      for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < n; ++i)
          for (int64_t in = 0; in < inner; ++in) gx[(o * n + i) * inner + in] += go[o * inner + in];
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (watt::numel(shape) != x.numel())
    throw ConfigError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  Tensor<T> out = Tensor<T>::zeros(std::move(shape));
  out.set_requires_grad(x.requires_grad());
  std::copy(x.data().begin(), x.data().end(), out.data().begin());
  if (recording(out)) {
    Tape<T>::active()->record([=]() mutable {
      auto xv = x, ov = out;
      const T* go = ov.grad().data();
      T* gx = xv.grad().data();
      for (int64_t i = 0; i < xv.numel(); ++i) gx[i] += go[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, int axis) {
  if (a.rank() != b.rank()) throw ConfigError("concat: rank mismatch");
  const int rank = static_cast<int>(a.rank());
  if (axis < 0) axis += rank;
  for (int i = 0; i < rank; ++i)
    if (i != axis && a.dim(static_cast<size_t>(i)) != b.dim(static_cast<size_t>(i)))
      throw ConfigError("concat: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                        " differ off-axis");
  Shape out_shape = a.shape();
  out_shape[static_cast<size_t>(axis)] += b.dim(static_cast<size_t>(axis));
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= a.dim(static_cast<size_t>(i));
  for (int i = axis + 1; i < rank; ++i) inner *= a.dim(static_cast<size_t>(i));
  const int64_t na = a.dim(static_cast<size_t>(axis)), nb = b.dim(static_cast<size_t>(axis));

  Tensor<T> out = Tensor<T>::zeros(out_shape);
  out.set_requires_grad(a.requires_grad() || b.requires_grad());
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* po = out.data().data();
  for (int64_t o = 0; o < outer; ++o) {
    std::copy(pa + o * na * inner, pa + (o + 1) * na * inner, po + o * (na + nb) * inner);
    std::copy(pb + o * nb * inner, pb + (o + 1) * nb * inner,
              po + o * (na + nb) * inner + na * inner);
  }
  if (recording(out)) {
    Tape<T>::active()->record([=]() mutable {
      auto av = a, bv = b, ov = out;
      const T* go = ov.grad().data();
      for (int64_t o = 0; o < outer; ++o) {
        if (av.requires_grad()) {
          T* ga = av.grad().data();
          for (int64_t i = 0; i < na * inner; ++i)
            ga[o * na * inner + i] += go[o * (na + nb) * inner + i];
        }
        if (bv.requires_grad()) {
          T* gb = bv.grad().data();
          for (int64_t i = 0; i < nb * inner; ++i)
            gb[o * nb * inner + i] += go[o * (na + nb) * inner + na * inner + i];
        }
      }
    });
  }
  return out;
}

namespace {
template <typename T>
void check_nchw(const Tensor<T>& x, const char* op) {
  if (x.rank() != 4) throw ConfigError(std::string(op) + ": expects NCHW, got " + shape_str(x.shape()));
}
}  // namespace

template <typename T>
Tensor<T> channel_mean(const Tensor<T>& x) {
  check_nchw(x, "channel_mean");
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> out = Tensor<T>::zeros({n, 1, x.dim(2), x.dim(3)});
  out.set_requires_grad(x.requires_grad());
  const T* px = x.data().data();
  T* po = out.data().data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t i = 0; i < hw; ++i) {
      T acc = T{0};
      for (int64_t ch = 0; ch < c; ++ch) acc += px[(b * c + ch) * hw + i];
      po[b * hw + i] = acc / static_cast<T>(c);
    }
  if (recording(out)) {
    Tape<T>::active()->record([=]() mutable {
      auto xv = x, ov = out;
      const T* go = ov.grad().data();
      T* gx = xv.grad().data();
      const T inv = T{1} / static_cast<T>(c);
      for (int64_t b = 0; b < n; ++b)
        for (int64_t ch = 0; ch < c; ++ch)
          for (int64_t i = 0; i < hw; ++i) gx[(b * c + ch) * hw + i] += go[b * hw + i] * inv;
    });
  }
  return out;
}

template <typename T>
Tensor<T> channel_max(const Tensor<T>& x) {
  check_nchw(x, "channel_max");
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> out = Tensor<T>::zeros({n, 1, x.dim(2), x.dim(3)});
  out.set_requires_grad(x.requires_grad());
  const T* px = x.data().data();
  T* po = out.data().data();
  for (int64_t b = 0; b < n; ++b)
    for (int64_t i = 0; i < hw; ++i) {
      T best = px[b * c * hw + i];
      for (int64_t ch = 1; ch < c; ++ch) best = std::max(best, px[(b * c + ch) * hw + i]);
      po[b * hw + i] = best;
    }
  if (recording(out)) {
    Tape<T>::active()->record([=]() mutable {
      auto xv = x, ov = out;
      const T* go = ov.grad().data();
      const T* px2 = xv.data().data();
      T* gx = xv.grad().data();
      for (int64_t b = 0; b < n; ++b)
        for (int64_t i = 0; i < hw; ++i) {
          int64_t arg = 0;
          T best = px2[b * c * hw + i];
          for (int64_t ch = 1; ch < c; ++ch) {
            const T v = px2[(b * c + ch) * hw + i];
            if (v > best) { best = v; arg = ch; }
          }
          gx[(b * c + arg) * hw + i] += go[b * hw + i];
        }
    });
  }
  return out;
}

#define WATT_INSTANTIATE(T)                                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                    \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                    \
  template Tensor<T> relu(const Tensor<T>&);                             \
  template Tensor<T> sigmoid(const Tensor<T>&);                          \
  template Tensor<T> log_(const Tensor<T>&);                             \
  template Tensor<T> sqrt_(const Tensor<T>&);                            \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                      \
  template Tensor<T> softmax(const Tensor<T>&, int);                     \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> sum(const Tensor<T>&);                              \
  template Tensor<T> mean(const Tensor<T>&);                             \
  template Tensor<T> sum_axis(const Tensor<T>&, int);                    \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                   \
  template Tensor<T> concat(const Tensor<T>&, const Tensor<T>&, int);    \
  template Tensor<T> channel_mean(const Tensor<T>&);                     \
  template Tensor<T> channel_max(const Tensor<T>&);

WATT_INSTANTIATE(float)
WATT_INSTANTIATE(double)
#undef WATT_INSTANTIATE

}  // namespace watt
