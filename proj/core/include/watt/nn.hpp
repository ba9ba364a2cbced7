#pragma once

#include <string>

#include "watt/conv.hpp"
#include "watt/tensor.hpp"

namespace watt {

// One named state tensor of a model. Kind drives the optimizer (only
// trainables step), the regularizer (kernels only) and the summary
// (BN running stats count as non-trainable parameters).
template <typename T>
struct Param {
  std::string name;
  Tensor<T> tensor;
  enum class Kind { Kernel, Bias, BnScale, BnShift, BnStat } kind;
  bool attention = false;

  bool trainable() const { return kind != Kind::BnStat; }
  bool regularized() const { return kind == Kind::Kernel; }
};

template <typename T>
using ParamList = std::vector<Param<T>>;

// He-normal initialization, fan-in convention.
template <typename T>
Tensor<T> he_normal(Shape shape, int64_t fan_in, Rng& rng) {
  const T stddev = static_cast<T>(std::sqrt(2.0 / static_cast<double>(fan_in)));
  Tensor<T> t = Tensor<T>::randn(std::move(shape), rng, stddev);
  t.set_requires_grad(true);
  return t;
}

template <typename T>
struct Conv2dLayer {
  Tensor<T> weight;  // [cout, cin/groups, k, k]
  Tensor<T> bias;    // [cout] or undefined
  int stride = 1;
  Padding padding = Padding::Same;
  int groups = 1;

  Conv2dLayer() = default;
  Conv2dLayer(int64_t cin, int64_t cout, int64_t k, int stride_, Padding pad, bool with_bias,
              int groups_, Rng& rng)
      : stride(stride_), padding(pad), groups(groups_) {
    const int64_t cg = cin / groups_;
    weight = he_normal<T>({cout, cg, k, k}, cg * k * k, rng);
    if (with_bias) {
      bias = Tensor<T>::zeros({cout});
      bias.set_requires_grad(true);
    }
  }

  Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, weight, bias, stride, padding, groups); }

  void collect(ParamList<T>& out, const std::string& prefix, bool attention = false) const {
    out.push_back({prefix + ".weight", weight, Param<T>::Kind::Kernel, attention});
    if (bias.defined()) out.push_back({prefix + ".bias", bias, Param<T>::Kind::Bias, attention});
  }
};

template <typename T>
struct BatchNorm2dLayer {
  Tensor<T> gamma, beta, running_mean, running_var;
  T momentum = T{0.99};
  T eps = T{1e-3};

  BatchNorm2dLayer() = default;
  explicit BatchNorm2dLayer(int64_t c) {
    gamma = Tensor<T>::full({c}, T{1});
    gamma.set_requires_grad(true);
    beta = Tensor<T>::zeros({c});
    beta.set_requires_grad(true);
    running_mean = Tensor<T>::zeros({c});
    running_var = Tensor<T>::full({c}, T{1});
  }

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    return batch_norm(x, gamma, beta, running_mean, running_var, training, momentum, eps);
  }

  void collect(ParamList<T>& out, const std::string& prefix, bool attention = false) const {
    out.push_back({prefix + ".gamma", gamma, Param<T>::Kind::BnScale, attention});
    out.push_back({prefix + ".beta", beta, Param<T>::Kind::BnShift, attention});
    out.push_back({prefix + ".moving_mean", running_mean, Param<T>::Kind::BnStat, attention});
    out.push_back({prefix + ".moving_var", running_var, Param<T>::Kind::BnStat, attention});
  }
};

template <typename T>
struct DenseLayer {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out] or undefined

  DenseLayer() = default;
  DenseLayer(int64_t in, int64_t out, bool with_bias, Rng& rng) {
    weight = he_normal<T>({in, out}, in, rng);
    if (with_bias) {
      bias = Tensor<T>::zeros({out});
      bias.set_requires_grad(true);
    }
  }

  // x: [N, in] -> [N, out]
  Tensor<T> forward(const Tensor<T>& x) const {
    Tensor<T> y = matmul(x, weight);
    if (bias.defined()) y = add(y, reshape(bias, {1, bias.numel()}));
    return y;
  }

  void collect(ParamList<T>& out, const std::string& prefix, bool attention = false) const {
    out.push_back({prefix + ".weight", weight, Param<T>::Kind::Kernel, attention});
    if (bias.defined()) out.push_back({prefix + ".bias", bias, Param<T>::Kind::Bias, attention});
  }
};

}  // namespace watt
