#pragma once

#include "watt/nn.hpp"

namespace watt {

// Per-channel gate from globally pooled features through a shared two-layer
// MLP: sigma(mlp(gap(x)) + mlp(gmp(x))). The same weights serve both pooled
// branches; the hidden layer uses ReLU and a reduction of C/r. No biases.
template <typename T>
struct ChannelAttention {
  Tensor<T> omega0;  // [C, C/r]
  Tensor<T> omega1;  // [C/r, C]
  int64_t channels = 0;
  int reduction = 8;

  ChannelAttention() = default;
  ChannelAttention(int64_t c, int r, Rng& rng);

  // x: [N,C,H,W] -> gate [N,C,1,1]
  Tensor<T> forward(const Tensor<T>& x) const;

  void collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".omega0", omega0, Param<T>::Kind::Kernel, true});
    out.push_back({prefix + ".omega1", omega1, Param<T>::Kind::Kernel, true});
  }
};

// Per-position gate: channelwise mean and max maps concatenated to
// [N,2,H,W], a 7x7 same-padded convolution, then sigmoid.
template <typename T>
struct SpatialAttention {
  Conv2dLayer<T> conv;  // [1,2,7,7] + bias

  SpatialAttention() = default;
  explicit SpatialAttention(Rng& rng);

  // x: [N,C,H,W] -> gate [N,1,H,W]
  Tensor<T> forward(const Tensor<T>& x) const;

  void collect(ParamList<T>& out, const std::string& prefix) const {
    conv.collect(out, prefix + ".conv", /*attention=*/true);
  }
};

// Channel gate then spatial gate, both applied as broadcast elementwise
// products: x'' = Ms(x') * x', x' = Mc(x) * x.
template <typename T>
struct CbamAttention {
  ChannelAttention<T> channel;
  SpatialAttention<T> spatial;

  CbamAttention() = default;
  CbamAttention(int64_t c, int r, Rng& rng) : channel(c, r, rng), spatial(rng) {}

  Tensor<T> forward(const Tensor<T>& x) const;

  void collect(ParamList<T>& out, const std::string& prefix) const {
    channel.collect(out, prefix + ".channel");
    spatial.collect(out, prefix + ".spatial");
  }
};

}  // namespace watt
