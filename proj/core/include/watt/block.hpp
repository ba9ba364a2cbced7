#pragma once

#include "watt/attention.hpp"
#include "watt/nn.hpp"

namespace watt {

// Per-channel gating from globally pooled features through a bottleneck MLP:
// x * sigma(W_ex(relu(W_sq(gap(x))))). Ratio divides the channel count.
template <typename T>
struct SqueezeExcite {
  DenseLayer<T> squeeze;  // [C, C/ratio] + bias
  DenseLayer<T> excite;   // [C/ratio, C] + bias
  int64_t channels = 0;
  int ratio = 4;

  SqueezeExcite() = default;
  SqueezeExcite(int64_t c, int ratio_, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) const;

  void collect(ParamList<T>& out, const std::string& prefix) const {
    squeeze.collect(out, prefix + ".squeeze");
    excite.collect(out, prefix + ".excite");
  }
};

// Wide MBConv: 1x1 expansion to width k*l, 5x5 depthwise, squeeze-excite on
// the widened features, 1x1 projection to the stage's output channels.
// Expansion and depthwise convs are bias-free (BN follows); the projection
// keeps its bias. BN + ReLU wrap every conv (not the SE gate).
template <typename T>
struct WideMBConv {
  Conv2dLayer<T> expand;
  BatchNorm2dLayer<T> bn_expand;
  Conv2dLayer<T> depthwise;
  BatchNorm2dLayer<T> bn_depthwise;
  SqueezeExcite<T> se;
  Conv2dLayer<T> project;
  BatchNorm2dLayer<T> bn_project;
  int64_t in_channels = 0, width = 0, out_channels = 0;
  int stride = 1;

  WideMBConv() = default;
  // width = k * base_filters; se_ratio divides width.
  WideMBConv(int64_t cin, int64_t width_, int64_t cout, int stride_, int se_ratio, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, bool training);

  void collect(ParamList<T>& out, const std::string& prefix) const;
};

// One network stage: wide MBConv, optional channel+spatial attention on its
// output, and an identity skip when the input and output shapes agree
// (channels equal, stride 1).
template <typename T>
struct WattStage {
  WideMBConv<T> block;
  CbamAttention<T> attention;
  bool attention_enabled = false;
  bool skip = false;

  WattStage() = default;
  WattStage(int64_t cin, int64_t width, int64_t cout, int stride, int se_ratio,
            bool with_attention, int attention_reduction, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, bool training);

  void collect(ParamList<T>& out, const std::string& prefix) const;
};

}  // namespace watt
