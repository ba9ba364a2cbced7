#include "watt/block.hpp"

namespace watt {

template <typename T>
SqueezeExcite<T>::SqueezeExcite(int64_t c, int ratio_, Rng& rng) : channels(c), ratio(ratio_) {
  if (ratio_ < 1 || c % ratio_ != 0)
    throw ConfigError("squeeze-excite: ratio " + std::to_string(ratio_) +
                      " must divide channels " + std::to_string(c));
  const int64_t hidden = c / ratio_;
  squeeze = DenseLayer<T>(c, hidden, /*with_bias=*/true, rng);
  excite = DenseLayer<T>(hidden, c, /*with_bias=*/true, rng);
}

template <typename T>
Tensor<T> SqueezeExcite<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 4) throw ConfigError("squeeze-excite: input must be NCHW");
  const int64_t n = x.dim(0), c = x.dim(1);
  if (c != channels)
    throw ConfigError("squeeze-excite: input has " + std::to_string(c) +
                      " channels, parameters expect " + std::to_string(channels));
  Tensor<T> pooled = reshape(global_avg_pool(x), {n, c});
  Tensor<T> gate = sigmoid(excite.forward(relu(squeeze.forward(pooled))));
  return mul(x, reshape(gate, {n, c, 1, 1}));
}

template <typename T>
WideMBConv<T>::WideMBConv(int64_t cin, int64_t width_, int64_t cout, int stride_, int se_ratio,
                          Rng& rng)
    : in_channels(cin), width(width_), out_channels(cout), stride(stride_) {
  expand = Conv2dLayer<T>(cin, width_, 1, 1, Padding::Same, /*with_bias=*/false, 1, rng);
  bn_expand = BatchNorm2dLayer<T>(width_);
  depthwise = Conv2dLayer<T>(width_, width_, 5, stride_, Padding::Same, /*with_bias=*/false,
                             static_cast<int>(width_), rng);
  bn_depthwise = BatchNorm2dLayer<T>(width_);
  se = SqueezeExcite<T>(width_, se_ratio, rng);
  project = Conv2dLayer<T>(width_, cout, 1, 1, Padding::Same, /*with_bias=*/true, 1, rng);
  bn_project = BatchNorm2dLayer<T>(cout);
}

template <typename T>
Tensor<T> WideMBConv<T>::forward(const Tensor<T>& x, bool training) {
  if (x.dim(1) != in_channels)
    throw ConfigError("wide mbconv: input has " + std::to_string(x.dim(1)) +
                      " channels, block expects " + std::to_string(in_channels));
  Tensor<T> y = relu(bn_expand.forward(expand.forward(x), training));
  y = relu(bn_depthwise.forward(depthwise.forward(y), training));
  y = se.forward(y);
  return relu(bn_project.forward(project.forward(y), training));
}

template <typename T>
void WideMBConv<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  expand.collect(out, prefix + ".expand");
  bn_expand.collect(out, prefix + ".expand_bn");
  depthwise.collect(out, prefix + ".depthwise");
  bn_depthwise.collect(out, prefix + ".depthwise_bn");
  se.collect(out, prefix + ".se");
  project.collect(out, prefix + ".project");
  bn_project.collect(out, prefix + ".project_bn");
}

template <typename T>
WattStage<T>::WattStage(int64_t cin, int64_t width, int64_t cout, int stride, int se_ratio,
                        bool with_attention, int attention_reduction, Rng& rng)
    : attention_enabled(with_attention), skip(cin == cout && stride == 1) {
  block = WideMBConv<T>(cin, width, cout, stride, se_ratio, rng);
  if (with_attention) attention = CbamAttention<T>(cout, attention_reduction, rng);
}

template <typename T>
Tensor<T> WattStage<T>::forward(const Tensor<T>& x, bool training) {
  Tensor<T> y = block.forward(x, training);
  if (attention_enabled) y = attention.forward(y);
  if (skip) y = add(x, y);
  return y;
}

template <typename T>
void WattStage<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  block.collect(out, prefix);
  if (attention_enabled) attention.collect(out, prefix + ".attention");
}

template struct SqueezeExcite<float>;
template struct SqueezeExcite<double>;
template struct WideMBConv<float>;
template struct WideMBConv<double>;
template struct WattStage<float>;
template struct WattStage<double>;

}  // namespace watt
