#include "watt/attention.hpp"

namespace watt {

template <typename T>
ChannelAttention<T>::ChannelAttention(int64_t c, int r, Rng& rng) : channels(c), reduction(r) {
  if (r < 1 || c % r != 0)
    throw ConfigError("channel attention: reduction " + std::to_string(r) +
                      " must divide channels " + std::to_string(c));
  const int64_t hidden = c / r;
  omega0 = he_normal<T>({c, hidden}, c, rng);
  omega1 = he_normal<T>({hidden, c}, hidden, rng);
}

template <typename T>
Tensor<T> ChannelAttention<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 4) throw ConfigError("channel attention: input must be NCHW");
  const int64_t n = x.dim(0), c = x.dim(1);
  if (c != channels)
    throw ConfigError("channel attention: input has " + std::to_string(c) +
                      " channels, parameters expect " + std::to_string(channels));
  auto branch = [&](const Tensor<T>& pooled) {
    Tensor<T> v = reshape(pooled, {n, c});
    return matmul(relu(matmul(v, omega0)), omega1);
  };
  Tensor<T> gate = sigmoid(add(branch(global_avg_pool(x)), branch(global_max_pool(x))));
  return reshape(gate, {n, c, 1, 1});
}

template <typename T>
SpatialAttention<T>::SpatialAttention(Rng& rng) {
  conv = Conv2dLayer<T>(2, 1, 7, 1, Padding::Same, /*with_bias=*/true, 1, rng);
}

template <typename T>
Tensor<T> SpatialAttention<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 4) throw ConfigError("spatial attention: input must be NCHW");
  Tensor<T> maps = concat(channel_mean(x), channel_max(x), 1);
  return sigmoid(conv.forward(maps));
}

template <typename T>
Tensor<T> CbamAttention<T>::forward(const Tensor<T>& x) const {
  Tensor<T> gated = mul(x, channel.forward(x));
  return mul(gated, spatial.forward(gated));
}

template struct ChannelAttention<float>;
template struct ChannelAttention<double>;
template struct SpatialAttention<float>;
template struct SpatialAttention<double>;
template struct CbamAttention<float>;
template struct CbamAttention<double>;

}  // namespace watt
