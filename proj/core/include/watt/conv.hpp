#pragma once

#include "watt/tensor.hpp"

namespace watt {

// 2-D cross-correlation (no kernel flip) over NCHW.
//   x: [N, C_in, H, W]   w: [C_out, C_in/groups, kh, kw]   bias: [C_out] or undefined
// "Same" padding keeps H' = ceil(H/stride) with the extra pad on the
// bottom/right; "valid" uses no padding. Differentiable w.r.t. x, w, bias.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, int stride,
                 Padding padding, int groups = 1);

// conv2d with groups == C_in and C_out == C_in; w: [C, 1, kh, kw].
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                           int stride, Padding padding);

// Window pooling (valid, stride defaults to the window). Max routes its
// gradient to the first maximum in row-major order.
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, int window, int stride = 0);
template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, int window, int stride = 0);

// Global variants reduce H x W to 1 x 1 per channel.
template <typename T> Tensor<T> global_avg_pool(const Tensor<T>& x);
template <typename T> Tensor<T> global_max_pool(const Tensor<T>& x);

// Batch normalization over NCHW channels.
// Training mode normalizes by batch statistics (biased variance) and folds
// them into the running stats with `momentum` (fraction kept); inference
// mode normalizes by the running stats. Running stats carry no gradient.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                     T momentum = T{0.99}, T eps = T{1e-3});

}  // namespace watt
