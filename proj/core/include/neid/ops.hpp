#pragma once

#include <cstdint>
#include <vector>

#include "neid/tensor.hpp"

namespace neid::nn {

/// 3x3 convolution, zero padding 1, stride 1 or 2.
/// Weights are [c_out][c_in][3][3]; bias has c_out entries (may be empty).
template <typename T>
Tensor<T> conv3x3_forward(const Tensor<T>& in, const Tensor<T>& weight,
                          const std::vector<T>& bias, int stride = 1);

/// Gradients of the 3x3 convolution. Any of the outputs may be null.
template <typename T>
void conv3x3_backward(const Tensor<T>& in, const Tensor<T>& weight,
                      const Tensor<T>& grad_out, int stride,
                      Tensor<T>* grad_in, Tensor<T>* grad_weight,
                      std::vector<T>* grad_bias);

/// 2x2 stride-2 transposed convolution (exact x2 upsampling; kernel equals
/// stride so output positions do not overlap). Weights are
/// [c_in][c_out][2][2]; bias has c_out entries.
template <typename T>
Tensor<T> tconv2x2_forward(const Tensor<T>& in, const Tensor<T>& weight,
                           const std::vector<T>& bias);

template <typename T>
void tconv2x2_backward(const Tensor<T>& in, const Tensor<T>& weight,
                       const Tensor<T>& grad_out, Tensor<T>* grad_in,
                       Tensor<T>* grad_weight, std::vector<T>* grad_bias);

/// 2x2 max pooling, stride 2. argmax records the flat in-plane index of the
/// winning element for the backward routing.
template <typename T>
Tensor<T> maxpool2_forward(const Tensor<T>& in, std::vector<std::int32_t>& argmax);

template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& grad_out,
                            const std::vector<std::int32_t>& argmax, int in_h,
                            int in_w);

template <typename T>
Tensor<T> relu(const Tensor<T>& in);

/// grad_in = grad_out where out > 0 else 0 (uses the forward output).
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& out);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& in);

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& grad_out, const Tensor<T>& out);

/// Depth-to-space: out[n, c, y, x] =
/// in[n, c*r^2 + (y mod r)*r + (x mod r), y div r, x div r].
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& in, int r);

/// Space-to-depth inverse of pixel_shuffle (also its backward map).
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& in, int r);

/// Channel concatenation [a | b].
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
void split_channels(const Tensor<T>& grad, int c_a, Tensor<T>& grad_a,
                    Tensor<T>& grad_b);

/// Fully connected layer over N x C x 1 x 1 tensors. Weights are
/// [c_out][c_in] stored as Tensor{c_out, c_in, 1, 1}.
template <typename T>
Tensor<T> linear_forward(const Tensor<T>& in, const Tensor<T>& weight,
                         const std::vector<T>& bias);

template <typename T>
void linear_backward(const Tensor<T>& in, const Tensor<T>& weight,
                     const Tensor<T>& grad_out, Tensor<T>* grad_in,
                     Tensor<T>* grad_weight, std::vector<T>* grad_bias);

/// Spatial mean per (n, c): N x C x H x W -> N x C x 1 x 1.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& in);

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& grad_out, int in_h, int in_w);

/// Convex per-channel blend: out = w * a + (1 - w) * b with w of shape
/// N x C x 1 x 1 broadcast over space.
template <typename T>
Tensor<T> channel_blend(const Tensor<T>& w, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
void channel_blend_backward(const Tensor<T>& w, const Tensor<T>& a,
                            const Tensor<T>& b, const Tensor<T>& grad_out,
                            Tensor<T>& grad_w, Tensor<T>& grad_a,
                            Tensor<T>& grad_b);

/// Unclamped separable bicubic x2 upsampling (Keys kernel, a = -0.5,
/// half-pixel alignment, edge clamp). Linear in the input, so the backward
/// pass scatters with the same weights.
template <typename T>
Tensor<T> bicubic_up2_forward(const Tensor<T>& in);

template <typename T>
Tensor<T> bicubic_up2_backward(const Tensor<T>& grad_out);

}  // namespace neid::nn
