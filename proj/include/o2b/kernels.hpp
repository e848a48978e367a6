#pragma once

// Forward and input-gradient kernels for the layer kinds used by the
// AlexNet / VGG / ResNet families. All kernels are pure functions on CHW
// tensors (no batch axis) and are instantiated for float and double.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "o2b/tensor.hpp"

namespace o2b {

struct ConvSpec {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

struct PoolSpec {
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Spatial output size of a sliding window, or 0 when the window does not fit.
std::size_t window_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding) noexcept;

template <typename T>
struct MaxPoolResult {
  Tensor<T> output;
  // Flat (c*H*W + y*W + x) input index of each output cell's maximum.
  std::vector<std::size_t> argmax;
};

// weight is (O, I, k, k); bias is empty or length O.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, std::span<const T> bias,
                         ConvSpec spec, std::string_view layer = "conv2d");

template <typename T>
Tensor<T> conv2d_backward_input(const Tensor<T>& grad_out, const Tensor<T>& weight,
                                const Shape& input_shape, ConvSpec spec,
                                std::string_view layer = "conv2d");

// Ties resolve to the smallest row-major index; padded cells never win.
template <typename T>
MaxPoolResult<T> maxpool2d_forward(const Tensor<T>& input, PoolSpec spec,
                                   std::string_view layer = "maxpool2d");

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out, std::span<const std::size_t> argmax,
                             const Shape& input_shape);

// Padding counts toward the divisor (count_include_pad semantics).
template <typename T>
Tensor<T> avgpool2d_forward(const Tensor<T>& input, PoolSpec spec,
                            std::string_view layer = "avgpool2d");

template <typename T>
Tensor<T> avgpool2d_backward(const Tensor<T>& grad_out, const Shape& input_shape, PoolSpec spec);

// Bin i covers [floor(i*H/out), ceil((i+1)*H/out)).
template <typename T>
Tensor<T> adaptive_avgpool2d_forward(const Tensor<T>& input, std::size_t out_h, std::size_t out_w);

template <typename T>
Tensor<T> adaptive_avgpool2d_backward(const Tensor<T>& grad_out, const Shape& input_shape);

// weight is (out, in) row-major; input is rank 1.
template <typename T>
Tensor<T> linear_forward(const Tensor<T>& input, const Tensor<T>& weight, std::span<const T> bias,
                         std::string_view layer = "linear");

template <typename T>
Tensor<T> linear_backward_input(const Tensor<T>& grad_out, const Tensor<T>& weight,
                                std::string_view layer = "linear");

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input);

// saved is the forward input; gradient at exactly 0 is 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& saved_input);

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& input);

// saved is the forward output s; returns grad * s * (1 - s).
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& grad_out, const Tensor<T>& saved_output);

// Folded inference batchnorm: scale[c] * x + shift[c].
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& input, std::span<const T> scale,
                            std::span<const T> shift, std::string_view layer = "batchnorm2d");

template <typename T>
Tensor<T> batchnorm_backward(const Tensor<T>& grad_out, std::span<const T> scale);

template <typename T>
Tensor<T> add_forward(const Tensor<T>& a, const Tensor<T>& b, std::string_view layer = "add");

/// Bilinear resize of a CHW tensor with half-pixel centres:
/// src = (i + 0.5) * in / out - 0.5, clamped to [0, in - 1].
template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& input, std::size_t out_h, std::size_t out_w);

template <typename T>
Tensor<T> zero_channels(const Tensor<T>& input, std::span<const std::size_t> channels);

}  // namespace o2b
