#pragma once

#include <cstdint>
#include <random>

#include "unitbox/tensor.hpp"

namespace unitbox {

// Stateless layer kernels. Every backward is the exact adjoint of its forward.

struct Conv2dParams {
    int stride = 1;
    int pad = 0;
};

/// Cross-correlation. `weights` is out_c x in_c x k x k, `bias` is 1 x out_c x 1 x 1.
Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, Conv2dParams p);

struct Conv2dGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out, Conv2dParams p);

Tensor relu_forward(const Tensor& input);
/// Gates `grad_out` by input > 0; the derivative at exactly 0 is 0.
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

/// Separable bilinear interpolation, corner-aligned: source rows 0 and h-1 land
/// on target rows 0 and out_h-1. Throws std::invalid_argument on downscaling.
Tensor bilinear_upsample_forward(const Tensor& input, int out_h, int out_w);
Tensor bilinear_upsample_backward(const Tensor& grad_out, int in_h, int in_w);

/// Center crop: the offset on each axis is (in - out) / 2, rounded down.
Tensor crop_align_forward(const Tensor& input, int out_h, int out_w);
Tensor crop_align_backward(const Tensor& grad_out, int in_h, int in_w);

/// Zero padding by (top, bottom, left, right).
Tensor pad_forward(const Tensor& input, int top, int bottom, int left, int right);
Tensor pad_backward(const Tensor& grad_out, int top, int bottom, int left, int right);

/// A convolution with owned parameters and accumulated gradients.
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int in_channels, int out_channels, int kernel, Conv2dParams params);

    /// Uniform in +-sqrt(1 / fan_in) for weights and bias.
    void init_uniform(std::mt19937_64& rng);

    Tensor forward(const Tensor& input) const { return conv2d_forward(input, weights_, bias_, params_); }
    /// Accumulates parameter gradients and returns the input gradient.
    Tensor backward(const Tensor& input, const Tensor& grad_out);

    void zero_grad();

    int in_channels() const { return weights_.shape().c; }
    int out_channels() const { return weights_.shape().n; }
    int kernel() const { return weights_.shape().h; }
    const Conv2dParams& params() const { return params_; }

    Tensor& weights() { return weights_; }
    const Tensor& weights() const { return weights_; }
    Tensor& bias() { return bias_; }
    const Tensor& bias() const { return bias_; }
    Tensor& weight_grad() { return weight_grad_; }
    const Tensor& weight_grad() const { return weight_grad_; }
    Tensor& bias_grad() { return bias_grad_; }
    const Tensor& bias_grad() const { return bias_grad_; }

private:
    Conv2dParams params_;
    Tensor weights_;
    Tensor bias_;
    Tensor weight_grad_;
    Tensor bias_grad_;
};

}  // namespace unitbox
