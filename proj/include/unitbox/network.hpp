#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unitbox/layers.hpp"
#include "unitbox/tensor.hpp"

namespace unitbox {

/// Shape of the toy two-branch detector. Stage indices are 1-based; stage s
/// has total stride downsample^s.
struct NetworkConfig {
    std::vector<int> stem_channels{8, 16, 32, 32};
    int convs_per_stage = 2;
    int downsample = 2;
    int conf_tap_stage = 1;
    int box_tap_stage = 4;
    int head_kernel = 3;
    /// Initial bias of the four box outputs, in pixels. Keeps the terminal
    /// ReLU alive at start; weights still use fan-in scaling.
    double box_bias_init = 8.0;
    std::uint64_t seed = 1;

    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const;

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

int tap_stride(const NetworkConfig& cfg, int stage);

/// Receptive field, in input pixels, of one output unit of each head.
struct ReceptiveFields {
    int confidence = 0;
    int box = 0;
};
ReceptiveFields receptive_fields(const NetworkConfig& cfg);

struct NetworkOutput {
    Tensor conf_logits;  // N x 1 x H x W
    Tensor box;          // N x 4 x H x W, non-negative
};

/// Named view of one trainable tensor and its gradient.
struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
};

struct NamedTensor {
    std::string name;
    Tensor value;
};

/// Two-branch fully convolutional network. A strided stem feeds a shallow
/// confidence head and a deeper box head; each head is convolved, upsampled
/// back to the input grid and cropped to the image. The box head ends in a ReLU.
class UnitBoxNet {
public:
    explicit UnitBoxNet(NetworkConfig cfg);

    const NetworkConfig& config() const { return cfg_; }

    /// Training forward pass; caches activations for backward().
    NetworkOutput forward(const Tensor& images);
    /// Read-only inference; safe to call concurrently.
    NetworkOutput predict(const Tensor& images) const;

    /// Sign (> 0) of every ReLU input, in evaluation order. Lets finite
    /// difference probes detect that a perturbation crossed a kink.
    std::vector<bool> relu_gates(const Tensor& images) const;

    /// Accumulates parameter gradients from the last forward().
    void backward(const Tensor& grad_conf, const Tensor& grad_box);
    void zero_grad();

    std::vector<ParamRef> parameters();
    std::vector<NamedTensor> export_parameters() const;
    /// Throws std::invalid_argument on missing, extra or misshapen tensors.
    void import_parameters(const std::vector<NamedTensor>& tensors);

    std::size_t parameter_count() const;

private:
    struct Cache {
        int in_h = 0;
        int in_w = 0;
        int pad_top = 0;
        int pad_left = 0;
        Tensor padded;
        std::vector<Tensor> conv_in;   // input of each stem conv
        std::vector<Tensor> conv_pre;  // pre-activation of each stem conv
        Tensor conf_feat;
        Tensor box_pre;
        Tensor box_feat;  // after ReLU
        Tensor conf_up;
        Tensor box_up;
    };

    NetworkOutput run(const Tensor& images, Cache* cache) const;
    int stage_end(int stage) const { return stage * cfg_.convs_per_stage; }

    NetworkConfig cfg_;
    std::vector<Conv2d> stem_;
    Conv2d conf_head_;
    Conv2d box_head_;
    Cache cache_;
    bool has_cache_ = false;
};

}  // namespace unitbox
