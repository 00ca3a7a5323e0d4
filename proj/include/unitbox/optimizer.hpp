#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "unitbox/network.hpp"
#include "unitbox/tensor.hpp"

namespace unitbox {

struct OptimizerConfig {
    double learning_rate = 1e-3;
    double momentum = 0.9;
    double weight_decay = 0.0002;

    void validate() const;

    friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

/// Raised when a gradient or parameter stops being finite.
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Momentum SGD with L2 weight decay:
///   v <- momentum * v - lr * (g + weight_decay * p);  p <- p + v
class SgdOptimizer {
public:
    explicit SgdOptimizer(OptimizerConfig cfg);

    /// Velocity buffers are created on the first step and must keep their shapes.
    void step(std::span<const ParamRef> params);

    const OptimizerConfig& config() const { return cfg_; }
    std::uint64_t iteration() const { return iteration_; }
    const std::vector<Tensor>& velocities() const { return velocity_; }

private:
    OptimizerConfig cfg_;
    std::vector<Tensor> velocity_;
    std::uint64_t iteration_ = 0;
};

}  // namespace unitbox
