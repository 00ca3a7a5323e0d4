#include "unitbox/optimizer.hpp"

#include <cmath>

namespace unitbox {

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("optimizer.learning_rate: must be positive and finite");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("optimizer.momentum: must be in [0, 1)");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
        throw std::invalid_argument("optimizer.weight_decay: must be >= 0");
    }
}

SgdOptimizer::SgdOptimizer(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void SgdOptimizer::step(std::span<const ParamRef> params) {
    if (velocity_.empty()) {
        for (const auto& p : params) velocity_.emplace_back(p.value->shape());
    }
    if (velocity_.size() != params.size()) {
        throw std::invalid_argument("SgdOptimizer: parameter list changed between steps");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const ParamRef& p = params[i];
        require_same_shape(p.value->shape(), velocity_[i].shape(), p.name.c_str());
        require_same_shape(p.grad->shape(), velocity_[i].shape(), p.name.c_str());
        if (!p.grad->all_finite()) {
            throw NonFiniteError("non-finite gradient in '" + p.name + "' at optimizer step " +
                                 std::to_string(iteration_));
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto value = params[i].value->data();
        const auto grad = params[i].grad->data();
        auto vel = velocity_[i].data();
        for (std::size_t k = 0; k < value.size(); ++k) {
            vel[k] = cfg_.momentum * vel[k] - cfg_.learning_rate * (grad[k] + cfg_.weight_decay * value[k]);
            value[k] += vel[k];
        }
    }
    ++iteration_;
}

}  // namespace unitbox
