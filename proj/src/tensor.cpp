#include "unitbox/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace unitbox {

std::string Shape::str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
        throw std::invalid_argument("negative tensor dimension: " + shape.str());
    }
    data_.assign(shape.count(), fill);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
    if (!(a == b)) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
    }
}

}  // namespace unitbox
