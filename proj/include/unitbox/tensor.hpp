#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace unitbox {

struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t count() const {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
               static_cast<std::size_t>(w);
    }
    std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
    std::string str() const;

    friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense N x C x H x W array, row-major with W fastest.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    std::size_t index(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }
    double& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
    double at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// Contiguous view of one H x W plane.
    std::span<double> plane(int n, int c) { return {data_.data() + index(n, c, 0, 0), shape_.plane()}; }
    std::span<const double> plane(int n, int c) const {
        return {data_.data() + index(n, c, 0, 0), shape_.plane()};
    }

    void fill(double v);
    bool all_finite() const;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Throws std::invalid_argument naming `what` when shapes differ.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

}  // namespace unitbox
