#pragma once

#include <cstddef>

namespace unitbox {

/// Distances from an anchor pixel to the top, bottom, left and right bounds
/// of a box. Shared by predictions and ground truth.
struct DistanceBox {
    double top = 0.0;
    double bottom = 0.0;
    double left = 0.0;
    double right = 0.0;

    double height() const { return top + bottom; }
    double width() const { return left + right; }
    bool empty() const { return height() == 0.0 || width() == 0.0; }
    bool is_zero() const { return top == 0.0 && bottom == 0.0 && left == 0.0 && right == 0.0; }
    bool non_negative() const { return top >= 0.0 && bottom >= 0.0 && left >= 0.0 && right >= 0.0; }

    DistanceBox scaled(double s) const { return {top * s, bottom * s, left * s, right * s}; }

    double operator[](std::size_t k) const;
    double& operator[](std::size_t k);

    friend bool operator==(const DistanceBox&, const DistanceBox&) = default;
};

/// Absolute axis-aligned box. Pixels are points, so width is x_max - x_min.
struct RectBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    bool valid() const { return x_min <= x_max && y_min <= y_max; }
    double center_x() const { return 0.5 * (x_min + x_max); }
    double center_y() const { return 0.5 * (y_min + y_max); }
    bool contains(double x, double y) const { return x >= x_min && x <= x_max && y >= y_min && y <= y_max; }

    RectBox scaled(double s) const { return {x_min * s, y_min * s, x_max * s, y_max * s}; }

    friend bool operator==(const RectBox&, const RectBox&) = default;
};

/// Pixel location: `row` is i (vertical), `col` is j (horizontal).
struct PixelCoord {
    int row = 0;
    int col = 0;

    friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

RectBox distances_to_rect(PixelCoord anchor, const DistanceBox& d);

/// Distances from `anchor` to the bounds of `rect`. Inverse of distances_to_rect.
DistanceBox rect_to_distances(PixelCoord anchor, const RectBox& rect);

double box_area(const DistanceBox& d);

/// Intersection over union of two rectangles; 0 when the union is empty.
double rect_iou(const RectBox& a, const RectBox& b);

}  // namespace unitbox
