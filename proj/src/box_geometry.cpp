#include "unitbox/box_geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace unitbox {

double DistanceBox::operator[](std::size_t k) const {
    switch (k) {
        case 0: return top;
        case 1: return bottom;
        case 2: return left;
        case 3: return right;
    }
    throw std::out_of_range("DistanceBox index");
}

double& DistanceBox::operator[](std::size_t k) {
    switch (k) {
        case 0: return top;
        case 1: return bottom;
        case 2: return left;
        case 3: return right;
    }
    throw std::out_of_range("DistanceBox index");
}

RectBox distances_to_rect(PixelCoord anchor, const DistanceBox& d) {
    const double i = anchor.row;
    const double j = anchor.col;
    return {j - d.left, i - d.top, j + d.right, i + d.bottom};
}

DistanceBox rect_to_distances(PixelCoord anchor, const RectBox& rect) {
    const double i = anchor.row;
    const double j = anchor.col;
    return {i - rect.y_min, rect.y_max - i, j - rect.x_min, rect.x_max - j};
}

double box_area(const DistanceBox& d) { return d.height() * d.width(); }

double rect_iou(const RectBox& a, const RectBox& b) {
    const double iw = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
    const double ih = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

}  // namespace unitbox
