#include "unitbox/postprocess.hpp"

#include <algorithm>
#include <stdexcept>

#include "unitbox/loss_layers.hpp"

namespace unitbox {

void PostprocessConfig::validate() const {
    if (threshold < 0.0 || threshold > 1.0) throw std::invalid_argument("postprocess.threshold: must be in [0, 1]");
    if (min_area < 1) throw std::invalid_argument("postprocess.min_area: must be >= 1");
    if (nms_iou < 0.0 || nms_iou > 1.0) throw std::invalid_argument("postprocess.nms_iou: must be in [0, 1]");
}

std::vector<Component> threshold_components(const Tensor& conf, double threshold, int min_area) {
    const Shape& s = conf.shape();
    if (s.n != 1 || s.c != 1) throw std::invalid_argument("threshold_components: expected 1x1xHxW, got " + s.str());
    if (threshold < 0.0 || threshold > 1.0) throw std::invalid_argument("threshold_components: threshold outside [0, 1]");

    std::vector<char> visited(s.plane(), 0);
    std::vector<Component> out;
    std::vector<PixelCoord> stack;
    const auto above = [&](int i, int j) { return conf.at(0, 0, i, j) >= threshold; };
    for (int i = 0; i < s.h; ++i) {
        for (int j = 0; j < s.w; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i) * s.w + j;
            if (visited[idx] || !above(i, j)) continue;
            Component comp;
            visited[idx] = 1;
            stack.push_back({i, j});
            while (!stack.empty()) {
                const PixelCoord p = stack.back();
                stack.pop_back();
                comp.push_back(p);
                const PixelCoord nbrs[4] = {{p.row - 1, p.col}, {p.row + 1, p.col}, {p.row, p.col - 1}, {p.row, p.col + 1}};
                for (const auto& q : nbrs) {
                    if (q.row < 0 || q.row >= s.h || q.col < 0 || q.col >= s.w) continue;
                    const std::size_t qi = static_cast<std::size_t>(q.row) * s.w + q.col;
                    if (visited[qi] || !above(q.row, q.col)) continue;
                    visited[qi] = 1;
                    stack.push_back(q);
                }
            }
            if (static_cast<int>(comp.size()) < min_area) continue;
            std::sort(comp.begin(), comp.end(),
                      [](const PixelCoord& a, const PixelCoord& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
            out.push_back(std::move(comp));
        }
    }
    return out;
}

PixelCoord component_center(const Component& component) {
    if (component.empty()) throw std::invalid_argument("component_center: empty component");
    double mr = 0.0;
    double mc = 0.0;
    for (const auto& p : component) {
        mr += p.row;
        mc += p.col;
    }
    mr /= static_cast<double>(component.size());
    mc /= static_cast<double>(component.size());
    PixelCoord best = component.front();
    double best_d2 = -1.0;
    for (const auto& p : component) {
        const double d2 = (p.row - mr) * (p.row - mr) + (p.col - mc) * (p.col - mc);
        if (best_d2 < 0.0 || d2 < best_d2) {
            best = p;
            best_d2 = d2;
        }
    }
    return best;
}

std::vector<Detection> extract_boxes(const std::vector<Component>& components, const Tensor& conf,
                                     const Tensor& box) {
    const Shape& s = conf.shape();
    require_same_shape(box.shape(), Shape{1, 4, s.h, s.w}, "extract_boxes(box)");
    std::vector<Detection> out;
    out.reserve(components.size());
    for (const auto& comp : components) {
        const PixelCoord c = component_center(comp);
        const DistanceBox d{box.at(0, 0, c.row, c.col), box.at(0, 1, c.row, c.col), box.at(0, 2, c.row, c.col),
                            box.at(0, 3, c.row, c.col)};
        out.push_back({distances_to_rect(c, d), conf.at(0, 0, c.row, c.col), c});
    }
    return out;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold) {
    if (iou_threshold < 0.0 || iou_threshold > 1.0) throw std::invalid_argument("nms: threshold outside [0, 1]");
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
    std::vector<Detection> kept;
    for (const auto& d : dets) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(),
                                            [&](const Detection& k) { return rect_iou(d.box, k.box) >= iou_threshold; });
        if (!suppressed) kept.push_back(d);
    }
    return kept;
}

std::vector<Detection> detect(const Tensor& conf, const Tensor& box, const PostprocessConfig& cfg) {
    cfg.validate();
    return nms(extract_boxes(threshold_components(conf, cfg.threshold, cfg.min_area), conf, box), cfg.nms_iou);
}

Tensor sigmoid_map(const Tensor& logits) {
    Tensor out(logits.shape());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = sigmoid(logits[i]);
    return out;
}

Tensor batch_item(const Tensor& t, int n) {
    const Shape& s = t.shape();
    if (n < 0 || n >= s.n) throw std::out_of_range("batch_item: index out of range");
    Tensor out({1, s.c, s.h, s.w});
    const auto src = t.data().subspan(t.index(n, 0, 0, 0), out.size());
    std::copy(src.begin(), src.end(), out.data().begin());
    return out;
}

}  // namespace unitbox
