#pragma once

#include <vector>

#include "unitbox/box_geometry.hpp"
#include "unitbox/tensor.hpp"

namespace unitbox {

struct Detection {
    RectBox box;
    double score = 0.0;
    PixelCoord source;
};

using Component = std::vector<PixelCoord>;

struct PostprocessConfig {
    double threshold = 0.5;
    int min_area = 9;
    double nms_iou = 0.3;

    void validate() const;

    friend bool operator==(const PostprocessConfig&, const PostprocessConfig&) = default;
};

/// 4-connected components of {p : conf[p] >= threshold} in raster order of
/// their first pixel, dropping components smaller than `min_area`.
/// `conf` is a 1 x 1 x H x W probability map.
std::vector<Component> threshold_components(const Tensor& conf, double threshold, int min_area = 9);

/// Component pixel nearest to the component's mean coordinate (first in raster order on ties).
PixelCoord component_center(const Component& component);

/// One detection per component, read from the box map (1 x 4 x H x W) at the center pixel.
std::vector<Detection> extract_boxes(const std::vector<Component>& components, const Tensor& conf,
                                     const Tensor& box);

/// Greedy suppression in descending score order; a detection survives iff its
/// IoU with every kept detection is below `iou_threshold`.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold);

/// threshold_components -> extract_boxes -> nms.
std::vector<Detection> detect(const Tensor& conf, const Tensor& box, const PostprocessConfig& cfg);

/// Elementwise sigmoid of a logit map.
Tensor sigmoid_map(const Tensor& logits);

/// Copy of item `n` of a batch, with batch dimension 1.
Tensor batch_item(const Tensor& t, int n);

}  // namespace unitbox
