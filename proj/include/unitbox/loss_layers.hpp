#pragma once

#include <cstddef>
#include <string_view>

#include "unitbox/box_geometry.hpp"
#include "unitbox/tensor.hpp"

namespace unitbox {

/// Lower clamp on IoU inside the logarithm and on I in the gradient denominator.
inline constexpr double kIouEpsilon = 1e-6;

/// Intermediate quantities of the IoU loss forward pass at one pixel.
struct IoUForwardRecord {
    double pred_area = 0.0;  // X
    double gt_area = 0.0;    // X~
    double inter_h = 0.0;
    double inter_w = 0.0;
    double inter = 0.0;
    double uni = 0.0;
    double iou = 0.0;
    double loss = 0.0;
};

/// dL/dx for each of the four bounds.
struct BoxGradient {
    double top = 0.0;
    double bottom = 0.0;
    double left = 0.0;
    double right = 0.0;

    double operator[](std::size_t k) const;
    double& operator[](std::size_t k);

    friend bool operator==(const BoxGradient&, const BoxGradient&) = default;
};

/// IoU loss forward at one pixel. An all-zero `gt` marks a pixel outside every
/// object and yields an all-zero record. Throws std::domain_error on negative
/// components or a non-zero but empty `gt`.
IoUForwardRecord iou_forward(const DistanceBox& pred, const DistanceBox& gt);

/// Analytic gradient of the IoU loss. Ties x == x~ contribute nothing to dI/dx;
/// I is clamped to kIouEpsilon in the (U + I) / (U I) factor.
BoxGradient iou_backward(const DistanceBox& pred, const DistanceBox& gt, const IoUForwardRecord& rec);

/// Sum of squared per-bound differences (no 1/2 factor).
double l2_forward(const DistanceBox& pred, const DistanceBox& gt);
BoxGradient l2_backward(const DistanceBox& pred, const DistanceBox& gt);

double sigmoid(double z);
/// Numerically stable sigmoid cross-entropy; `label` must be 0 or 1.
double sigmoid_ce_forward(double logit, double label);
double sigmoid_ce_backward(double logit, double label);

enum class BoxLossKind { iou, l2 };

std::string_view to_string(BoxLossKind kind);
/// Parses "iou" or "l2"; throws std::invalid_argument otherwise.
BoxLossKind parse_box_loss_kind(std::string_view text);

/// Per-pixel losses and gradients of a batch of box maps.
struct PixelLossMaps {
    Tensor loss_map;  // N x 1 x H x W, zero off-mask
    Tensor grad;      // N x 4 x H x W, zero off-mask
    double loss = 0.0;
    std::size_t positives = 0;
};

/// Box loss over N x 4 x H x W maps, restricted to pixels where `mask`
/// (N x 1 x H x W) is positive. The scalar is the mean over positive pixels
/// and the gradient is already divided by the positive count.
PixelLossMaps map_box_loss(const Tensor& pred, const Tensor& gt, const Tensor& mask, BoxLossKind kind);

/// Mean sigmoid cross-entropy over all pixels of N x 1 x H x W logits.
PixelLossMaps map_confidence_loss(const Tensor& logits, const Tensor& labels);

/// Weighted average of the two branch losses: (conf + w_box * box) / (1 + w_box).
double combined_loss(double conf_loss, double box_loss, double w_box);

}  // namespace unitbox
