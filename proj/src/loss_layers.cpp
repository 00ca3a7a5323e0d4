#include "unitbox/loss_layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace unitbox {

double BoxGradient::operator[](std::size_t k) const {
    switch (k) {
        case 0: return top;
        case 1: return bottom;
        case 2: return left;
        case 3: return right;
    }
    throw std::out_of_range("BoxGradient index");
}

double& BoxGradient::operator[](std::size_t k) {
    switch (k) {
        case 0: return top;
        case 1: return bottom;
        case 2: return left;
        case 3: return right;
    }
    throw std::out_of_range("BoxGradient index");
}

IoUForwardRecord iou_forward(const DistanceBox& pred, const DistanceBox& gt) {
    if (!pred.non_negative()) {
        throw std::domain_error("iou_forward: negative predicted distance (missing ReLU?)");
    }
    if (!gt.non_negative()) {
        throw std::domain_error("iou_forward: negative ground-truth distance");
    }
    IoUForwardRecord rec;
    if (gt.is_zero()) return rec;
    if (gt.empty()) {
        throw std::domain_error("iou_forward: ground truth has zero area");
    }

    rec.pred_area = pred.height() * pred.width();
    rec.gt_area = gt.height() * gt.width();
    rec.inter_h = std::min(pred.top, gt.top) + std::min(pred.bottom, gt.bottom);
    rec.inter_w = std::min(pred.left, gt.left) + std::min(pred.right, gt.right);
    rec.inter = rec.inter_h * rec.inter_w;
    rec.uni = rec.pred_area + rec.gt_area - rec.inter;
    rec.iou = rec.inter / rec.uni;
    rec.loss = -std::log(std::max(rec.iou, kIouEpsilon));
    return rec;
}

BoxGradient iou_backward(const DistanceBox& pred, const DistanceBox& gt, const IoUForwardRecord& rec) {
    if (gt.empty()) {
        throw std::domain_error("iou_backward: gradient undefined for empty ground truth");
    }
    // dX/dx
    const double dx_tb = pred.width();
    const double dx_lr = pred.height();
    // dI/dx, strict inequality
    const double di_t = pred.top < gt.top ? rec.inter_w : 0.0;
    const double di_b = pred.bottom < gt.bottom ? rec.inter_w : 0.0;
    const double di_l = pred.left < gt.left ? rec.inter_h : 0.0;
    const double di_r = pred.right < gt.right ? rec.inter_h : 0.0;

    const double u = rec.uni;
    const double i = std::max(rec.inter, kIouEpsilon);
    const double area_term = 1.0 / u;
    const double inter_term = (u + i) / (u * i);

    return {area_term * dx_tb - inter_term * di_t, area_term * dx_tb - inter_term * di_b,
            area_term * dx_lr - inter_term * di_l, area_term * dx_lr - inter_term * di_r};
}

double l2_forward(const DistanceBox& pred, const DistanceBox& gt) {
    double sum = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        const double d = pred[k] - gt[k];
        sum += d * d;
    }
    return sum;
}

BoxGradient l2_backward(const DistanceBox& pred, const DistanceBox& gt) {
    BoxGradient g;
    for (std::size_t k = 0; k < 4; ++k) g[k] = 2.0 * (pred[k] - gt[k]);
    return g;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

void require_binary_label(double label) {
    if (label != 0.0 && label != 1.0) {
        throw std::domain_error("sigmoid cross-entropy label must be 0 or 1, got " + std::to_string(label));
    }
}

}  // namespace

double sigmoid_ce_forward(double logit, double label) {
    require_binary_label(label);
    // max(z, 0) - z y + log(1 + exp(-|z|))
    return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

double sigmoid_ce_backward(double logit, double label) {
    require_binary_label(label);
    return sigmoid(logit) - label;
}

std::string_view to_string(BoxLossKind kind) { return kind == BoxLossKind::iou ? "iou" : "l2"; }

BoxLossKind parse_box_loss_kind(std::string_view text) {
    if (text == "iou") return BoxLossKind::iou;
    if (text == "l2") return BoxLossKind::l2;
    throw std::invalid_argument("unknown loss kind '" + std::string(text) + "' (expected iou or l2)");
}

PixelLossMaps map_box_loss(const Tensor& pred, const Tensor& gt, const Tensor& mask, BoxLossKind kind) {
    const Shape& s = pred.shape();
    require_same_shape(s, gt.shape(), "map_box_loss(pred, gt)");
    if (s.c != 4) throw std::invalid_argument("map_box_loss: expected 4 channels, got " + s.str());
    require_same_shape(mask.shape(), Shape{s.n, 1, s.h, s.w}, "map_box_loss(mask)");

    PixelLossMaps out{Tensor({s.n, 1, s.h, s.w}), Tensor(s), 0.0, 0};
    for (int n = 0; n < s.n; ++n) {
        for (int y = 0; y < s.h; ++y) {
            for (int x = 0; x < s.w; ++x) {
                if (mask.at(n, 0, y, x) > 0.5) ++out.positives;
            }
        }
    }
    if (out.positives == 0) return out;

    const double inv = 1.0 / static_cast<double>(out.positives);
    double sum = 0.0;
    for (int n = 0; n < s.n; ++n) {
        for (int y = 0; y < s.h; ++y) {
            for (int x = 0; x < s.w; ++x) {
                if (mask.at(n, 0, y, x) <= 0.5) continue;
                const DistanceBox p{pred.at(n, 0, y, x), pred.at(n, 1, y, x), pred.at(n, 2, y, x),
                                    pred.at(n, 3, y, x)};
                const DistanceBox g{gt.at(n, 0, y, x), gt.at(n, 1, y, x), gt.at(n, 2, y, x), gt.at(n, 3, y, x)};
                double loss = 0.0;
                BoxGradient grad;
                if (kind == BoxLossKind::iou) {
                    const IoUForwardRecord rec = iou_forward(p, g);
                    loss = rec.loss;
                    grad = iou_backward(p, g, rec);
                } else {
                    loss = l2_forward(p, g);
                    grad = l2_backward(p, g);
                }
                out.loss_map.at(n, 0, y, x) = loss;
                sum += loss;
                for (int k = 0; k < 4; ++k) out.grad.at(n, k, y, x) = grad[static_cast<std::size_t>(k)] * inv;
            }
        }
    }
    out.loss = sum * inv;
    return out;
}

PixelLossMaps map_confidence_loss(const Tensor& logits, const Tensor& labels) {
    const Shape& s = logits.shape();
    require_same_shape(s, labels.shape(), "map_confidence_loss");
    if (s.c != 1) throw std::invalid_argument("map_confidence_loss: expected 1 channel, got " + s.str());

    PixelLossMaps out{Tensor(s), Tensor(s), 0.0, s.count()};
    if (out.positives == 0) return out;
    const double inv = 1.0 / static_cast<double>(s.count());
    double sum = 0.0;
    for (std::size_t i = 0; i < s.count(); ++i) {
        const double loss = sigmoid_ce_forward(logits[i], labels[i]);
        out.loss_map[i] = loss;
        out.grad[i] = sigmoid_ce_backward(logits[i], labels[i]) * inv;
        sum += loss;
    }
    out.loss = sum * inv;
    return out;
}

double combined_loss(double conf_loss, double box_loss, double w_box) {
    if (w_box < 0.0) throw std::invalid_argument("combined_loss: negative branch weight");
    return (conf_loss + w_box * box_loss) / (1.0 + w_box);
}

}  // namespace unitbox
