#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "unitbox/gradcheck.hpp"
#include "unitbox/loss_layers.hpp"

using namespace unitbox;

namespace {

DistanceBox random_box(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    return {u(rng), u(rng), u(rng), u(rng)};
}

std::vector<double> as_vector(const DistanceBox& d) { return {d.top, d.bottom, d.left, d.right}; }

double iou_loss_at(std::span<const double> p, const DistanceBox& gt) {
    return iou_forward({p[0], p[1], p[2], p[3]}, gt).loss;
}

}  // namespace

TEST(IouForward, PerfectMatch) {
    const auto r = iou_forward({2, 2, 2, 2}, {2, 2, 2, 2});
    EXPECT_EQ(r.iou, 1.0);
    EXPECT_EQ(r.loss, 0.0);
}

TEST(IouForward, ZeroGroundTruthGivesZeroLoss) {
    EXPECT_EQ(iou_forward({3, 1, 4, 1}, {0, 0, 0, 0}).loss, 0.0);
    EXPECT_EQ(iou_forward({0, 0, 0, 0}, {0, 0, 0, 0}).loss, 0.0);
}

TEST(IouForward, NestedBoxes) {
    const auto r = iou_forward({1, 1, 1, 1}, {2, 2, 2, 2});
    EXPECT_EQ(r.pred_area, 4.0);
    EXPECT_EQ(r.gt_area, 16.0);
    EXPECT_EQ(r.inter, 4.0);
    EXPECT_EQ(r.uni, 16.0);
    EXPECT_DOUBLE_EQ(r.iou, 0.25);
    EXPECT_NEAR(r.loss, std::log(4.0), 1e-12);
    EXPECT_NEAR(r.loss, 1.386294, 1e-6);
}

TEST(IouForward, RejectsInvalidInputs) {
    EXPECT_THROW(iou_forward({-1, 1, 1, 1}, {2, 2, 2, 2}), std::domain_error);
    EXPECT_THROW(iou_forward({1, 1, 1, 1}, {2, 2, 0, 0}), std::domain_error);
}

TEST(IouForward, DisjointPredictionIsClamped) {
    const auto r = iou_forward({0, 0, 0, 0}, {2, 2, 2, 2});
    EXPECT_EQ(r.iou, 0.0);
    EXPECT_NEAR(r.loss, -std::log(kIouEpsilon), 1e-9);
    const BoxGradient g = iou_backward({0, 0, 0, 0}, {2, 2, 2, 2}, r);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_TRUE(std::isfinite(g[k]));
}

TEST(IouForward, MatchesRectangleOracle) {
    std::mt19937_64 rng(2024);
    for (int k = 0; k < 10000; ++k) {
        const DistanceBox pred = random_box(rng, 0.0, 20.0);
        const DistanceBox gt = random_box(rng, 0.01, 20.0);
        const PixelCoord anchor{17, -4};
        const double oracle = rect_iou(distances_to_rect(anchor, pred), distances_to_rect(anchor, gt));
        EXPECT_NEAR(iou_forward(pred, gt).iou, oracle, 1e-9);
    }
}

TEST(IouForward, ScaleInvariantLoss) {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 1000; ++k) {
        const DistanceBox pred = random_box(rng, 0.1, 10.0);
        const DistanceBox gt = random_box(rng, 0.1, 10.0);
        const double base = iou_forward(pred, gt).loss;
        for (double s : {0.5, 2.0, 10.0}) EXPECT_NEAR(iou_forward(pred.scaled(s), gt.scaled(s)).loss, base, 1e-9);
    }
}

TEST(IouForward, LossIsNonNegative) {
    std::mt19937_64 rng(8);
    for (int k = 0; k < 1000; ++k) EXPECT_GE(iou_forward(random_box(rng, 0, 10), random_box(rng, 0.1, 10)).loss, 0.0);
}

TEST(IouBackward, NestedBoxesWorkedValue) {
    const DistanceBox pred{1, 1, 1, 1}, gt{2, 2, 2, 2};
    const BoxGradient g = iou_backward(pred, gt, iou_forward(pred, gt));
    // frozen from central differences of the forward pass
    const auto fd = central_difference([&](std::span<const double> p) { return iou_loss_at(p, gt); },
                                       as_vector(pred), 1e-5);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_NEAR(g[k], -0.5, 1e-12);
        EXPECT_NEAR(fd[k], -0.5, 1e-8);
    }
}

TEST(IouBackward, TieUsesStrictInequality) {
    // with x == gt everywhere dI/dx vanishes and only the area term remains: 4 / 16
    const DistanceBox b{2, 2, 2, 2};
    const BoxGradient g = iou_backward(b, b, iou_forward(b, b));
    for (std::size_t k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(g[k], 0.25);
}

TEST(IouBackward, GradientScalesInverselyWithBoxes) {
    std::mt19937_64 rng(9);
    for (int k = 0; k < 200; ++k) {
        const DistanceBox pred = random_box(rng, 0.2, 10.0);
        const DistanceBox gt = random_box(rng, 0.2, 10.0);
        const BoxGradient g = iou_backward(pred, gt, iou_forward(pred, gt));
        for (double s : {0.5, 2.0, 10.0}) {
            const DistanceBox ps = pred.scaled(s), gs = gt.scaled(s);
            const BoxGradient gsc = iou_backward(ps, gs, iou_forward(ps, gs));
            for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(gsc[c], g[c] / s, 1e-9 * (1 + std::abs(g[c])));
        }
    }
}

TEST(IouBackward, StepAlongNegativeGradientLowersLoss) {
    const DistanceBox pred{1, 1, 1, 1}, gt{2, 2, 2, 2};
    const auto rec = iou_forward(pred, gt);
    const BoxGradient g = iou_backward(pred, gt, rec);
    DistanceBox next;
    for (std::size_t k = 0; k < 4; ++k) next[k] = pred[k] - 1e-2 * g[k];
    EXPECT_LT(iou_forward(next, gt).loss, rec.loss);

    std::mt19937_64 rng(4);
    for (int k = 0; k < 200; ++k) {
        const DistanceBox p = random_box(rng, 0.5, 10.0);
        const DistanceBox t = random_box(rng, 0.5, 10.0);
        const auto r = iou_forward(p, t);
        const BoxGradient gr = iou_backward(p, t, r);
        DistanceBox q;
        for (std::size_t c = 0; c < 4; ++c) q[c] = p[c] - 1e-4 * gr[c];
        EXPECT_LE(iou_forward(q, t).loss, r.loss);
    }
}

TEST(IouBackward, ComponentsAreCoupledUnlikeL2) {
    const DistanceBox gt{4, 4, 4, 4};
    // left moves past the ground-truth bound, so I_w and X change differently
    const DistanceBox a{2, 3, 1, 5};
    DistanceBox b = a;
    b.left = 6;
    EXPECT_NE(iou_backward(a, gt, iou_forward(a, gt)).top, iou_backward(b, gt, iou_forward(b, gt)).top);
    EXPECT_EQ(l2_backward(a, gt).top, l2_backward(b, gt).top);
}

TEST(L2, ForwardExamples) {
    EXPECT_EQ(l2_forward({1, 2, 3, 4}, {1, 2, 3, 4}), 0.0);
    EXPECT_EQ(l2_forward({1, 1, 1, 1}, {2, 2, 2, 2}), 4.0);
    EXPECT_EQ(l2_forward({2, 2, 2, 2}, {4, 4, 4, 4}), 16.0);
}

TEST(L2, ScalesQuadratically) {
    std::mt19937_64 rng(6);
    for (int k = 0; k < 1000; ++k) {
        const DistanceBox p = random_box(rng, 0, 10), t = random_box(rng, 0, 10);
        for (double s : {0.5, 2.0, 10.0}) {
            EXPECT_NEAR(l2_forward(p.scaled(s), t.scaled(s)), s * s * l2_forward(p, t), 1e-9 * s * s * (1 + l2_forward(p, t)));
        }
    }
}

TEST(L2, BackwardMatchesFiniteDifferences) {
    EXPECT_EQ(l2_backward({1, 1, 1, 1}, {2, 2, 2, 2}), (BoxGradient{-2, -2, -2, -2}));
    EXPECT_EQ(l2_backward({3, 3, 3, 3}, {3, 3, 3, 3}), (BoxGradient{0, 0, 0, 0}));
    std::mt19937_64 rng(10);
    for (int k = 0; k < 100; ++k) {
        const DistanceBox p = random_box(rng, 0, 10), t = random_box(rng, 0, 10);
        const auto fd = central_difference(
            [&](std::span<const double> x) { return l2_forward({x[0], x[1], x[2], x[3]}, t); }, as_vector(p), 1e-3);
        const BoxGradient g = l2_backward(p, t);
        for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(g[c], fd[c], 1e-6);
    }
}

TEST(SigmoidCe, Examples) {
    EXPECT_NEAR(sigmoid_ce_forward(0, 1), std::log(2.0), 1e-12);
    EXPECT_NEAR(sigmoid_ce_backward(0, 1), -0.5, 1e-12);
    EXPECT_NEAR(sigmoid_ce_forward(50, 1), 0.0, 1e-12);
    EXPECT_NEAR(sigmoid_ce_backward(50, 1), 0.0, 1e-12);
    // naive formula is accurate at moderate logits
    const double s = 1.0 / (1.0 + std::exp(3.0));
    EXPECT_NEAR(sigmoid_ce_forward(-3, 0), -std::log(1.0 - s), 1e-12);
    EXPECT_NEAR(sigmoid_ce_forward(-3, 0), 0.048587, 1e-6);
    EXPECT_NEAR(sigmoid_ce_backward(-3, 0), s, 1e-12);
    EXPECT_NEAR(sigmoid_ce_backward(-3, 0), 0.047426, 1e-6);
}

TEST(SigmoidCe, StableAtExtremeLogits) {
    EXPECT_NEAR(sigmoid_ce_forward(-800, 1), 800.0, 1e-9);
    EXPECT_NEAR(sigmoid_ce_forward(800, 0), 800.0, 1e-9);
    EXPECT_NEAR(sigmoid_ce_backward(-800, 1), -1.0, 1e-12);
    EXPECT_THROW(sigmoid_ce_forward(0, 0.5), std::domain_error);
}

TEST(SigmoidCe, BackwardMatchesFiniteDifferences) {
    for (double z : {-6.0, -1.3, 0.2, 2.5, 7.0}) {
        for (double y : {0.0, 1.0}) {
            const double fd = (sigmoid_ce_forward(z + 1e-5, y) - sigmoid_ce_forward(z - 1e-5, y)) / 2e-5;
            EXPECT_NEAR(sigmoid_ce_backward(z, y), fd, 1e-8);
        }
    }
}

namespace {

struct Maps {
    Tensor pred{Shape{1, 4, 3, 3}};
    Tensor gt{Shape{1, 4, 3, 3}};
    Tensor mask{Shape{1, 1, 3, 3}};

    void set(int i, int j, DistanceBox p, DistanceBox g) {
        for (int c = 0; c < 4; ++c) {
            pred.at(0, c, i, j) = p[static_cast<std::size_t>(c)];
            gt.at(0, c, i, j) = g[static_cast<std::size_t>(c)];
        }
        mask.at(0, 0, i, j) = 1.0;
    }
};

}  // namespace

TEST(MapBoxLoss, EmptyMaskGivesZero) {
    Maps m;
    m.pred.fill(3.0);
    for (auto kind : {BoxLossKind::iou, BoxLossKind::l2}) {
        const auto r = map_box_loss(m.pred, m.gt, m.mask, kind);
        EXPECT_EQ(r.loss, 0.0);
        EXPECT_EQ(r.positives, 0u);
        for (double g : r.grad.data()) EXPECT_EQ(g, 0.0);
    }
}

TEST(MapBoxLoss, SinglePositivePixel) {
    Maps m;
    m.set(1, 2, {1, 1, 1, 1}, {2, 2, 2, 2});
    const auto r = map_box_loss(m.pred, m.gt, m.mask, BoxLossKind::iou);
    EXPECT_NEAR(r.loss, std::log(4.0), 1e-12);
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(r.grad.at(0, c, 1, 2), -0.5, 1e-12);
}

TEST(MapBoxLoss, MeanReductionOverPositives) {
    Maps m;
    m.set(0, 0, {1, 1, 1, 1}, {2, 2, 2, 2});
    m.set(2, 1, {1, 1, 1, 1}, {2, 2, 2, 2});
    const auto r = map_box_loss(m.pred, m.gt, m.mask, BoxLossKind::iou);
    EXPECT_NEAR(r.loss, std::log(4.0), 1e-12);
    EXPECT_NEAR(r.grad.at(0, 0, 0, 0), -0.25, 1e-12);
    EXPECT_NEAR(r.grad.at(0, 3, 2, 1), -0.25, 1e-12);
}

TEST(MapBoxLoss, GradientVanishesOffMask) {
    std::mt19937_64 rng(12);
    Maps m;
    std::uniform_real_distribution<double> u(0.5, 5.0);
    for (double& v : m.pred.data()) v = u(rng);
    for (double& v : m.gt.data()) v = u(rng);
    m.mask.at(0, 0, 1, 1) = 1.0;
    m.mask.at(0, 0, 0, 2) = 1.0;
    for (auto kind : {BoxLossKind::iou, BoxLossKind::l2}) {
        const auto r = map_box_loss(m.pred, m.gt, m.mask, kind);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                if (m.mask.at(0, 0, i, j) > 0) continue;
                for (int c = 0; c < 4; ++c) EXPECT_EQ(r.grad.at(0, c, i, j), 0.0);
            }
        }
    }
}

TEST(MapBoxLoss, GradientMatchesFiniteDifferencesOfScalar) {
    std::mt19937_64 rng(13);
    Maps m;
    std::uniform_real_distribution<double> u(0.5, 5.0);
    for (double& v : m.pred.data()) v = u(rng);
    for (double& v : m.gt.data()) v = u(rng);
    m.mask.at(0, 0, 0, 0) = m.mask.at(0, 0, 1, 2) = m.mask.at(0, 0, 2, 2) = 1.0;
    for (auto kind : {BoxLossKind::iou, BoxLossKind::l2}) {
        const auto r = map_box_loss(m.pred, m.gt, m.mask, kind);
        for (std::size_t i = 0; i < m.pred.data().size(); ++i) {
            Tensor p = m.pred;
            p.data()[i] += 1e-4;
            const double up = map_box_loss(p, m.gt, m.mask, kind).loss;
            p.data()[i] -= 2e-4;
            const double down = map_box_loss(p, m.gt, m.mask, kind).loss;
            EXPECT_NEAR(r.grad.data()[i], (up - down) / 2e-4, 1e-6);
        }
    }
}

TEST(MapConfidenceLoss, MeanOverAllPixels) {
    Tensor logits(Shape{1, 1, 2, 2});
    Tensor labels(Shape{1, 1, 2, 2});
    labels.at(0, 0, 0, 0) = 1.0;
    const auto r = map_confidence_loss(logits, labels);
    EXPECT_NEAR(r.loss, std::log(2.0), 1e-12);
    EXPECT_NEAR(r.grad.at(0, 0, 0, 0), -0.5 / 4, 1e-12);
    EXPECT_NEAR(r.grad.at(0, 0, 1, 1), 0.5 / 4, 1e-12);
}

TEST(CombinedLoss, WeightedAverage) {
    EXPECT_NEAR(combined_loss(0.6, 1.0, 1.0), 0.8, 1e-12);
    EXPECT_EQ(combined_loss(0.6, 1.0, 0.0), 0.6);
    for (double w : {0.0, 0.5, 3.0}) EXPECT_NEAR(combined_loss(0.7, 0.7, w), 0.7, 1e-12);
}

TEST(BoxLossKind, ParseRoundTrip) {
    EXPECT_EQ(parse_box_loss_kind("iou"), BoxLossKind::iou);
    EXPECT_EQ(parse_box_loss_kind(to_string(BoxLossKind::l2)), BoxLossKind::l2);
    EXPECT_THROW(parse_box_loss_kind("smooth_l1"), std::invalid_argument);
}
