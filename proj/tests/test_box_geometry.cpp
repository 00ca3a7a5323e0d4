#include <gtest/gtest.h>

#include <random>

#include "unitbox/box_geometry.hpp"

using namespace unitbox;

TEST(DistancesToRect, ZeroDistancesGiveDegenerateBox) {
    EXPECT_EQ(distances_to_rect({10, 10}, {0, 0, 0, 0}), (RectBox{10, 10, 10, 10}));
}

TEST(DistancesToRect, SymmetricExpansion) {
    EXPECT_EQ(distances_to_rect({10, 10}, {2, 2, 2, 2}), (RectBox{8, 8, 12, 12}));
}

TEST(DistancesToRect, AsymmetricDistances) {
    // row 5, col 7; x spans col - left .. col + right, y spans row - top .. row + bottom
    EXPECT_EQ(distances_to_rect({5, 7}, {1, 3, 2, 4}), (RectBox{5, 4, 11, 8}));
}

TEST(DistancesToRect, RoundTripThroughRectToDistances) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 20.0);
    std::uniform_int_distribution<int> p(-5, 40);
    for (int k = 0; k < 200; ++k) {
        const PixelCoord a{p(rng), p(rng)};
        const DistanceBox d{u(rng), u(rng), u(rng), u(rng)};
        const RectBox r = distances_to_rect(a, d);
        EXPECT_NEAR(r.area(), box_area(d), 1e-12 * box_area(d));
        const DistanceBox back = rect_to_distances(a, r);
        for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(back[i], d[i], 1e-12);
    }
}

TEST(BoxArea, Examples) {
    EXPECT_EQ(box_area({0, 0, 0, 0}), 0.0);
    EXPECT_EQ(box_area({1, 1, 1, 1}), 4.0);
    EXPECT_EQ(box_area({2, 2, 2, 2}), 16.0);
}

TEST(RectIou, IdenticalAndDisjoint) {
    EXPECT_EQ(rect_iou({0, 0, 4, 4}, {0, 0, 4, 4}), 1.0);
    EXPECT_EQ(rect_iou({0, 0, 4, 4}, {10, 10, 12, 12}), 0.0);
}

TEST(RectIou, NestedBoxesAtSharedAnchor) {
    const RectBox pred = distances_to_rect({0, 0}, {1, 1, 1, 1});
    const RectBox gt = distances_to_rect({0, 0}, {2, 2, 2, 2});
    EXPECT_DOUBLE_EQ(rect_iou(pred, gt), 4.0 / 16.0);
}

TEST(RectIou, ZeroAreaPairIsZeroNotNan) {
    EXPECT_EQ(rect_iou({3, 3, 3, 3}, {3, 3, 3, 3}), 0.0);
    EXPECT_EQ(rect_iou({0, 0, 0, 5}, {0, 0, 0, 5}), 0.0);
}

TEST(RectIou, HandComputedPartialOverlap) {
    // intersection 2 x 2 = 4, union 16 + 16 - 4 = 28
    EXPECT_DOUBLE_EQ(rect_iou({0, 0, 4, 4}, {2, 2, 6, 6}), 4.0 / 28.0);
}

TEST(RectIou, SymmetricAndScaleInvariant) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 30.0);
    for (int k = 0; k < 500; ++k) {
        const double x0 = u(rng), y0 = u(rng), x1 = u(rng), y1 = u(rng);
        const RectBox a{x0, y0, x0 + u(rng), y0 + u(rng)};
        const RectBox b{x1, y1, x1 + u(rng), y1 + u(rng)};
        const double iou = rect_iou(a, b);
        EXPECT_GE(iou, 0.0);
        EXPECT_LE(iou, 1.0);
        EXPECT_DOUBLE_EQ(iou, rect_iou(b, a));
        for (double s : {0.5, 2.0, 10.0}) EXPECT_NEAR(rect_iou(a.scaled(s), b.scaled(s)), iou, 1e-12);
    }
}
