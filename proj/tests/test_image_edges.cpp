#include "lampdet/image_edges.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>
#include <sstream>

using namespace lampdet;

namespace
{
GrayImage vertical_step(int w, int h, int step_x)
{
    GrayImage img(w, h, 40.0f);
    for (int y = 0; y < h; ++y)
        for (int x = step_x; x < w; ++x)
            img.at(x, y) = 200.0f;
    return img;
}

GrayImage rectangles()
{
    GrayImage img(120, 90, 30.0f);
    const auto fill = [&](int x0, int y0, int x1, int y1, float v) {
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x)
                img.at(x, y) = v;
    };
    fill(10, 10, 70, 30, 180.0f);
    fill(80, 20, 110, 80, 120.0f);
    fill(20, 45, 50, 75, 220.0f);
    return img;
}

// Quarter turn: (x, y) -> (h - 1 - y, x).
GrayImage rotate90(const GrayImage& src)
{
    GrayImage out(src.height, src.width);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            out.at(src.height - 1 - y, x) = src.at(x, y);
    return out;
}

double orientation_distance(double a, double b)
{
    const double d = std::fmod(std::abs(a - b), std::numbers::pi);
    return std::min(d, std::numbers::pi - d);
}
} // namespace

TEST(DetectSegments, ConstantImageIsEmpty)
{
    EXPECT_TRUE(detect_segments(GrayImage(64, 48, 100.0f)).empty());
}

TEST(DetectSegments, VerticalStepEdge)
{
    const auto segs = detect_segments(vertical_step(80, 101, 40));
    ASSERT_EQ(segs.size(), 1u);
    const Segment2D& s = segs[0];
    EXPECT_NEAR(s.orientation, std::numbers::pi / 2, 0.05);
    const Eigen::Vector2d top(39.5, 0.0), bottom(39.5, 100.0);
    const Eigen::Vector2d lo = s.end_a.y() < s.end_b.y() ? s.end_a : s.end_b;
    const Eigen::Vector2d hi = s.end_a.y() < s.end_b.y() ? s.end_b : s.end_a;
    EXPECT_LT((lo - top).norm(), 2.0);
    EXPECT_LT((hi - bottom).norm(), 2.0);
}

TEST(DetectSegments, RotationEquivariance)
{
    const GrayImage img = rectangles();
    const auto a = detect_segments(img);
    const auto b = detect_segments(rotate90(img));
    ASSERT_FALSE(a.empty());
    ASSERT_EQ(a.size(), b.size());
    std::vector<double> oa, ob;
    for (const auto& s : a)
        oa.push_back(std::fmod(s.orientation + std::numbers::pi / 2, std::numbers::pi));
    for (const auto& s : b)
        ob.push_back(s.orientation);
    // Match each rotated orientation to an unused original one.
    std::vector<bool> used(ob.size(), false);
    for (double o : oa) {
        std::size_t best = ob.size();
        for (std::size_t j = 0; j < ob.size(); ++j)
            if (!used[j] && (best == ob.size() || orientation_distance(o, ob[j]) < orientation_distance(o, ob[best])))
                best = j;
        ASSERT_LT(best, ob.size());
        used[best] = true;
        EXPECT_LT(orientation_distance(o, ob[best]), 0.05);
    }
}

TEST(DetectSegments, IntensityOffsetInvariant)
{
    GrayImage img = rectangles();
    const auto a = detect_segments(img);
    for (float& v : img.intensity)
        v += 25.0f;
    const auto b = detect_segments(img);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_LT((a[i].end_a - b[i].end_a).norm(), 1e-9);
        EXPECT_LT((a[i].end_b - b[i].end_b).norm(), 1e-9);
    }
}

TEST(DetectSegments, DeterministicAndInvariantHolds)
{
    const auto a = detect_segments(rectangles());
    const auto b = detect_segments(rectangles());
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].end_a, b[i].end_a);
        const Eigen::Vector2d d = a[i].end_b - a[i].end_a;
        EXPECT_NEAR(a[i].orientation, fold_orientation(std::atan2(d.y(), d.x())), 1e-6);
        EXPECT_GE(a[i].orientation, 0.0);
        EXPECT_LT(a[i].orientation, std::numbers::pi);
        EXPECT_GE(a[i].length(), 5.0);
    }
}

TEST(DetectSegments, MinLengthFilters)
{
    DetectorConfig cfg;
    cfg.min_length = 200.0;
    EXPECT_TRUE(detect_segments(rectangles(), cfg).empty());
}

TEST(DetectorConfig, Validation)
{
    DetectorConfig cfg;
    cfg.tau = 95.0;
    EXPECT_THROW(RegionGrowingDetector{cfg}, InvalidArgument);
    cfg = {};
    cfg.min_length = 0.5;
    EXPECT_THROW(RegionGrowingDetector{cfg}, InvalidArgument);
}

TEST(PyramidDown, HalvesAndPreservesConstant)
{
    const GrayImage half = pyramid_down(GrayImage(63, 40, 77.0f));
    EXPECT_EQ(half.width, 32);
    EXPECT_EQ(half.height, 20);
    for (float v : half.intensity)
        EXPECT_NEAR(v, 77.0f, 1e-4);
}

TEST(Pgm, RoundTrip)
{
    GrayImage img(5, 3);
    for (std::size_t i = 0; i < img.intensity.size(); ++i)
        img.intensity[i] = static_cast<float>(i * 17 % 256);
    std::stringstream ss;
    save_pgm(ss, img);
    const GrayImage back = load_pgm(ss);
    EXPECT_EQ(back.width, 5);
    EXPECT_EQ(back.height, 3);
    EXPECT_EQ(back.intensity, img.intensity);
}

TEST(Pgm, RejectsAsciiAndTruncated)
{
    std::istringstream ascii("P2\n2 2\n255\n0 0 0 0\n");
    EXPECT_THROW(load_pgm(ascii), ParseError);
    std::istringstream truncated(std::string("P5\n4 4\n255\n") + std::string(5, 'x'));
    EXPECT_THROW(load_pgm(truncated), ParseError);
}

TEST(SegmentsCsv, RoundTrip)
{
    const std::vector<Segment2D> segs{Segment2D::between({1.5, 2}, {10, 20.25}), Segment2D::between({0, 0}, {-3, 4})};
    std::stringstream ss;
    write_segments_csv(ss, segs);
    const auto back = read_segments_csv(ss);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_LT((back[0].end_b - segs[0].end_b).norm(), 1e-9);
    EXPECT_NEAR(back[1].orientation, segs[1].orientation, 1e-12);
}

TEST(SegmentsCsv, BadLineReportsLineNumber)
{
    std::istringstream in("x1,y1,x2,y2\n1,2,3,4\n1,2,x,4\n");
    try {
        read_segments_csv(in);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3);
    }
}
