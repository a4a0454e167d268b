#include <gtest/gtest.h>

#include "craq/imaging.hpp"
#include "test_util.hpp"

using namespace craq;
using craq::testing::mask_from;

namespace {

// Naive O(N r^2) closing with the digital disk; pixels outside the image are
// ignored.
GrayImage naive_closing(const GrayImage& img, int r) {
    auto pass = [&](const GrayImage& in, bool dilate) {
        GrayImage out(in.width, in.height);
        for (int y = 0; y < in.height; ++y)
            for (int x = 0; x < in.width; ++x) {
                double v = dilate ? -1e300 : 1e300;
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        if (dx * dx + dy * dy > r * r || !in.contains(x + dx, y + dy)) continue;
                        v = dilate ? std::max(v, in.at(x + dx, y + dy)) : std::min(v, in.at(x + dx, y + dy));
                    }
                out.at(x, y) = v;
            }
        return out;
    };
    return pass(pass(img, true), false);
}

GrayImage random_image(std::mt19937_64& rng, int w, int h) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    GrayImage img(w, h);
    for (auto& v : img.data) v = u(rng);
    return img;
}

}  // namespace

TEST(BottomHat, ConstantImageGivesZero) {
    const GrayImage img(40, 30, 0.5);
    for (int r : {1, 3, 7}) {
        const auto out = bottom_hat(img, r);
        for (double v : out.data) EXPECT_EQ(v, 0.0);
    }
}

TEST(BottomHat, ThinDarkLineMatchesNaiveClosing) {
    GrayImage img(41, 41, 1.0);
    for (int x = 0; x < 41; ++x) img.at(x, 20) = 0.0;
    const auto out = bottom_hat(img, 5);
    const auto closed = naive_closing(img, 5);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            EXPECT_NEAR(out.at(x, y), closed.at(x, y) - img.at(x, y), 1e-15);
            EXPECT_NEAR(out.at(x, y), y == 20 ? 1.0 : 0.0, 1e-15);
        }
}

TEST(BottomHat, BrightDotIsSuppressed) {
    GrayImage img(21, 21, 0.1);
    img.at(10, 10) = 0.9;
    const auto out = bottom_hat(img, 3);
    EXPECT_EQ(out.at(10, 10), 0.0);
}

TEST(BottomHat, RandomImagesMatchNaiveOracle) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        const auto img = random_image(rng, 23 + trial, 17 + 2 * trial);
        const int r = 1 + trial;
        const auto out = bottom_hat(img, r);
        const auto closed = naive_closing(img, r);
        for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(out.data[i], closed.data[i] - img.data[i], 1e-15);
    }
}

TEST(BottomHat, NonNegativeAndShiftInvariant) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        auto img = random_image(rng, 32, 24);
        for (auto& v : img.data) v *= 0.5;
        const auto a = bottom_hat(img, 4);
        auto shifted = img;
        for (auto& v : shifted.data) v += 0.25;
        const auto b = bottom_hat(shifted, 4);
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_GE(a.data[i], 0.0);
            EXPECT_NEAR(a.data[i], b.data[i], 1e-12);
        }
    }
}

TEST(BottomHat, RejectsEmptyInput) {
    try {
        bottom_hat(GrayImage{}, 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "empty input");
    }
}

TEST(AdaptiveThreshold, ZeroImageIsEmpty) {
    const auto m = adaptive_threshold(GrayImage(20, 20, 0.0), 5, 0.15);
    EXPECT_EQ(m.count(), 0u);
}

TEST(AdaptiveThreshold, SinglePeakIsTheOnlyHit) {
    GrayImage img(9, 9, 0.0);
    img.at(4, 3) = 1.0;
    const auto m = adaptive_threshold(img, 3, 0.1);
    EXPECT_EQ(m.count(), 1u);
    EXPECT_TRUE(m.at(4, 3));
}

TEST(AdaptiveThreshold, UniformImageIsEmpty) {
    for (double v : {0.0, 0.2, 0.7, 1.0}) EXPECT_EQ(adaptive_threshold(GrayImage(15, 11, v), 7, 0.15).count(), 0u);
}

TEST(AdaptiveThreshold, WindowLargerThanImageThrows) {
    EXPECT_THROW(adaptive_threshold(GrayImage(5, 7, 0.1), 9, 0.1), Error);
    EXPECT_NO_THROW(adaptive_threshold(GrayImage(5, 9, 0.1), 9, 0.1));
    EXPECT_THROW(adaptive_threshold(GrayImage(5, 7, 0.1), 4, 0.1), Error);
}

TEST(AdaptiveThreshold, MatchesDirectWindowMean) {
    std::mt19937_64 rng(3);
    const auto img = random_image(rng, 37, 29);
    const int window = 7, half = 3;
    const double s = 0.15;
    const auto m = adaptive_threshold(img, window, s);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double sum = 0;
            int n = 0;
            for (int yy = std::max(0, y - half); yy <= std::min(img.height - 1, y + half); ++yy)
                for (int xx = std::max(0, x - half); xx <= std::min(img.width - 1, x + half); ++xx) {
                    sum += img.at(xx, yy);
                    ++n;
                }
            EXPECT_EQ(m.at(x, y), img.at(x, y) > (1 + s) * sum / n) << x << "," << y;
        }
}

TEST(AdaptiveThreshold, CommutesWithHorizontalFlip) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        const auto img = random_image(rng, 40, 30);
        EXPECT_EQ(flip_horizontal(adaptive_threshold(img, 9, 0.1)), adaptive_threshold(flip_horizontal(img), 9, 0.1));
    }
}

TEST(AreaClean, DropsSmallComponents) {
    BinaryMask m(40, 20);
    for (int x = 0; x < 3; ++x) m.set(1 + x, 1, true);
    for (int y = 5; y < 10; ++y)
        for (int x = 10; x < 20; ++x) m.set(x, y, true);
    const auto out = area_clean(m, 10);
    EXPECT_EQ(out.count(), 50u);
    EXPECT_FALSE(out.at(1, 1));
    EXPECT_TRUE(out.at(10, 5));
}

TEST(AreaClean, ZeroAreaIsIdentity) {
    std::mt19937_64 rng(1);
    const auto m = craq::testing::random_blobs(rng, 30, 30);
    EXPECT_EQ(area_clean(m, 0), m);
}

TEST(AreaClean, MatchesUnionFindOracleAndIsIdempotent) {
    std::mt19937_64 rng(21);
    std::bernoulli_distribution coin(0.35);
    for (int trial = 0; trial < 20; ++trial) {
        BinaryMask m(31, 27);
        for (auto& v : m.data) v = coin(rng) ? 1 : 0;
        const int min_area = 1 + trial % 8;
        const auto out = area_clean(m, min_area);
        std::vector<int> root;
        const auto sizes = craq::testing::components_uf(m, &root);
        for (std::size_t i = 0; i < m.size(); ++i) {
            const bool keep = m.data[i] && sizes.at(root[i]) >= min_area;
            EXPECT_EQ(out.data[i] != 0, keep);
            EXPECT_TRUE(!out.data[i] || m.data[i]);
        }
        EXPECT_EQ(area_clean(out, min_area), out);
    }
}

TEST(Skeletonize, WideBarBecomesOnePixelLine) {
    BinaryMask m(40, 15);
    for (int y = 5; y < 10; ++y)
        for (int x = 5; x < 35; ++x) m.set(x, y, true);
    const auto s = skeletonize(m);
    std::set<int> rows;
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x)
            if (s.at(x, y)) rows.insert(y);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(*rows.begin(), 7);
    EXPECT_GE(s.count(), 24u);
    EXPECT_EQ(craq::testing::components_uf(s).size(), 1u);
}

TEST(Skeletonize, AnnulusKeepsItsHole) {
    BinaryMask m(30, 30);
    for (int y = 5; y < 25; ++y)
        for (int x = 5; x < 25; ++x)
            if (x < 9 || x >= 21 || y < 9 || y >= 21) m.set(x, y, true);
    const auto s = skeletonize(m);
    EXPECT_EQ(craq::testing::count_holes(s), 1);
    EXPECT_EQ(craq::testing::components_uf(s).size(), 1u);
    EXPECT_FALSE(has_reducible_block(s));
    for (int y = 0; y + 1 < s.height; ++y)
        for (int x = 0; x + 1 < s.width; ++x)
            EXPECT_FALSE(s.at(x, y) && s.at(x + 1, y) && s.at(x, y + 1) && s.at(x + 1, y + 1));
}

TEST(Skeletonize, PreservesTopologyOnRandomBlobs) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const auto m = craq::testing::random_blobs(rng, 48, 40);
        const auto s = skeletonize(m);
        EXPECT_EQ(craq::testing::components_uf(s).size(), craq::testing::components_uf(m).size());
        EXPECT_EQ(craq::testing::count_holes(s), craq::testing::count_holes(m));
        EXPECT_FALSE(has_reducible_block(s));
        EXPECT_EQ(skeletonize(s), s);
        for (std::size_t i = 0; i < s.size(); ++i) EXPECT_TRUE(!s.data[i] || m.data[i]);
    }
}

TEST(Skeletonize, IrreducibleCrossingBlockSurvives) {
    // Two diagonals crossing at an even offset leave a 2x2 core that no
    // single deletion can remove without cutting a branch.
    const auto m = mask_from({
        "#....#",
        ".#..#.",
        "..##..",
        "..##..",
        ".#..#.",
        "#....#",
    });
    const auto s = skeletonize(m);
    EXPECT_EQ(s, m);
    EXPECT_FALSE(has_reducible_block(s));
}

TEST(Segment, RecoversDarkStrokes) {
    GrayImage img(80, 60, 0.8);
    for (int x = 5; x < 75; ++x)
        for (int dy = -1; dy <= 1; ++dy) img.at(x, 30 + dy) = 0.2;
    const auto mask = segment(img, {});
    EXPECT_GE(mask.count(), 150u);
    for (int x = 10; x < 70; ++x) EXPECT_TRUE(mask.at(x, 30));
    EXPECT_FALSE(mask.at(40, 10));
}
