#include <gtest/gtest.h>

#include "craq/topology.hpp"
#include "test_util.hpp"

using namespace craq;
using craq::testing::draw_line;

namespace {

CrackGraph star(int arms, int len = 12) {
    BinaryMask m(4 * len, 4 * len);
    const Pixel c{2 * len, 2 * len};
    for (int k = 0; k < arms; ++k) {
        const double a = 2 * kPi * k / arms + 0.1;
        draw_line(m, c, {c.x + static_cast<int>(std::lround(len * std::cos(a))), c.y + static_cast<int>(std::lround(len * std::sin(a)))});
    }
    return merge_close_nodes(extract_graph(skeletonize(m)), 3);
}

std::map<NodeType, int> histogram(const NodeTypeMap& t) {
    std::map<NodeType, int> h;
    for (auto& [id, ty] : t) ++h[ty];
    return h;
}

}  // namespace

TEST(ClassifyNodes, Cross) {
    auto h = histogram(classify_nodes(star(4)));
    EXPECT_EQ(h[NodeType::X], 1);
    EXPECT_EQ(h[NodeType::O], 4);
    EXPECT_EQ(h[NodeType::Y], 0);
}

TEST(ClassifyNodes, Tee) {
    BinaryMask m(40, 40);
    draw_line(m, {5, 10}, {34, 10});
    draw_line(m, {20, 10}, {20, 30});
    auto h = histogram(classify_nodes(extract_graph(m)));
    EXPECT_EQ(h[NodeType::Y], 1);
    EXPECT_EQ(h[NodeType::O], 3);
}

TEST(ClassifyNodes, SixWayStarFoldsIntoX) {
    auto h = histogram(classify_nodes(star(6, 16)));
    EXPECT_EQ(h[NodeType::X], 1);
    EXPECT_EQ(h[NodeType::O], 6);
}

TEST(ClassifyNodes, LoopAnchorsAreExcluded) {
    CrackGraph g;
    g.width = g.height = 10;
    Node n;
    n.artificial = true;
    n.degree = 2;
    g.nodes.push_back(n);
    EXPECT_TRUE(classify_nodes(g).empty());
    EXPECT_FALSE(node_type(2).has_value());
    EXPECT_EQ(node_type(7), NodeType::X);
}

TEST(TernaryCoords, Fractions) {
    const auto t = ternary_coords({{0, NodeType::O}, {1, NodeType::O}, {2, NodeType::Y}});
    EXPECT_DOUBLE_EQ(t.n_o, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(t.n_y, 1.0 / 3.0);
    EXPECT_EQ(t.n_x, 0.0);
    const auto x = ternary_coords({{0, NodeType::X}, {5, NodeType::X}});
    EXPECT_EQ(x.n_x, 1.0);
    EXPECT_THROW(ternary_coords({}), Error);
}

TEST(TernaryCoords, SumToOne) {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> u(0, 2), n(1, 500);
    for (int trial = 0; trial < 1000; ++trial) {
        NodeTypeMap m;
        const int k = n(rng);
        for (int i = 0; i < k; ++i) m[i] = static_cast<NodeType>(u(rng));
        EXPECT_TRUE(ternary_coords(m).valid(1e-12));
    }
}

TEST(TernaryChart, BarycentricPlacement) {
    const ChartLayout l;
    EXPECT_EQ(l.place({1, 0, 0}), l.vertex_o);
    EXPECT_EQ(l.place({0, 1, 0}), l.vertex_y);
    EXPECT_EQ(l.place({0, 0, 1}), l.vertex_x);
    const Vec2 c = l.place({1.0 / 3, 1.0 / 3, 1.0 / 3});
    EXPECT_NEAR(c.x, (l.vertex_o.x + l.vertex_y.x + l.vertex_x.x) / 3, 1e-9);
    EXPECT_NEAR(c.y, (l.vertex_o.y + l.vertex_y.y + l.vertex_x.y) / 3, 1e-9);
    // The real-painting mean sits low, between the O and Y corners.
    const Vec2 mean = l.place({0.343, 0.592, 0.065});
    const double height = l.vertex_o.y - l.vertex_x.y;
    EXPECT_LT(l.vertex_o.y - mean.y, 0.1 * height);
    EXPECT_GT(mean.x, l.vertex_o.x);
    EXPECT_LT(mean.x, l.vertex_y.x);
}

TEST(TernaryChart, RendersPointsAndDensity) {
    std::vector<ChartPoint> pts;
    for (int i = 0; i < 25; ++i) pts.push_back({{0.3, 0.6, 0.1}, "p" + std::to_string(i)});
    const auto svg = render_ternary_chart(pts);
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("id=\"density\""), std::string::npos);
    EXPECT_EQ(std::count(svg.begin(), svg.end(), '\n') > 25, true);
    pts.resize(3);
    EXPECT_EQ(render_ternary_chart(pts).find("id=\"density\""), std::string::npos);
    EXPECT_THROW(render_ternary_chart({{{0.5, 0.6, 0.1}, "bad"}}), Error);
    EXPECT_THROW(write_ternary_chart("/nonexistent-dir/x.svg", pts), Error);
}
