#include <gtest/gtest.h>

#include "craq/graph.hpp"
#include "test_util.hpp"

using namespace craq;
using craq::testing::draw_line;

namespace {

BinaryMask plus_sign(int arm) {
    BinaryMask m(2 * arm + 11, 2 * arm + 11);
    const int c = arm + 5;
    draw_line(m, {c - arm, c}, {c + arm, c});
    draw_line(m, {c, c - arm}, {c, c + arm});
    return m;
}

std::vector<int> degrees(const CrackGraph& g) {
    std::vector<int> d;
    for (const auto& n : g.nodes) d.push_back(n.degree);
    std::sort(d.begin(), d.end());
    return d;
}

void check_structure(const CrackGraph& g) {
    int ends = 0;
    for (const auto& e : g.edges) {
        ends += (e.u != kNoNode) + (e.v != kNoNode);
        for (std::size_t i = 1; i < e.chain.size(); ++i) EXPECT_TRUE(adjacent8(e.chain[i - 1], e.chain[i]));
        if (e.u != kNoNode) EXPECT_EQ(e.chain.front(), g.nodes[static_cast<std::size_t>(e.u)].pos());
        if (e.v != kNoNode) EXPECT_EQ(e.chain.back(), g.nodes[static_cast<std::size_t>(e.v)].pos());
    }
    int sum = 0;
    for (const auto& n : g.nodes) sum += n.degree;
    EXPECT_EQ(sum, ends);
    std::set<Pixel> node_px;
    for (const auto& n : g.nodes) EXPECT_TRUE(node_px.insert(n.pos()).second);
}

}  // namespace

TEST(ExtractGraph, PlusSign) {
    const auto g = extract_graph(plus_sign(10));
    ASSERT_EQ(g.nodes.size(), 5u);
    ASSERT_EQ(g.edges.size(), 4u);
    EXPECT_EQ(degrees(g), (std::vector<int>{1, 1, 1, 1, 4}));
    for (const auto& e : g.edges) EXPECT_DOUBLE_EQ(polyline_length(e.chain), 10.0);
    check_structure(g);
}

TEST(ExtractGraph, StraightLine) {
    BinaryMask m(30, 10);
    draw_line(m, {3, 5}, {22, 5});
    const auto g = extract_graph(m);
    ASSERT_EQ(g.nodes.size(), 2u);
    ASSERT_EQ(g.edges.size(), 1u);
    EXPECT_EQ(g.edges[0].chain.size(), 20u);
    EXPECT_EQ(degrees(g), (std::vector<int>{1, 1}));
}

TEST(ExtractGraph, ClosedLoopGetsAnchor) {
    BinaryMask m(20, 20);
    draw_line(m, {5, 5}, {14, 5});
    draw_line(m, {14, 5}, {14, 14});
    draw_line(m, {14, 14}, {5, 14});
    draw_line(m, {5, 14}, {5, 5});
    const auto g = extract_graph(skeletonize(m));
    ASSERT_EQ(g.nodes.size(), 1u);
    ASSERT_EQ(g.edges.size(), 1u);
    EXPECT_TRUE(g.nodes[0].artificial);
    EXPECT_EQ(g.nodes[0].degree, 2);
    EXPECT_TRUE(g.edges[0].self_loop());
    EXPECT_EQ(g.edges[0].chain.front(), g.edges[0].chain.back());
}

TEST(ExtractGraph, RejectsThickInput) {
    BinaryMask m(10, 10);
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 6; ++x) m.set(x, y, true);
    try {
        extract_graph(m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "skeleton not thin");
    }
}

TEST(ExtractGraph, FourConnectedStaircaseIsOneEdge) {
    const auto m = craq::testing::mask_from({
        "..........",
        ".##.......",
        "..##......",
        "...##.....",
        "....##....",
        "..........",
    });
    const auto g = extract_graph(m);
    EXPECT_EQ(g.nodes.size(), 2u);
    EXPECT_EQ(g.edges.size(), 1u);
}

TEST(ExtractGraph, MatchesCrossingNumberOracleOnRandomSkeletons) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const auto skel = craq::testing::random_skeleton(rng, 64, 56);
        const auto g = extract_graph(skel);
        const auto o = craq::testing::crossing_number_oracle(skel);
        EXPECT_EQ(static_cast<int>(g.nodes.size()), o.nodes) << trial;
        EXPECT_EQ(static_cast<int>(g.edges.size()), o.edges) << trial;
        EXPECT_EQ(degrees(g), o.degrees) << trial;
        check_structure(g);

        // Every skeleton pixel belongs to exactly one node or one chain interior.
        std::map<Pixel, int> owner;
        for (const auto& n : g.nodes)
            for (auto p : n.pixels) ++owner[p];
        std::set<Pixel> node_px;
        for (const auto& n : g.nodes) node_px.insert(n.pixels.begin(), n.pixels.end());
        for (const auto& e : g.edges)
            for (auto p : e.chain)
                if (!node_px.count(p)) ++owner[p];
        std::size_t isolated = 0;
        for (int y = 0; y < skel.height; ++y)
            for (int x = 0; x < skel.width; ++x) {
                if (!skel.at(x, y)) continue;
                if (std::popcount(detail::neighbour_code(skel, x, y)) == 0) {
                    ++isolated;
                    continue;
                }
                EXPECT_EQ((owner[Pixel{x, y}]), 1) << trial << " at " << x << "," << y;
            }
        EXPECT_EQ(owner.size() + isolated, skel.count());
    }
}

TEST(ExtractGraph, FlipGivesIsomorphicDegreeSequence) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const auto skel = craq::testing::random_skeleton(rng, 50, 50);
        const auto a = extract_graph(skel);
        const auto b = extract_graph(flip_horizontal(skel));
        EXPECT_EQ(degrees(a), degrees(b));
        EXPECT_EQ(a.edges.size(), b.edges.size());
    }
}

TEST(RemoveBorderNodes, LineAcrossImage) {
    BinaryMask m(30, 9);
    draw_line(m, {0, 4}, {29, 4});
    const auto g = remove_border_nodes(extract_graph(m), 1);
    EXPECT_TRUE(g.nodes.empty());
    ASSERT_EQ(g.edges.size(), 1u);
    EXPECT_EQ(g.edges[0].u, kNoNode);
    EXPECT_EQ(g.edges[0].v, kNoNode);
    EXPECT_EQ(g.edges[0].chain.size(), 30u);
}

TEST(RemoveBorderNodes, InteriorGraphAndZeroMarginAreIdentity) {
    const auto g = extract_graph(plus_sign(8));
    const auto a = remove_border_nodes(g, 2);
    EXPECT_EQ(a.nodes.size(), g.nodes.size());
    BinaryMask m(30, 9);
    draw_line(m, {0, 4}, {29, 4});
    const auto line = extract_graph(m);
    EXPECT_EQ(remove_border_nodes(line, 0).nodes.size(), 2u);
}

TEST(RemoveBorderNodes, JunctionKeepsDegreeOfCutEdges) {
    BinaryMask m(40, 40);
    draw_line(m, {0, 20}, {39, 20});
    draw_line(m, {20, 20}, {20, 30});
    const auto g = remove_border_nodes(extract_graph(m), 2);
    ASSERT_EQ(g.nodes.size(), 2u);
    EXPECT_EQ(degrees(g), (std::vector<int>{1, 3}));
}

TEST(MergeCloseNodes, SplitCrossingBecomesX) {
    // Two Y junctions four pixels apart, as thinning produces for a fat X.
    BinaryMask m(40, 40);
    draw_line(m, {4, 8}, {16, 20});
    draw_line(m, {4, 32}, {16, 20});
    draw_line(m, {16, 20}, {20, 20});
    draw_line(m, {20, 20}, {32, 8});
    draw_line(m, {20, 20}, {32, 32});
    auto g = extract_graph(skeletonize(m));
    std::vector<int> deg3;
    for (const auto& n : g.nodes)
        if (n.degree == 3) deg3.push_back(n.id);
    ASSERT_EQ(deg3.size(), 2u);
    const auto merged = merge_close_nodes(g, 5);
    EXPECT_EQ(degrees(merged), (std::vector<int>{1, 1, 1, 1, 4}));
    EXPECT_EQ(merged.edges.size(), 4u);
    check_structure(merged);
}

TEST(MergeCloseNodes, ZeroDistanceIsIdentity) {
    std::mt19937_64 rng(4);
    const auto g = extract_graph(craq::testing::random_skeleton(rng, 64, 64));
    const auto m = merge_close_nodes(g, 0);
    EXPECT_EQ(m.nodes.size(), g.nodes.size());
    EXPECT_EQ(m.edges.size(), g.edges.size());
    EXPECT_EQ(degrees(m), degrees(g));
}

namespace {

// Exhaustive O(n^2) single-linkage clustering, repeated on the merged
// positions until nothing is within range.
std::vector<Pixel> merge_oracle(std::vector<Pixel> pos, double d) {
    std::vector<long long> sx, sy, w;
    for (auto p : pos) {
        sx.push_back(p.x);
        sy.push_back(p.y);
        w.push_back(1);
    }
    for (;;) {
        const std::size_t n = pos.size();
        std::vector<std::size_t> comp(n);
        std::iota(comp.begin(), comp.end(), 0);
        bool any = false;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dx = pos[i].x - pos[j].x, dy = pos[i].y - pos[j].y;
                if (dx * dx + dy * dy <= d * d && comp[i] != comp[j]) {
                    any = true;
                    const auto from = std::max(comp[i], comp[j]), to = std::min(comp[i], comp[j]);
                    for (auto& c : comp)
                        if (c == from) c = to;
                }
            }
        if (!any) return pos;
        std::map<std::size_t, std::array<long long, 3>> acc;
        for (std::size_t i = 0; i < n; ++i) {
            auto& a = acc[comp[i]];
            a[0] += sx[i];
            a[1] += sy[i];
            a[2] += w[i];
        }
        pos.clear();
        sx.clear();
        sy.clear();
        w.clear();
        for (auto& [k, a] : acc) {
            auto rnd = [](long long num, long long den) { return static_cast<int>(std::floor(static_cast<double>(num) / den + 0.5)); };
            pos.push_back({rnd(a[0], a[2]), rnd(a[1], a[2])});
            sx.push_back(a[0]);
            sy.push_back(a[1]);
            w.push_back(a[2]);
        }
    }
}

}  // namespace

TEST(MergeCloseNodes, MatchesPairwiseClusteringOracle) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 60; ++trial) {
        const auto g = extract_graph(craq::testing::random_skeleton(rng, 64, 64));
        const double d = 1.0 + trial % 7;
        const auto merged = merge_close_nodes(g, d);
        std::vector<Pixel> pos;
        for (const auto& n : g.nodes) pos.push_back(n.pos());
        auto expect = merge_oracle(pos, d);
        std::vector<Pixel> got;
        for (const auto& n : merged.nodes) got.push_back(n.pos());
        std::sort(expect.begin(), expect.end());
        std::sort(got.begin(), got.end());
        EXPECT_EQ(got, expect) << trial;
        int sum = 0, ends = 0;
        for (const auto& n : merged.nodes) sum += n.degree;
        for (const auto& e : merged.edges) ends += (e.u != kNoNode) + (e.v != kNoNode);
        EXPECT_EQ(sum, ends);
        // Idempotent once the fixpoint is reached.
        const auto again = merge_close_nodes(merged, d);
        EXPECT_EQ(again.nodes.size(), merged.nodes.size());
        EXPECT_EQ(again.edges.size(), merged.edges.size());
        EXPECT_EQ(degrees(again), degrees(merged));
    }
}

TEST(MergeCloseNodes, BorderRemovalThenMergeCommutesWithTranslation) {
    std::mt19937_64 rng(31);
    auto process = [](const CrackGraph& g) { return merge_close_nodes(remove_border_nodes(g, 2), 4); };
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = extract_graph(craq::testing::random_skeleton(rng, 48, 48));
        const auto base = translate(g, 10, 10, 68, 68);
        const int dx = trial % 7 - 3, dy = 3 - trial % 5;
        const auto a = translate(process(base), dx, dy, 68, 68);
        const auto b = process(translate(base, dx, dy, 68, 68));
        ASSERT_EQ(a.nodes.size(), b.nodes.size());
        ASSERT_EQ(a.edges.size(), b.edges.size());
        for (std::size_t i = 0; i < a.nodes.size(); ++i) {
            EXPECT_EQ(a.nodes[i].pos(), b.nodes[i].pos());
            EXPECT_EQ(a.nodes[i].degree, b.nodes[i].degree);
        }
        for (std::size_t i = 0; i < a.edges.size(); ++i) EXPECT_EQ(a.edges[i].chain, b.edges[i].chain);
    }
}
