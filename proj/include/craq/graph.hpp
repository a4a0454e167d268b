#pragma once

// Skeleton -> undirected crack graph. Nodes are end points (one skeleton
// neighbour) and junction clusters (8-connected runs of pixels with three or
// more neighbours); edges are the degree-2 pixel chains between them.

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <unordered_map>

#include "craq/imaging.hpp"

namespace craq {

/// Edge end that was cut off by the image border.
inline constexpr int kNoNode = -1;

struct Node {
    int id = 0;
    int x = 0;
    int y = 0;
    int degree = 0;
    /// Anchor placed on a closed loop that has no junction of its own.
    bool artificial = false;
    /// Skeleton pixels absorbed by this node (a junction cluster or a single pixel).
    std::vector<Pixel> pixels;

    Pixel pos() const { return {x, y}; }
};

struct Edge {
    int id = 0;
    int u = kNoNode;
    int v = kNoNode;
    /// Pixel path from node u's position to node v's position.
    std::vector<Pixel> chain;

    bool self_loop() const { return u == v && u != kNoNode; }
    bool open() const { return u == kNoNode || v == kNoNode; }
};

/// Node and edge ids always equal their index in the respective vector.
struct CrackGraph {
    int width = 0;
    int height = 0;
    std::vector<Node> nodes;
    std::vector<Edge> edges;
};

/// Degree = number of incident edge ends; a self-loop counts twice.
inline void recompute_degrees(CrackGraph& g) {
    for (auto& n : g.nodes) n.degree = 0;
    for (const auto& e : g.edges) {
        if (e.u != kNoNode) ++g.nodes[static_cast<std::size_t>(e.u)].degree;
        if (e.v != kNoNode) ++g.nodes[static_cast<std::size_t>(e.v)].degree;
    }
}

/// 8-connected digital line from a to b, both ends included.
inline std::vector<Pixel> digital_line(Pixel a, Pixel b) {
    std::vector<Pixel> out;
    int dx = std::abs(b.x - a.x), dy = -std::abs(b.y - a.y);
    const int sx = a.x < b.x ? 1 : -1, sy = a.y < b.y ? 1 : -1;
    int err = dx + dy;
    Pixel p = a;
    for (;;) {
        out.push_back(p);
        if (p == b) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            p.x += sx;
        }
        if (e2 <= dx) {
            err += dx;
            p.y += sy;
        }
    }
    return out;
}

namespace detail {

class GraphTracer {
public:
    explicit GraphTracer(const BinaryMask& skel)
        : m_(skel),
          node_of_(skel.size(), kNoNode),
          parent_(skel.size(), -1),
          visited_(skel.size(), 0),
          count_(skel.size(), 0) {}

    CrackGraph run() {
        g_.width = m_.width;
        g_.height = m_.height;
        for (int y = 0; y < m_.height; ++y)
            for (int x = 0; x < m_.width; ++x)
                if (m_.at(x, y)) count_[idx(x, y)] = std::popcount(neighbour_code(m_, x, y));
        find_nodes();
        trace_edges();
        trace_loops();
        recompute_degrees(g_);
        return std::move(g_);
    }

private:
    std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * m_.width + x; }
    std::size_t idx(Pixel p) const { return idx(p.x, p.y); }
    bool fg(Pixel p) const { return m_.get(p.x, p.y); }

    void find_nodes() {
        std::vector<Pixel> stack;
        for (int y = 0; y < m_.height; ++y) {
            for (int x = 0; x < m_.width; ++x) {
                const auto i = idx(x, y);
                const int c = count_[i];
                if (!m_.data[i] || node_of_[i] != kNoNode || c == 0 || c == 2) continue;
                Node n;
                n.id = static_cast<int>(g_.nodes.size());
                if (c == 1) {
                    n.pixels.push_back({x, y});
                } else {
                    stack.assign(1, {x, y});
                    node_of_[i] = n.id;
                    while (!stack.empty()) {
                        const Pixel p = stack.back();
                        stack.pop_back();
                        n.pixels.push_back(p);
                        for (int k = 0; k < 8; ++k) {
                            const Pixel q{p.x + kDx8[k], p.y + kDy8[k]};
                            if (!fg(q) || count_[idx(q)] < 3 || node_of_[idx(q)] != kNoNode) continue;
                            node_of_[idx(q)] = n.id;
                            stack.push_back(q);
                        }
                    }
                    std::sort(n.pixels.begin(), n.pixels.end());
                }
                for (auto p : n.pixels) node_of_[idx(p)] = n.id;
                anchor(n);
                g_.nodes.push_back(std::move(n));
            }
        }
    }

    /// Places the node on its pixel nearest the cluster centroid and records
    /// a BFS tree inside the cluster so chains can be routed to that pixel.
    void anchor(Node& n) {
        double cx = 0, cy = 0;
        for (auto p : n.pixels) {
            cx += p.x;
            cy += p.y;
        }
        cx /= static_cast<double>(n.pixels.size());
        cy /= static_cast<double>(n.pixels.size());
        Pixel best = n.pixels.front();
        double best_d = std::numeric_limits<double>::infinity();
        for (auto p : n.pixels) {
            const double d = (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy);
            if (d < best_d - 1e-12) {
                best_d = d;
                best = p;
            }
        }
        n.x = best.x;
        n.y = best.y;
        std::vector<Pixel> queue{best};
        parent_[idx(best)] = static_cast<int>(idx(best));
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const Pixel p = queue[head];
            for (int k = 0; k < 8; ++k) {
                const Pixel q{p.x + kDx8[k], p.y + kDy8[k]};
                if (!fg(q) || node_of_[idx(q)] != n.id || parent_[idx(q)] >= 0) continue;
                parent_[idx(q)] = static_cast<int>(idx(p));
                queue.push_back(q);
            }
        }
    }

    /// Path from the node anchor to pixel p (inside the node), inclusive.
    std::vector<Pixel> from_anchor(Pixel p) const {
        std::vector<Pixel> path;
        auto i = idx(p);
        for (;;) {
            path.push_back({static_cast<int>(i % m_.width), static_cast<int>(i / m_.width)});
            const auto par = static_cast<std::size_t>(parent_[i]);
            if (par == i) break;
            i = par;
        }
        std::reverse(path.begin(), path.end());
        return path;
    }

    void add_edge(int u, int v, std::vector<Pixel> chain) {
        Edge e;
        e.id = static_cast<int>(g_.edges.size());
        e.u = u;
        e.v = v;
        e.chain = std::move(chain);
        g_.edges.push_back(std::move(e));
    }

    void close_at(std::vector<Pixel>& chain, Pixel q) const {
        auto tail = from_anchor(q);
        chain.insert(chain.end(), tail.rbegin(), tail.rend());
    }

    void trace_edges() {
        const auto n_nodes = g_.nodes.size();
        for (std::size_t ni = 0; ni < n_nodes; ++ni) {
            const int n = static_cast<int>(ni);
            const auto pixels = g_.nodes[ni].pixels;
            for (Pixel p : pixels) {
                for (int k = 0; k < 8; ++k) {
                    const Pixel q{p.x + kDx8[k], p.y + kDy8[k]};
                    if (!fg(q)) continue;
                    const int other = node_of_[idx(q)];
                    if (other == n) continue;
                    if (other != kNoNode) {
                        if (n < other) {
                            auto chain = from_anchor(p);
                            close_at(chain, q);
                            add_edge(n, other, std::move(chain));
                        }
                        continue;
                    }
                    if (visited_[idx(q)]) continue;
                    auto chain = from_anchor(p);
                    Pixel prev = p, cur = q;
                    for (;;) {
                        chain.push_back(cur);
                        visited_[idx(cur)] = 1;
                        const Pixel next = other_neighbour(cur, prev);
                        const int end = node_of_[idx(next)];
                        if (end != kNoNode) {
                            close_at(chain, next);
                            add_edge(n, end, std::move(chain));
                            break;
                        }
                        prev = cur;
                        cur = next;
                    }
                }
            }
        }
    }

    Pixel other_neighbour(Pixel cur, Pixel prev) const {
        for (int k = 0; k < 8; ++k) {
            const Pixel q{cur.x + kDx8[k], cur.y + kDy8[k]};
            if (fg(q) && q != prev) return q;
        }
        throw Error("chain pixel without continuation");
    }

    /// Closed loops of degree-2 pixels get an artificial anchor node.
    void trace_loops() {
        for (int y = 0; y < m_.height; ++y) {
            for (int x = 0; x < m_.width; ++x) {
                const auto i = idx(x, y);
                if (!m_.data[i] || count_[i] != 2 || visited_[i]) continue;
                Node n;
                n.id = static_cast<int>(g_.nodes.size());
                n.x = x;
                n.y = y;
                n.artificial = true;
                n.pixels = {{x, y}};
                node_of_[i] = n.id;
                visited_[i] = 1;
                g_.nodes.push_back(n);

                const Pixel start{x, y};
                std::vector<Pixel> chain{start};
                Pixel prev = start, cur = other_neighbour(start, Pixel{-2, -2});
                for (;;) {
                    chain.push_back(cur);
                    visited_[idx(cur)] = 1;
                    const Pixel next = other_neighbour(cur, prev);
                    if (next == start) {
                        chain.push_back(start);
                        break;
                    }
                    prev = cur;
                    cur = next;
                }
                add_edge(n.id, n.id, std::move(chain));
            }
        }
    }

    const BinaryMask& m_;
    CrackGraph g_;
    std::vector<int> node_of_;
    std::vector<int> parent_;
    std::vector<std::uint8_t> visited_;
    std::vector<int> count_;
};

}  // namespace detail

/// Builds the crack graph of a one-pixel-wide skeleton. Redundant staircase
/// corners are thinned away first, so every remaining pixel with exactly two
/// neighbours lies on a chain. Isolated pixels are dropped.
inline CrackGraph extract_graph(const BinaryMask& skel) {
    if (skel.empty()) throw Error("empty input");
    if (has_reducible_block(skel)) throw Error("skeleton not thin");
    const BinaryMask clean = skeletonize(skel);
    return detail::GraphTracer(clean).run();
}

namespace detail {

/// Keeps the nodes flagged in `keep`, renumbering nodes; edge ends that
/// pointed at dropped nodes become kNoNode.
inline CrackGraph keep_nodes(const CrackGraph& g, const std::vector<bool>& keep) {
    CrackGraph out;
    out.width = g.width;
    out.height = g.height;
    std::vector<int> remap(g.nodes.size(), kNoNode);
    for (const auto& n : g.nodes) {
        if (!keep[static_cast<std::size_t>(n.id)]) continue;
        remap[static_cast<std::size_t>(n.id)] = static_cast<int>(out.nodes.size());
        Node c = n;
        c.id = static_cast<int>(out.nodes.size());
        out.nodes.push_back(std::move(c));
    }
    for (const auto& e : g.edges) {
        Edge c = e;
        c.id = static_cast<int>(out.edges.size());
        c.u = e.u == kNoNode ? kNoNode : remap[static_cast<std::size_t>(e.u)];
        c.v = e.v == kNoNode ? kNoNode : remap[static_cast<std::size_t>(e.v)];
        out.edges.push_back(std::move(c));
    }
    recompute_degrees(out);
    return out;
}

}  // namespace detail

/// Drops nodes closer than `margin` pixels to the image border. Their edges
/// stay in the graph with the cut end set to kNoNode.
inline CrackGraph remove_border_nodes(const CrackGraph& g, int margin) {
    if (margin < 0) throw Error("margin must be >= 0");
    std::vector<bool> keep(g.nodes.size(), true);
    for (const auto& n : g.nodes) {
        const bool near = n.x < margin || n.y < margin || g.width - 1 - n.x < margin || g.height - 1 - n.y < margin;
        keep[static_cast<std::size_t>(n.id)] = !near;
    }
    return detail::keep_nodes(g, keep);
}

namespace detail {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (b < a) std::swap(a, b);
        parent[static_cast<std::size_t>(b)] = a;
        return true;
    }
};

/// Round-half-up of num/den for den > 0, exact in integers.
inline int round_div(long long num, long long den) {
    const long long q = num >= 0 ? (2 * num + den) / (2 * den) : -((-2 * num + den - 1) / (2 * den));
    return static_cast<int>(q);
}

/// Re-routes the front of a chain to start at `target`, cutting any loop the
/// connecting line would create. `guard` trailing pixels are never cut into.
inline void attach_front(std::vector<Pixel>& chain, Pixel target, std::size_t guard) {
    if (chain.empty()) {
        chain.push_back(target);
        return;
    }
    if (chain.front() == target) return;
    auto line = digital_line(target, chain.front());
    line.pop_back();
    const std::size_t limit = chain.size() > guard ? chain.size() - guard : 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        for (std::size_t j = 0; j < limit; ++j) {
            if (line[i] == chain[j]) {
                std::vector<Pixel> out(line.begin(), line.begin() + static_cast<std::ptrdiff_t>(i));
                out.insert(out.end(), chain.begin() + static_cast<std::ptrdiff_t>(j), chain.end());
                chain = std::move(out);
                return;
            }
        }
    }
    line.insert(line.end(), chain.begin(), chain.end());
    chain = std::move(line);
}

inline void attach_back(std::vector<Pixel>& chain, Pixel target, std::size_t guard) {
    std::reverse(chain.begin(), chain.end());
    attach_front(chain, target, guard);
    std::reverse(chain.begin(), chain.end());
}

}  // namespace detail

/// Single-linkage merge of nodes within `merge_dist` (Euclidean), repeated
/// until no two nodes are that close. Each merged node sits at the rounded
/// centroid of all original nodes it absorbed. Edges between distinct
/// members vanish; parallel edges created by the merge collapse to the
/// shortest one; incident chains are extended to the new position.
inline CrackGraph merge_close_nodes(const CrackGraph& input, double merge_dist) {
    if (merge_dist < 0) throw Error("merge_dist must be >= 0");
    CrackGraph g = input;
    std::vector<long long> sx(g.nodes.size()), sy(g.nodes.size()), wt(g.nodes.size(), 1);
    for (const auto& n : g.nodes) {
        sx[static_cast<std::size_t>(n.id)] = n.x;
        sy[static_cast<std::size_t>(n.id)] = n.y;
    }
    const double d2 = merge_dist * merge_dist;
    const int cell = std::max(1, static_cast<int>(std::ceil(merge_dist)));

    for (;;) {
        const auto n = g.nodes.size();
        detail::UnionFind uf(n);
        std::unordered_map<long long, std::vector<int>> grid;
        auto key = [](long long cx, long long cy) { return (cx << 32) ^ (cy & 0xffffffffLL); };
        for (const auto& nd : g.nodes) grid[key(nd.x / cell, nd.y / cell)].push_back(nd.id);
        bool merged = false;
        for (const auto& a : g.nodes) {
            const long long cx = a.x / cell, cy = a.y / cell;
            for (long long ox = -1; ox <= 1; ++ox) {
                for (long long oy = -1; oy <= 1; ++oy) {
                    auto it = grid.find(key(cx + ox, cy + oy));
                    if (it == grid.end()) continue;
                    for (int bid : it->second) {
                        if (bid <= a.id) continue;
                        const auto& b = g.nodes[static_cast<std::size_t>(bid)];
                        const double dx = a.x - b.x, dy = a.y - b.y;
                        if (dx * dx + dy * dy <= d2) merged |= uf.unite(a.id, bid);
                    }
                }
            }
        }
        if (!merged) break;

        // Clusters numbered by their smallest member.
        std::vector<int> cluster(n, -1), size;
        int next = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const int r = uf.find(static_cast<int>(i));
            if (cluster[static_cast<std::size_t>(r)] < 0) {
                cluster[static_cast<std::size_t>(r)] = next++;
                size.push_back(0);
            }
            cluster[i] = cluster[static_cast<std::size_t>(r)];
            ++size[static_cast<std::size_t>(cluster[i])];
        }

        CrackGraph out;
        out.width = g.width;
        out.height = g.height;
        out.nodes.resize(static_cast<std::size_t>(next));
        std::vector<long long> nsx(static_cast<std::size_t>(next), 0), nsy(nsx), nwt(nsx);
        std::vector<bool> all_artificial(static_cast<std::size_t>(next), true);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(cluster[i]);
            nsx[c] += sx[i];
            nsy[c] += sy[i];
            nwt[c] += wt[i];
            all_artificial[c] = all_artificial[c] && g.nodes[i].artificial;
            auto& px = out.nodes[c].pixels;
            px.insert(px.end(), g.nodes[i].pixels.begin(), g.nodes[i].pixels.end());
        }
        for (std::size_t c = 0; c < out.nodes.size(); ++c) {
            auto& nd = out.nodes[c];
            nd.id = static_cast<int>(c);
            nd.x = detail::round_div(nsx[c], nwt[c]);
            nd.y = detail::round_div(nsy[c], nwt[c]);
            nd.artificial = all_artificial[c];
            std::sort(nd.pixels.begin(), nd.pixels.end());
        }

        // Surviving edges; parallel edges touching a fresh merge keep the shortest chain.
        std::map<std::pair<int, int>, std::size_t> parallel;
        for (const auto& e : g.edges) {
            Edge c = e;
            c.u = e.u == kNoNode ? kNoNode : cluster[static_cast<std::size_t>(e.u)];
            c.v = e.v == kNoNode ? kNoNode : cluster[static_cast<std::size_t>(e.v)];
            if (e.u != e.v && c.u == c.v && c.u != kNoNode) continue;
            const bool touched = (c.u != kNoNode && size[static_cast<std::size_t>(c.u)] > 1) ||
                                 (c.v != kNoNode && size[static_cast<std::size_t>(c.v)] > 1);
            if (c.u != kNoNode && size[static_cast<std::size_t>(c.u)] > 1)
                detail::attach_front(c.chain, out.nodes[static_cast<std::size_t>(c.u)].pos(), 1);
            if (c.v != kNoNode && size[static_cast<std::size_t>(c.v)] > 1)
                detail::attach_back(c.chain, out.nodes[static_cast<std::size_t>(c.v)].pos(), 1);
            if (touched && c.u != kNoNode && c.v != kNoNode && c.u != c.v) {
                const auto k = std::minmax(c.u, c.v);
                auto it = parallel.find(k);
                if (it != parallel.end()) {
                    auto& kept = out.edges[it->second];
                    if (c.chain.size() < kept.chain.size()) {
                        c.id = kept.id;
                        kept = std::move(c);
                    }
                    continue;
                }
                parallel.emplace(k, out.edges.size());
            }
            c.id = static_cast<int>(out.edges.size());
            out.edges.push_back(std::move(c));
        }
        recompute_degrees(out);
        g = std::move(out);
        sx = std::move(nsx);
        sy = std::move(nsy);
        wt = std::move(nwt);
    }
    return g;
}

/// Shifts every coordinate by (dx, dy) and enlarges the frame accordingly.
inline CrackGraph translate(const CrackGraph& g, int dx, int dy, int new_width, int new_height) {
    CrackGraph out = g;
    out.width = new_width;
    out.height = new_height;
    for (auto& n : out.nodes) {
        n.x += dx;
        n.y += dy;
        for (auto& p : n.pixels) p = {p.x + dx, p.y + dy};
    }
    for (auto& e : out.edges)
        for (auto& p : e.chain) p = {p.x + dx, p.y + dy};
    return out;
}

}  // namespace craq
