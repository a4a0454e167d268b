#pragma once

// Synthetic crack images for end-to-end testing. Each family builds a planar
// line network which is then drawn as dark anti-aliased strokes on a lit,
// slightly noisy background. A smooth displacement field bends every stroke
// the same way at shared points, so junctions stay connected.

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "craq/image.hpp"

namespace craq {

enum class Family { Grid = 0, Honeycomb = 1, Voronoi = 2, BranchingTree = 3, Spiral = 4 };

inline constexpr std::array<const char*, 5> kFamilyNames = {"grid", "honeycomb", "voronoi", "branching-tree", "spiral"};

inline std::string to_string(Family f) { return kFamilyNames[static_cast<std::size_t>(f)]; }

inline Family family_from_string(const std::string& s) {
    for (std::size_t i = 0; i < kFamilyNames.size(); ++i)
        if (s == kFamilyNames[i]) return static_cast<Family>(i);
    throw Error("unknown family '" + s + "'");
}

struct SyntheticSpec {
    Family family = Family::Grid;
    int size = 320;
    double density = 1.0;  // scales the number of cells / branches
    double jitter = 1.0;   // scales positional noise and stroke wobble
    std::uint64_t seed = 0;

    void validate() const {
        if (size < 64) throw Error("synthetic image size must be >= 64");
        if (!(density > 0)) throw Error("density must be positive");
        if (!(jitter >= 0)) throw Error("jitter must be >= 0");
    }
};

namespace detail {

struct Stroke {
    std::vector<Vec2> pts;
    double half_width = 1.0;
};

struct Warp {
    std::array<double, 4> amp{}, fx{}, fy{}, ph{};

    Warp(std::mt19937_64& rng, double jitter) {
        std::uniform_real_distribution<double> f(0.02, 0.06), p(0, 2 * kPi), a(0.8, 1.6);
        for (int i = 0; i < 4; ++i) {
            amp[static_cast<std::size_t>(i)] = jitter * a(rng);
            fx[static_cast<std::size_t>(i)] = f(rng);
            fy[static_cast<std::size_t>(i)] = f(rng);
            ph[static_cast<std::size_t>(i)] = p(rng);
        }
    }
    Vec2 operator()(Vec2 p) const {
        return {p.x + amp[0] * std::sin(fx[0] * p.y + ph[0]) + amp[1] * std::sin(fx[1] * p.x + fy[1] * p.y + ph[1]),
                p.y + amp[2] * std::sin(fy[2] * p.x + ph[2]) + amp[3] * std::sin(fx[3] * p.x - fy[3] * p.y + ph[3])};
    }
};

inline double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a, ap = p - a;
    const double len2 = ab.x * ab.x + ab.y * ab.y;
    const double t = len2 > 0 ? std::clamp((ap.x * ab.x + ap.y * ab.y) / len2, 0.0, 1.0) : 0.0;
    return norm(p - (a + ab * t));
}

/// Coverage in [0, 1] of a stroke of half width hw at distance d, with a one
/// pixel linear ramp for anti-aliasing.
inline double coverage(double d, double hw) { return std::clamp(hw + 0.5 - d, 0.0, 1.0); }

inline void draw_stroke(std::vector<double>& ink, int size, const Stroke& s, const Warp& warp) {
    // Resample at ~3 px, then bend with the shared warp.
    std::vector<Vec2> pts;
    for (std::size_t i = 0; i + 1 < s.pts.size(); ++i) {
        const Vec2 a = s.pts[i], b = s.pts[i + 1];
        const int k = std::max(1, static_cast<int>(std::ceil(norm(b - a) / 3.0)));
        for (int j = 0; j < k; ++j) pts.push_back(warp(a + (b - a) * (static_cast<double>(j) / k)));
    }
    pts.push_back(warp(s.pts.back()));
    const double reach = s.half_width + 1.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const Vec2 a = pts[i], b = pts[i + 1];
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - reach)));
        const int x1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + reach)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - reach)));
        const int y1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + reach)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                double& v = ink[static_cast<std::size_t>(y) * static_cast<std::size_t>(size) + static_cast<std::size_t>(x)];
                v = std::max(v, coverage(segment_distance({double(x), double(y)}, a, b), s.half_width));
            }
    }
}

struct Net {
    std::vector<Vec2> nodes;
    std::vector<std::pair<int, int>> edges;
};

inline std::vector<Stroke> strokes_of(const Net& net, std::mt19937_64& rng, double drop) {
    std::bernoulli_distribution lose(drop);
    std::uniform_real_distribution<double> hw(0.9, 1.4);
    std::vector<Stroke> out;
    for (auto [u, v] : net.edges) {
        if (lose(rng)) continue;
        out.push_back({{net.nodes[static_cast<std::size_t>(u)], net.nodes[static_cast<std::size_t>(v)]}, hw(rng)});
    }
    return out;
}

inline Vec2 rotate_about(Vec2 p, Vec2 c, double a) {
    const Vec2 d = p - c;
    return {c.x + d.x * std::cos(a) - d.y * std::sin(a), c.y + d.x * std::sin(a) + d.y * std::cos(a)};
}

/// Square lattice, spacing ~32 px, random rotation. Jitter also drops a few
/// edges; with zero jitter the lattice is perfect.
inline Net grid_net(std::mt19937_64& rng, const SyntheticSpec& s) {
    std::uniform_real_distribution<double> sp(28, 36), rot(-0.4, 0.4), off(0, 1);
    std::normal_distribution<double> unit;
    auto jit = [&](std::mt19937_64& r) { return 1.5 * s.jitter * unit(r); };
    const double step = sp(rng) / std::sqrt(s.density), angle = rot(rng);
    const Vec2 c{s.size / 2.0, s.size / 2.0};
    const int n = static_cast<int>(std::ceil(s.size * 1.6 / step)) + 2;
    const double o = -0.8 * s.size + off(rng) * step;
    Net net;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            net.nodes.push_back(rotate_about({o + i * step + jit(rng) + c.x, o + j * step + jit(rng) + c.y}, c, angle));
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            if (i + 1 < n) net.edges.emplace_back(j * n + i, j * n + i + 1);
            if (j + 1 < n) net.edges.emplace_back(j * n + i, (j + 1) * n + i);
        }
    return net;
}

/// Hexagonal cells, edge ~16 px, random rotation.
inline Net honeycomb_net(std::mt19937_64& rng, const SyntheticSpec& s) {
    std::uniform_real_distribution<double> el(14, 18), rot(0, kPi / 3);
    std::normal_distribution<double> unit;
    auto jit = [&](std::mt19937_64& r) { return s.jitter * unit(r); };
    const double a = el(rng) / std::sqrt(s.density), angle = rot(rng);
    const Vec2 c{s.size / 2.0, s.size / 2.0};
    // Brick-wall indexing of the hexagonal lattice: vertex (i, j) links to
    // (i +- 1, j) and, for even i + j, to (i, j + 1).
    const double dx = a * std::sqrt(3.0) / 2.0;
    const int nx = static_cast<int>(std::ceil(s.size * 1.6 / dx)) + 2, ny = static_cast<int>(std::ceil(s.size * 1.6 / (1.5 * a))) + 2;
    Net net;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double y = j * 1.5 * a + (((i + j) % 2 == 0) ? 0.0 : -0.5 * a);
            net.nodes.push_back(rotate_about({i * dx - 0.8 * s.size + c.x + jit(rng), y - 0.8 * s.size + c.y + jit(rng)}, c, angle));
        }
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            if (i + 1 < nx) net.edges.emplace_back(j * nx + i, j * nx + i + 1);
            if ((i + j) % 2 == 0 && j + 1 < ny) net.edges.emplace_back(j * nx + i, (j + 1) * nx + i);
        }
    return net;
}

/// Binary branching cracks growing from scattered seeds. Growth is breadth
/// first and a tip that runs into another crack stops there, the way a new
/// crack ends on an old one, so crossings stay rare.
inline std::vector<Stroke> tree_strokes(std::mt19937_64& rng, const SyntheticSpec& s) {
    std::uniform_real_distribution<double> u(0, 1), ang(0, 2 * kPi), hw(0.9, 1.4);
    std::normal_distribution<double> wander(0.0, 0.12);
    struct Tip {
        Vec2 p;
        double heading;
        int depth, parent;
    };
    constexpr int kCell = 4;
    const int cells = s.size / kCell + 12;
    std::vector<int> owner(static_cast<std::size_t>(cells) * static_cast<std::size_t>(cells), -1);
    auto cell = [&](Vec2 p) -> int* {
        const int cx = static_cast<int>(std::floor(p.x / kCell)) + 6, cy = static_cast<int>(std::floor(p.y / kCell)) + 6;
        if (cx < 0 || cy < 0 || cx >= cells || cy >= cells) return nullptr;
        return &owner[static_cast<std::size_t>(cy) * static_cast<std::size_t>(cells) + static_cast<std::size_t>(cx)];
    };
    auto blocked = [&](Vec2 p, int self, int parent) {
        const int* c = cell(p);
        return c && *c >= 0 && *c != self && *c != parent;
    };

    std::vector<Stroke> out;
    const int roots = std::max(1, static_cast<int>(std::lround(s.size * s.size / 8000.0 * s.density)));
    std::deque<Tip> queue;
    for (int r = 0; r < roots; ++r) queue.push_back({{u(rng) * s.size, u(rng) * s.size}, ang(rng), 0, -1});
    const double step = 6.0;
    while (!queue.empty()) {
        Tip t = queue.front();
        queue.pop_front();
        const int id = static_cast<int>(out.size());
        Stroke st{{t.p}, hw(rng)};
        const int len = 4 + static_cast<int>(u(rng) * 6);
        bool stopped = false;
        for (int k = 0; k < len && !stopped; ++k) {
            t.heading += wander(rng) * s.jitter;
            const Vec2 dir{std::cos(t.heading), std::sin(t.heading)};
            // Probe the step in 2 px increments so thin crossings are caught.
            // Siblings share their start, so the first steps are exempt.
            for (int j = 1; j <= 3 && !stopped; ++j) {
                t.p = st.pts.back() + dir * (2.0 * j);
                stopped = k >= 2 && blocked(t.p, id, t.parent);
            }
            if (stopped) t.p = t.p + dir * 2.0;
            st.pts.push_back(t.p);
            if (!stopped)
                for (int j = 1; j <= 3; ++j)
                    if (int* c = cell(st.pts[st.pts.size() - 2] + dir * (2.0 * j))) *c = id;
        }
        out.push_back(std::move(st));
        const bool inside = t.p.x > -20 && t.p.y > -20 && t.p.x < s.size + 20 && t.p.y < s.size + 20;
        if (stopped || !inside || t.depth >= 6 || (t.depth >= 2 && u(rng) < 0.15)) continue;
        const double spread = 0.45 + 0.4 * u(rng);
        queue.push_back({t.p, t.heading + spread, t.depth + 1, id});
        queue.push_back({t.p, t.heading - spread, t.depth + 1, id});
    }
    return out;
}

/// Archimedean spiral with a few short radial links between turns.
inline std::vector<Stroke> spiral_strokes(std::mt19937_64& rng, const SyntheticSpec& s) {
    std::uniform_real_distribution<double> u(0, 1), hw(0.9, 1.4);
    const Vec2 c{s.size * (0.3 + 0.4 * u(rng)), s.size * (0.3 + 0.4 * u(rng))};
    const double pitch = (24 + 8 * u(rng)) / std::sqrt(s.density), phase = u(rng) * 2 * kPi;
    const double turns = s.size * 0.9 / pitch;
    Stroke arm{{}, hw(rng)};
    auto at = [&](double th) { return c + Vec2{std::cos(th + phase), std::sin(th + phase)} * (pitch * th / (2 * kPi)); };
    for (double th = 0.6; th < turns * 2 * kPi; th += 3.0 / std::max(1.0, pitch * th / (2 * kPi))) arm.pts.push_back(at(th));
    std::vector<Stroke> out{arm};
    const int links = std::max(2, static_cast<int>(std::lround(turns * 2 * s.density)));
    for (int k = 0; k < links; ++k) {
        const double th = 2 * kPi * (1 + u(rng) * (turns - 1.5));
        out.push_back({{at(th), at(th + 2 * kPi)}, hw(rng)});
    }
    return out;
}

}  // namespace detail

/// Renders one synthetic crack image, intensities in [0, 1], cracks dark.
inline GrayImage generate(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(spec.family) + 1);
    const int n = spec.size;
    std::vector<double> ink(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
    const detail::Warp warp(rng, spec.jitter);

    std::vector<detail::Stroke> strokes;
    switch (spec.family) {
        case Family::Grid: strokes = detail::strokes_of(detail::grid_net(rng, spec), rng, 0.06 * std::min(1.0, spec.jitter)); break;
        case Family::Honeycomb: strokes = detail::strokes_of(detail::honeycomb_net(rng, spec), rng, 0.04 * std::min(1.0, spec.jitter)); break;
        case Family::BranchingTree: strokes = detail::tree_strokes(rng, spec); break;
        case Family::Spiral: strokes = detail::spiral_strokes(rng, spec); break;
        case Family::Voronoi: {
            // Distance from a point to the bisector of its two nearest seeds
            // is (d2^2 - d1^2) / (2 |s2 - s1|).
            std::uniform_real_distribution<double> u(-20.0, n + 20.0), hw(1.0, 1.3);
            const int seeds = std::max(4, static_cast<int>(std::lround((n + 40.0) * (n + 40.0) / 1100.0 * spec.density)));
            std::vector<Vec2> site;
            for (int i = 0; i < seeds; ++i) site.push_back({u(rng), u(rng)});
            const double half = hw(rng);
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x) {
                    const Vec2 p = warp({double(x), double(y)});
                    double d1 = 1e300, d2 = 1e300;
                    int i1 = 0, i2 = 0;
                    for (int i = 0; i < seeds; ++i) {
                        const Vec2 q = p - site[static_cast<std::size_t>(i)];
                        const double d = q.x * q.x + q.y * q.y;
                        if (d < d1) {
                            d2 = d1;
                            i2 = i1;
                            d1 = d;
                            i1 = i;
                        } else if (d < d2) {
                            d2 = d;
                            i2 = i;
                        }
                    }
                    const double sep = norm(site[static_cast<std::size_t>(i1)] - site[static_cast<std::size_t>(i2)]);
                    ink[static_cast<std::size_t>(y) * static_cast<std::size_t>(n) + static_cast<std::size_t>(x)] =
                        detail::coverage((d2 - d1) / (2 * sep), half);
                }
            break;
        }
    }
    for (const auto& s : strokes) detail::draw_stroke(ink, n, s, warp);

    std::uniform_real_distribution<double> u(0, 1);
    std::normal_distribution<double> noise(0.0, 0.02);
    const double base = 0.7 + 0.1 * u(rng), gx = 0.12 * (u(rng) - 0.5), gy = 0.12 * (u(rng) - 0.5);
    const double contrast = 0.35 + 0.15 * u(rng);
    GrayImage img(n, n);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double bg = base + gx * (x - n / 2.0) / n + gy * (y - n / 2.0) / n;
            const double v = bg - contrast * ink[static_cast<std::size_t>(y) * static_cast<std::size_t>(n) + static_cast<std::size_t>(x)] + noise(rng);
            img.at(x, y) = std::clamp(v, 0.0, 1.0);
        }
    return img;
}

}  // namespace craq
