#pragma once

// O/Y/X node typing, ternary topology coordinates and the triangular chart.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "craq/graph.hpp"

namespace craq {

enum class NodeType { O, Y, X };

inline char to_char(NodeType t) {
    switch (t) {
        case NodeType::O: return 'O';
        case NodeType::Y: return 'Y';
        case NodeType::X: return 'X';
    }
    return '?';
}

/// Degree 1 -> O, 3 -> Y, 4 and above -> X. Nodes of degree 0 or 2 have no
/// type (loop anchors, or ends left over after border removal).
inline std::optional<NodeType> node_type(int degree) {
    if (degree == 1) return NodeType::O;
    if (degree == 3) return NodeType::Y;
    if (degree >= 4) return NodeType::X;
    return std::nullopt;
}

using NodeTypeMap = std::map<int, NodeType>;

inline NodeTypeMap classify_nodes(const CrackGraph& g) {
    NodeTypeMap out;
    for (const auto& n : g.nodes) {
        if (n.artificial) continue;
        if (auto t = node_type(n.degree)) out.emplace(n.id, *t);
    }
    return out;
}

struct TernaryCoords {
    double n_o = 0.0;
    double n_y = 0.0;
    double n_x = 0.0;

    bool valid(double tol = 1e-12) const {
        return n_o >= 0 && n_y >= 0 && n_x >= 0 && std::abs(n_o + n_y + n_x - 1.0) <= tol;
    }
};

struct TypeCounts {
    std::size_t o = 0, y = 0, x = 0;
    std::size_t total() const { return o + y + x; }
};

inline TypeCounts count_types(const NodeTypeMap& types) {
    TypeCounts c;
    for (const auto& [id, t] : types) {
        switch (t) {
            case NodeType::O: ++c.o; break;
            case NodeType::Y: ++c.y; break;
            case NodeType::X: ++c.x; break;
        }
    }
    return c;
}

inline TernaryCoords ternary_coords(const NodeTypeMap& types) {
    const auto c = count_types(types);
    if (c.total() == 0) throw Error("no classifiable nodes");
    const double n = static_cast<double>(c.total());
    TernaryCoords t;
    t.n_o = static_cast<double>(c.o) / n;
    t.n_y = static_cast<double>(c.y) / n;
    t.n_x = static_cast<double>(c.x) / n;
    return t;
}

struct ChartPoint {
    TernaryCoords coords;
    std::string label;
};

/// Screen positions of the three chart corners. Defaults put O bottom-left,
/// Y bottom-right and X on top.
struct ChartLayout {
    Vec2 vertex_o{60.0, 520.0};
    Vec2 vertex_y{560.0, 520.0};
    Vec2 vertex_x{310.0, 520.0 - 500.0 * 0.8660254037844386};
    double width = 620.0;
    double height = 580.0;
    int density_bins = 40;
    std::size_t density_min_points = 20;

    Vec2 place(const TernaryCoords& t) const {
        return {t.n_o * vertex_o.x + t.n_y * vertex_y.x + t.n_x * vertex_x.x,
                t.n_o * vertex_o.y + t.n_y * vertex_y.y + t.n_x * vertex_x.y};
    }
};

/// SVG triangle chart: grid lines every 0.2, optional density shading (darker
/// = more points), one marker per point.
inline std::string render_ternary_chart(const std::vector<ChartPoint>& points, const ChartLayout& layout = {}) {
    for (const auto& p : points)
        if (!p.coords.valid(1e-9)) throw Error("invalid ternary coordinates for '" + p.label + "'");

    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(3);
    auto pt = [&](Vec2 v) { s << v.x << ',' << v.y << ' '; };
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << layout.width << "\" height=\"" << layout.height
      << "\" viewBox=\"0 0 " << layout.width << ' ' << layout.height << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    if (points.size() >= layout.density_min_points) {
        const int b = layout.density_bins;
        std::vector<int> hist(static_cast<std::size_t>(b * b), 0);
        int peak = 0;
        for (const auto& p : points) {
            const int i = std::min(b - 1, static_cast<int>(p.coords.n_y * b));
            const int j = std::min(b - 1, static_cast<int>(p.coords.n_x * b));
            peak = std::max(peak, ++hist[static_cast<std::size_t>(i * b + j)]);
        }
        s << "<g id=\"density\" stroke=\"none\">\n";
        for (int i = 0; i < b; ++i) {
            for (int j = 0; i + j < b; ++j) {
                const int c = hist[static_cast<std::size_t>(i * b + j)];
                if (c == 0) continue;
                const int level = 235 - static_cast<int>(std::lround(175.0 * c / peak));
                const double y0 = static_cast<double>(i) / b, y1 = static_cast<double>(i + 1) / b;
                const double x0 = static_cast<double>(j) / b, x1 = static_cast<double>(j + 1) / b;
                s << "<polygon fill=\"rgb(" << level << ',' << level << ',' << level << ")\" points=\"";
                for (auto [ny, nx] : {std::pair{y0, x0}, {y1, x0}, {y1, x1}, {y0, x1}}) {
                    if (ny + nx > 1.0) {  // clip the cell corner that falls outside the simplex
                        const double excess = ny + nx - 1.0;
                        ny -= excess / 2;
                        nx -= excess / 2;
                    }
                    pt(layout.place({1.0 - ny - nx, ny, nx}));
                }
                s << "\"/>\n";
            }
        }
        s << "</g>\n";
    }

    s << "<g id=\"grid\" stroke=\"#bbbbbb\" stroke-width=\"0.7\">\n";
    for (int k = 1; k < 5; ++k) {
        const double f = k / 5.0;
        auto line = [&](TernaryCoords a, TernaryCoords b) {
            const Vec2 p = layout.place(a), q = layout.place(b);
            s << "<line x1=\"" << p.x << "\" y1=\"" << p.y << "\" x2=\"" << q.x << "\" y2=\"" << q.y << "\"/>\n";
        };
        line({f, 1 - f, 0}, {f, 0, 1 - f});
        line({1 - f, f, 0}, {0, f, 1 - f});
        line({1 - f, 0, f}, {0, 1 - f, f});
    }
    s << "</g>\n";
    s << "<polygon id=\"frame\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" points=\"";
    pt(layout.vertex_o);
    pt(layout.vertex_y);
    pt(layout.vertex_x);
    s << "\"/>\n";
    s << "<g font-family=\"sans-serif\" font-size=\"18\" text-anchor=\"middle\">\n";
    s << "<text x=\"" << layout.vertex_o.x << "\" y=\"" << layout.vertex_o.y + 26 << "\">O</text>\n";
    s << "<text x=\"" << layout.vertex_y.x << "\" y=\"" << layout.vertex_y.y + 26 << "\">Y</text>\n";
    s << "<text x=\"" << layout.vertex_x.x << "\" y=\"" << layout.vertex_x.y - 10 << "\">X</text>\n";
    s << "</g>\n";

    s << "<g id=\"points\" fill=\"#c0392b\" stroke=\"black\" stroke-width=\"0.5\">\n";
    for (const auto& p : points) {
        const Vec2 v = layout.place(p.coords);
        s << "<circle cx=\"" << v.x << "\" cy=\"" << v.y << "\" r=\"4\"><title>";
        for (char ch : p.label) {
            if (ch == '<') s << "&lt;";
            else if (ch == '&') s << "&amp;";
            else s << ch;
        }
        s << "</title></circle>\n";
    }
    s << "</g>\n</svg>\n";
    return s.str();
}

inline void write_ternary_chart(const std::filesystem::path& path, const std::vector<ChartPoint>& points,
                                const ChartLayout& layout = {}) {
    const auto svg = render_ternary_chart(points, layout);
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << svg;
    if (!out) throw Error("cannot write '" + path.string() + "'");
}

}  // namespace craq
