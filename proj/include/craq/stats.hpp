#pragma once

// Whole-network statistical descriptor (nine values).

#include <array>

#include "craq/edgefit.hpp"
#include "craq/topology.hpp"

namespace craq {

/// Fitted pieces of one graph edge (two pieces for a closed loop).
struct EdgeFit {
    int edge_id = 0;
    std::vector<PolyEdge> pieces;
};

struct StatFeatures {
    double theta_sigma = 0.0;         ///< std of the normalised orientation histogram
    double l_mean = 0.0;              ///< mean crack length, px
    double l_std = 0.0;               ///< std of crack length, px
    double node_density = 0.0;        ///< classified nodes per megapixel
    double frac_o = 0.0;
    double frac_y = 0.0;
    double frac_x = 0.0;
    double edges_per_junction = 0.0;  ///< edges / classified nodes
    double curvature_mean = 0.0;      ///< mean of per-edge mean |f''|, 1/px

    static constexpr std::size_t kSize = 9;
    static constexpr std::array<const char*, kSize> kNames = {
        "theta_sigma", "l_mean", "l_std", "node_density", "frac_o",
        "frac_y", "frac_x", "edges_per_junction", "curvature_mean"};

    std::array<double, kSize> to_array() const {
        return {theta_sigma, l_mean, l_std, node_density, frac_o, frac_y, frac_x, edges_per_junction, curvature_mean};
    }
};

struct StatsParams {
    int orientation_bins = 18;
    int curvature_samples = 32;
};

/// Length-weighted histogram of piece orientations over [0, pi), normalised
/// to unit mass.
inline std::vector<double> orientation_histogram(const std::vector<PolyEdge>& pieces, int bins) {
    if (bins < 2) throw Error("need at least two orientation bins");
    if (pieces.empty()) throw Error("no edges for orientation histogram");
    std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
    double total = 0.0;
    for (const auto& p : pieces) {
        const double theta = orientation(p);
        const int b = std::clamp(static_cast<int>(theta / kPi * bins), 0, bins - 1);
        h[static_cast<std::size_t>(b)] += p.chord_len;
        total += p.chord_len;
    }
    if (!(total > 0)) throw Error("edges have zero total length");
    for (auto& v : h) v /= total;
    return h;
}

inline double population_std(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

inline StatFeatures compute_features(const CrackGraph& g, const std::vector<EdgeFit>& fits, const NodeTypeMap& types,
                                     const StatsParams& params = {}) {
    if (types.empty()) throw Error("empty network");
    if (fits.size() != g.edges.size()) throw Error("fits are not aligned with edges");
    StatFeatures f;

    std::vector<PolyEdge> pieces;
    std::vector<double> curv;
    for (const auto& ef : fits) {
        if (ef.pieces.empty()) continue;
        double c = 0.0;
        for (const auto& p : ef.pieces) {
            pieces.push_back(p);
            c += curvature(p, params.curvature_samples);
        }
        curv.push_back(c / static_cast<double>(ef.pieces.size()));
    }
    if (!pieces.empty()) f.theta_sigma = population_std(orientation_histogram(pieces, params.orientation_bins));

    std::vector<double> lengths;
    lengths.reserve(g.edges.size());
    for (const auto& e : g.edges) lengths.push_back(polyline_length(e.chain));
    if (!lengths.empty()) {
        double s = 0.0;
        for (double l : lengths) s += l;
        f.l_mean = s / static_cast<double>(lengths.size());
        f.l_std = population_std(lengths);
    }

    const auto counts = count_types(types);
    const double n = static_cast<double>(counts.total());
    const double area = static_cast<double>(g.width) * static_cast<double>(g.height);
    f.node_density = area > 0 ? n / area * 1e6 : 0.0;
    const auto t = ternary_coords(types);
    f.frac_o = t.n_o;
    f.frac_y = t.n_y;
    f.frac_x = t.n_x;
    f.edges_per_junction = static_cast<double>(g.edges.size()) / n;
    if (!curv.empty()) {
        double s = 0.0;
        for (double c : curv) s += c;
        f.curvature_mean = s / static_cast<double>(curv.size());
    }
    return f;
}

}  // namespace craq
