#pragma once

// Endpoint-constrained polynomial description of a crack.
//
// Each chain is moved into its chord frame (first end at the origin, last end
// at (L, 0)) and fitted by f(x) = sum_k a_k x^k with f(0) = f(L) = 0 imposed
// exactly. The constraint is built into the basis: f(x) = x (x - L) g(x), so
// only g is fitted by least squares and both end conditions hold by
// construction.

#include <Eigen/Dense>

#include <algorithm>

#include "craq/core.hpp"

namespace craq {

inline constexpr int kMaxOrder = 8;

struct PolyEdge {
    int order = 1;
    /// a_0..a_n in the chord frame.
    std::vector<double> coeffs;
    /// Chord end points in the image frame.
    Vec2 start;
    Vec2 end;
    /// Direction of start -> end, in [0, pi).
    double chord_angle = 0.0;
    double chord_len = 0.0;
    /// RMS ordinate residual of the fit, in pixels.
    double residual_rms = 0.0;

    double value(double x) const {
        double acc = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
        return acc;
    }

    /// f'(x) = sum_{k>=1} k a_k x^{k-1}
    double first_derivative(double x) const {
        double acc = 0.0;
        for (int k = order; k >= 1; --k) acc = acc * x + k * coeffs[static_cast<std::size_t>(k)];
        return acc;
    }

    /// f''(x) = sum_{k>=2} k (k-1) a_k x^{k-2}
    double second_derivative(double x) const {
        double acc = 0.0;
        for (int k = order; k >= 2; --k) acc = acc * x + k * (k - 1) * coeffs[static_cast<std::size_t>(k)];
        return acc;
    }

    /// Number of values needed to store the shape.
    std::size_t stored_values() const { return coeffs.size(); }
};

struct ChordFrame {
    /// Chain points in chord coordinates, in (possibly reversed) chain order.
    std::vector<Vec2> points;
    double angle = 0.0;
    double length = 0.0;
    Vec2 origin;
    Vec2 end;
    /// True when the chain was walked backwards so that angle lands in [0, pi).
    bool reversed = false;
};

/// Rigid motion taking the chain's first point to (0,0) and its last to
/// (L,0). The chain direction is canonicalised so the chord angle is in
/// [0, pi); a chain and its reverse therefore share one frame.
template <class Point>
ChordFrame chord_frame(const std::vector<Point>& chain) {
    if (chain.size() < 2) throw Error("chain needs at least two points");
    auto at = [&](std::size_t i) { return Vec2{static_cast<double>(chain[i].x), static_cast<double>(chain[i].y)}; };
    ChordFrame f;
    Vec2 a = at(0), b = at(chain.size() - 1);
    double angle = std::atan2(b.y - a.y, b.x - a.x);
    if (angle < 0.0 || angle >= kPi) {
        std::swap(a, b);
        f.reversed = true;
        angle = std::atan2(b.y - a.y, b.x - a.x);
        if (angle >= kPi) angle = 0.0;
    }
    f.length = norm(b - a);
    if (!(f.length > 1e-12)) throw Error("degenerate chord");
    f.angle = angle;
    f.origin = a;
    f.end = b;
    const double c = (b.x - a.x) / f.length, s = (b.y - a.y) / f.length;
    f.points.reserve(chain.size());
    for (std::size_t k = 0; k < chain.size(); ++k) {
        const Vec2 d = at(f.reversed ? chain.size() - 1 - k : k) - a;
        f.points.push_back({d.x * c + d.y * s, -d.x * s + d.y * c});
    }
    f.points.front() = {0.0, 0.0};
    f.points.back() = {f.length, 0.0};
    return f;
}

namespace detail {

/// Chord-frame samples sorted by abscissa, with ordinates of equal abscissae
/// averaged so the data describe a single-valued function.
inline std::vector<Vec2> function_samples(const ChordFrame& f) {
    std::vector<Vec2> pts = f.points;
    std::stable_sort(pts.begin(), pts.end(), [](Vec2 p, Vec2 q) { return p.x < q.x; });
    std::vector<Vec2> out;
    for (std::size_t i = 0; i < pts.size();) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < pts.size() && pts[j].x - pts[i].x <= 1e-9) sum += pts[j++].y;
        out.push_back({pts[i].x, sum / static_cast<double>(j - i)});
        i = j;
    }
    return out;
}

}  // namespace detail

/// Least-squares polynomial of order n through both chord end points.
template <class Point>
PolyEdge fit_polynomial(const std::vector<Point>& chain, int n) {
    if (n < 1 || n > kMaxOrder) throw Error("polynomial order must be in 1.." + std::to_string(kMaxOrder));
    if (chain.size() < static_cast<std::size_t>(n + 1)) throw Error("chain shorter than order + 1");
    const ChordFrame frame = chord_frame(chain);
    const auto samples = detail::function_samples(frame);
    const double L = frame.length;

    PolyEdge pe;
    pe.order = n;
    pe.coeffs.assign(static_cast<std::size_t>(n + 1), 0.0);
    pe.start = frame.origin;
    pe.end = frame.end;
    pe.chord_angle = frame.angle;
    pe.chord_len = L;

    const auto m = static_cast<Eigen::Index>(samples.size());
    Eigen::VectorXd rhs(m);
    for (Eigen::Index i = 0; i < m; ++i) rhs(i) = samples[static_cast<std::size_t>(i)].y;

    if (n == 1) {
        pe.residual_rms = std::sqrt(rhs.squaredNorm() / static_cast<double>(m));
        return pe;
    }

    // Basis t (t - 1) t^j on t = x / L keeps the system well scaled.
    const int free = n - 1;
    Eigen::MatrixXd basis(m, free);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double t = samples[static_cast<std::size_t>(i)].x / L;
        double tp = t * (t - 1.0);
        for (int j = 0; j < free; ++j) {
            basis(i, j) = tp;
            tp *= t;
        }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
    qr.setThreshold(1e-10);
    if (qr.rank() < free) throw Error("degenerate chain");
    const Eigen::VectorXd c = qr.solve(rhs);
    pe.residual_rms = std::sqrt((rhs - basis * c).squaredNorm() / static_cast<double>(m));

    // c_j t^{j+1} (t - 1) = c_j (x^{j+2} / L^{j+2} - x^{j+1} / L^{j+1})
    for (int j = 0; j < free; ++j) {
        const auto k = static_cast<std::size_t>(j);
        pe.coeffs[k + 2] += c(j) / std::pow(L, j + 2);
        pe.coeffs[k + 1] -= c(j) / std::pow(L, j + 1);
    }
    return pe;
}

/// Samples the fitted curve at equispaced chord abscissae, in the image
/// frame. The first and last samples are the chord end points.
inline std::vector<Vec2> evaluate(const PolyEdge& pe, int samples) {
    if (samples < 2) throw Error("need at least two samples");
    const double c = std::cos(pe.chord_angle), s = std::sin(pe.chord_angle);
    std::vector<Vec2> out;
    out.reserve(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) {
        const double x = pe.chord_len * i / (samples - 1);
        const double y = pe.value(x);
        out.push_back({pe.start.x + x * c - y * s, pe.start.y + x * s + y * c});
    }
    out.front() = pe.start;
    out.back() = pe.end;
    return out;
}

/// Linear-approximation orientation: the chord direction modulo pi.
inline double orientation(const PolyEdge& pe) { return pe.chord_angle; }

/// Mean |f''| over equispaced abscissae on [0, L]; exactly |2 a_2| when n = 2.
inline double curvature(const PolyEdge& pe, int samples = 32) {
    if (pe.order < 2) return 0.0;
    if (samples < 1) throw Error("need at least one sample");
    double sum = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double x = samples == 1 ? 0.0 : pe.chord_len * i / (samples - 1);
        sum += std::abs(pe.second_derivative(x));
    }
    return sum / samples;
}

/// Fits one graph edge. Chains shorter than the requested order get the
/// highest order they support. Closed chains (coincident ends) are split at
/// the point farthest from the ends and each half gets order ceil(n/2).
template <class Point>
std::vector<PolyEdge> fit_chain(const std::vector<Point>& chain, int n) {
    if (chain.size() < 2) throw Error("chain needs at least two points");
    auto fit_best = [](const std::vector<Point>& c, int order) {
        for (int k = std::min<int>(order, static_cast<int>(c.size()) - 1); k > 1; --k) {
            try {
                return fit_polynomial(c, k);
            } catch (const Error&) {
            }
        }
        return fit_polynomial(c, 1);
    };
    const auto& a = chain.front();
    const auto& b = chain.back();
    const double dx = static_cast<double>(b.x) - a.x, dy = static_cast<double>(b.y) - a.y;
    if (std::hypot(dx, dy) > 1e-12) return {fit_best(chain, n)};

    std::size_t split = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < chain.size(); ++i) {
        const double d = std::hypot(static_cast<double>(chain[i].x) - a.x, static_cast<double>(chain[i].y) - a.y);
        if (d > far) {
            far = d;
            split = i;
        }
    }
    if (far <= 1e-12) throw Error("degenerate chord");
    const int half_order = std::max(1, (n + 1) / 2);
    std::vector<Point> first(chain.begin(), chain.begin() + static_cast<std::ptrdiff_t>(split) + 1);
    std::vector<Point> second(chain.begin() + static_cast<std::ptrdiff_t>(split), chain.end());
    return {fit_best(first, half_order), fit_best(second, half_order)};
}

/// Fraction of storage saved versus raw (x, y) pixel coordinates.
inline double storage_reduction(const std::vector<PolyEdge>& pieces, std::size_t chain_pixels) {
    std::size_t stored = 0;
    for (const auto& p : pieces) stored += p.stored_values();
    return 1.0 - static_cast<double>(stored) / (2.0 * static_cast<double>(chain_pixels));
}

}  // namespace craq
