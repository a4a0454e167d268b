#pragma once

// Crack segmentation: bottom-hat enhancement, integral-image adaptive
// threshold, small-component removal, and topology-preserving thinning.

#include <array>
#include <bit>
#include <deque>
#include <limits>
#include <utility>

#include "craq/image.hpp"

namespace craq {

struct SegmentationParams {
    int strel_radius = 7;
    int adapt_window = 31;
    double adapt_sensitivity = 0.15;
    int min_area = 30;

    void validate() const {
        if (strel_radius < 1) throw Error("strel_radius must be >= 1");
        if (adapt_window < 3 || adapt_window % 2 == 0) throw Error("adapt_window must be odd and >= 3");
        if (!(adapt_sensitivity > 0.0 && adapt_sensitivity < 1.0)) throw Error("adapt_sensitivity must be in (0,1)");
        if (min_area < 0) throw Error("min_area must be >= 0");
    }
};

namespace detail {

/// Half-width of the digital disk x^2 + y^2 <= r^2 on each row offset -r..r.
inline std::vector<int> disk_half_widths(int r) {
    std::vector<int> hw(static_cast<std::size_t>(2 * r + 1));
    for (int dy = -r; dy <= r; ++dy) {
        int w = 0;
        while ((w + 1) * (w + 1) + dy * dy <= r * r) ++w;
        hw[static_cast<std::size_t>(dy + r)] = w;
    }
    return hw;
}

/// Sliding extremum over [x-hw, x+hw] clipped to the row.
template <class Better>
void sliding_extremum(const double* row, int n, int hw, double* out, Better better) {
    std::deque<int> q;
    int next = 0;
    for (int x = 0; x < n; ++x) {
        const int hi = std::min(n - 1, x + hw);
        while (next <= hi) {
            while (!q.empty() && !better(row[q.back()], row[next])) q.pop_back();
            q.push_back(next++);
        }
        while (q.front() < x - hw) q.pop_front();
        out[x] = row[q.front()];
    }
}

/// Flat-disk dilation (Better = greater) or erosion (Better = less); pixels
/// outside the image do not participate.
template <class Better>
GrayImage disk_filter(const GrayImage& img, int r, Better better, double identity) {
    const auto hw = disk_half_widths(r);
    GrayImage out(img.width, img.height, identity);
    std::vector<double> tmp(static_cast<std::size_t>(img.width));
    for (int sy = 0; sy < img.height; ++sy) {
        const double* row = img.data.data() + static_cast<std::size_t>(sy) * img.width;
        for (int dy = -r; dy <= r; ++dy) {
            const int y = sy - dy;
            if (y < 0 || y >= img.height) continue;
            sliding_extremum(row, img.width, hw[static_cast<std::size_t>(dy + r)], tmp.data(), better);
            double* orow = out.data.data() + static_cast<std::size_t>(y) * img.width;
            for (int x = 0; x < img.width; ++x)
                if (better(tmp[static_cast<std::size_t>(x)], orow[x])) orow[x] = tmp[static_cast<std::size_t>(x)];
        }
    }
    return out;
}

}  // namespace detail

inline GrayImage dilate_disk(const GrayImage& img, int r) {
    return detail::disk_filter(img, r, [](double a, double b) { return a > b; },
                               -std::numeric_limits<double>::infinity());
}

inline GrayImage erode_disk(const GrayImage& img, int r) {
    return detail::disk_filter(img, r, [](double a, double b) { return a < b; },
                               std::numeric_limits<double>::infinity());
}

inline GrayImage close_disk(const GrayImage& img, int r) { return erode_disk(dilate_disk(img, r), r); }

/// Black top-hat: closing(I) - I. Thin dark structures come out bright.
inline GrayImage bottom_hat(const GrayImage& img, int strel_radius) {
    if (img.empty()) throw Error("empty input");
    if (strel_radius < 1) throw Error("strel_radius must be >= 1");
    GrayImage out = close_disk(img, strel_radius);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = std::max(0.0, out.data[i] - img.data[i]);
    return out;
}

/// A pixel is set iff it exceeds (1 + sensitivity) times the mean of the
/// window centred on it; the window is truncated at the image border.
inline BinaryMask adaptive_threshold(const GrayImage& img, int window, double sensitivity) {
    if (img.empty()) throw Error("empty input");
    if (window < 3 || window % 2 == 0) throw Error("window must be odd and >= 3");
    if (window > img.width && window > img.height) throw Error("window larger than image");

    const int w = img.width, h = img.height;
    const auto stride = static_cast<std::size_t>(w + 1);
    std::vector<double> sat(stride * static_cast<std::size_t>(h + 1), 0.0);
    for (int y = 0; y < h; ++y) {
        double run = 0.0;
        for (int x = 0; x < w; ++x) {
            run += img.at(x, y);
            sat[(y + 1) * stride + (x + 1)] = sat[y * stride + (x + 1)] + run;
        }
    }
    const int half = window / 2;
    BinaryMask out(w, h);
    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - half), y1 = std::min(h, y + half + 1);
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(0, x - half), x1 = std::min(w, x + half + 1);
            const double sum = sat[y1 * stride + x1] - sat[y0 * stride + x1] - sat[y1 * stride + x0] + sat[y0 * stride + x0];
            const double mean = sum / static_cast<double>((x1 - x0) * (y1 - y0));
            out.set(x, y, img.at(x, y) > (1.0 + sensitivity) * mean);
        }
    }
    return out;
}

/// 8-connected component labels (0 = background, 1..n) in raster order of
/// first appearance.
struct Components {
    std::vector<int> labels;
    std::vector<std::size_t> areas;  // indexed by label - 1
};

inline Components label_components(const BinaryMask& m) {
    Components c;
    c.labels.assign(m.size(), 0);
    std::vector<int> stack;
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            const auto idx = static_cast<std::size_t>(y) * m.width + x;
            if (!m.data[idx] || c.labels[idx]) continue;
            const int label = static_cast<int>(c.areas.size()) + 1;
            std::size_t area = 0;
            c.labels[idx] = label;
            stack.assign(1, static_cast<int>(idx));
            while (!stack.empty()) {
                const int cur = stack.back();
                stack.pop_back();
                ++area;
                const int cx = cur % m.width, cy = cur / m.width;
                for (int k = 0; k < 8; ++k) {
                    const int nx = cx + kDx8[k], ny = cy + kDy8[k];
                    if (!m.get(nx, ny)) continue;
                    const auto nidx = static_cast<std::size_t>(ny) * m.width + nx;
                    if (c.labels[nidx]) continue;
                    c.labels[nidx] = label;
                    stack.push_back(static_cast<int>(nidx));
                }
            }
            c.areas.push_back(area);
        }
    }
    return c;
}

/// Drops every 8-connected component with fewer than min_area pixels.
inline BinaryMask area_clean(const BinaryMask& mask, int min_area) {
    if (min_area <= 0) return mask;
    const auto comps = label_components(mask);
    BinaryMask out(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const int l = comps.labels[i];
        out.data[i] = (l && comps.areas[static_cast<std::size_t>(l - 1)] >= static_cast<std::size_t>(min_area)) ? 1 : 0;
    }
    return out;
}

namespace detail {

/// Neighbourhood code: bit k set iff neighbour k (kDx8/kDy8 order) is foreground.
inline unsigned neighbour_code(const BinaryMask& m, int x, int y) {
    unsigned code = 0;
    for (int k = 0; k < 8; ++k)
        if (m.get(x + kDx8[k], y + kDy8[k])) code |= 1u << k;
    return code;
}

/// Simple-point table for (8, 4) connectivity: deleting the centre leaves the
/// number of foreground 8-components and background 4-components unchanged.
/// Built by brute force over the 3x3 neighbourhood.
inline const std::array<bool, 256>& simple_table() {
    static const std::array<bool, 256> table = [] {
        std::array<bool, 256> t{};
        for (unsigned code = 0; code < 256; ++code) {
            auto fg = [&](int k) { return (code >> k) & 1u; };
            // Foreground 8-components among the neighbours.
            int fg_comp = 0;
            unsigned seen = 0;
            for (int s = 0; s < 8; ++s) {
                if (!fg(s) || (seen >> s & 1u)) continue;
                ++fg_comp;
                unsigned frontier = 1u << s;
                seen |= frontier;
                while (frontier) {
                    const int a = std::countr_zero(frontier);
                    frontier &= frontier - 1;
                    for (int b = 0; b < 8; ++b) {
                        if (!fg(b) || (seen >> b & 1u)) continue;
                        if (std::abs(kDx8[a] - kDx8[b]) <= 1 && std::abs(kDy8[a] - kDy8[b]) <= 1) {
                            seen |= 1u << b;
                            frontier |= 1u << b;
                        }
                    }
                }
            }
            // Background 4-components among the neighbours that touch a 4-neighbour.
            int bg_comp = 0;
            seen = 0;
            for (int s = 0; s < 8; s += 2) {
                if (fg(s) || (seen >> s & 1u)) continue;
                ++bg_comp;
                unsigned frontier = 1u << s;
                seen |= frontier;
                while (frontier) {
                    const int a = std::countr_zero(frontier);
                    frontier &= frontier - 1;
                    for (int b = 0; b < 8; ++b) {
                        if (fg(b) || (seen >> b & 1u)) continue;
                        if (std::abs(kDx8[a] - kDx8[b]) + std::abs(kDy8[a] - kDy8[b]) == 1) {
                            seen |= 1u << b;
                            frontier |= 1u << b;
                        }
                    }
                }
            }
            t[code] = fg_comp == 1 && bg_comp == 1;
        }
        return t;
    }();
    return table;
}

}  // namespace detail

inline bool is_simple_point(const BinaryMask& m, int x, int y) {
    return detail::simple_table()[detail::neighbour_code(m, x, y)];
}

/// Sequential directional thinning. Each pass deletes border pixels (facing
/// N, S, E, W in turn) that are simple and not end points; passes repeat until
/// nothing changes. Every deletion is a simple-point deletion, so the number
/// of 8-components and 4-holes is preserved. The only 2x2 blocks that can
/// survive are ones where no pixel is deletable without cutting a branch.
inline BinaryMask skeletonize(const BinaryMask& mask) {
    BinaryMask m = mask;
    constexpr int kFace[4] = {0, 4, 2, 6};  // N, S, E, W
    const auto& simple = detail::simple_table();
    bool changed = true;
    while (changed) {
        changed = false;
        for (int dir : kFace) {
            // Candidates are the border pixels at the start of the sub-pass;
            // each is re-checked before deletion so topology is preserved.
            std::vector<Pixel> border;
            for (int y = 0; y < m.height; ++y)
                for (int x = 0; x < m.width; ++x)
                    if (m.at(x, y) && !m.get(x + kDx8[dir], y + kDy8[dir])) border.push_back({x, y});
            for (auto [x, y] : border) {
                const unsigned code = detail::neighbour_code(m, x, y);
                if (std::popcount(code) < 2 || !simple[code]) continue;
                m.set(x, y, false);
                changed = true;
            }
        }
    }
    return m;
}

/// True if some 2x2 all-set block contains a pixel that thinning could still
/// delete, i.e. the mask has not been reduced to a one-pixel-wide skeleton.
inline bool has_reducible_block(const BinaryMask& m) {
    const auto& simple = detail::simple_table();
    for (int y = 0; y + 1 < m.height; ++y) {
        for (int x = 0; x + 1 < m.width; ++x) {
            if (!(m.at(x, y) && m.at(x + 1, y) && m.at(x, y + 1) && m.at(x + 1, y + 1))) continue;
            for (auto [dx, dy] : {std::pair{0, 0}, {1, 0}, {0, 1}, {1, 1}})
                if (simple[detail::neighbour_code(m, x + dx, y + dy)]) return true;
        }
    }
    return false;
}

/// bottom-hat -> adaptive threshold -> area cleaning.
inline BinaryMask segment(const GrayImage& img, const SegmentationParams& p) {
    p.validate();
    const GrayImage enhanced = bottom_hat(img, p.strel_radius);
    return area_clean(adaptive_threshold(enhanced, p.adapt_window, p.adapt_sensitivity), p.min_area);
}

}  // namespace craq
