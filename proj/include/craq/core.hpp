#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace craq {

/// Every recoverable failure in the library surfaces as this exception.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Integer pixel coordinate, x to the right and y downwards.
struct Pixel {
    int x = 0;
    int y = 0;

    friend constexpr bool operator==(Pixel, Pixel) = default;
    friend constexpr auto operator<=>(Pixel a, Pixel b) {
        if (auto c = a.y <=> b.y; c != 0) return c;
        return a.x <=> b.x;
    }
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend constexpr bool operator==(Vec2, Vec2) = default;
    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline Vec2 to_vec(Pixel p) { return {static_cast<double>(p.x), static_cast<double>(p.y)}; }

inline constexpr double kPi = 3.14159265358979323846;

/// The eight neighbour offsets in clockwise order starting north.
inline constexpr int kDx8[8] = {0, 1, 1, 1, 0, -1, -1, -1};
inline constexpr int kDy8[8] = {-1, -1, 0, 1, 1, 1, 0, -1};

inline bool adjacent8(Pixel a, Pixel b) {
    return a != b && std::abs(a.x - b.x) <= 1 && std::abs(a.y - b.y) <= 1;
}

/// Arc length of an 8-connected (or arbitrary) polyline.
template <class Point>
double polyline_length(const std::vector<Point>& pts) {
    double len = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double dx = static_cast<double>(pts[i].x) - static_cast<double>(pts[i - 1].x);
        const double dy = static_cast<double>(pts[i].y) - static_cast<double>(pts[i - 1].y);
        len += std::hypot(dx, dy);
    }
    return len;
}

}  // namespace craq
