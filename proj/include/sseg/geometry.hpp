#pragma once

#include <cstdint>
#include <vector>

namespace sseg {

struct Point {
    std::int64_t x = 0, y = 0;
    bool operator==(const Point&) const = default;
    auto operator<=>(const Point&) const = default;
};

inline std::int64_t cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Minimal convex polygon containing all points, counter-clockwise (positive
// shoelace), collinear interior vertices dropped. Degenerate inputs yield a
// single point or a two-point segment.
std::vector<Point> convex_hull(std::vector<Point> points);

// Exact point-in-polygon test for a CCW convex polygon (boundary counts as
// inside). Handles the degenerate point/segment cases.
bool point_in_convex(const std::vector<Point>& hull, const Point& p);

double polygon_area(const std::vector<Point>& poly);

// Per-row pixel spans [x_lo, x_hi] (inclusive) of the filled hull, rows
// ordered from the hull's min y. A row with no covered pixel centers has
// x_lo > x_hi.
struct RowSpan {
    std::int64_t y = 0;
    std::int64_t x_lo = 0, x_hi = -1;
};
std::vector<RowSpan> rasterize_convex(const std::vector<Point>& hull);

}  // namespace sseg
