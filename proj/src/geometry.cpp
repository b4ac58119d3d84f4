#include "sseg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sseg {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
    return -floor_div(-a, b);
}

}  // namespace

// Andrew's monotone chain with strict turns.
std::vector<Point> convex_hull(std::vector<Point> points) {
    if (points.empty()) throw std::invalid_argument("convex_hull: no points");
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    const std::size_t n = points.size();
    if (n <= 2) return points;

    std::vector<Point> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], points[i]) <= 0) --k;
        hull[k++] = points[i];
    }
    const std::size_t lower = k + 1;
    for (std::size_t i = n - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], points[i]) <= 0) --k;
        hull[k++] = points[i];
    }
    hull.resize(k - 1);
    if (hull.size() == 2 && hull[0] == hull[1]) hull.resize(1);
    return hull;
}

bool point_in_convex(const std::vector<Point>& hull, const Point& p) {
    if (hull.empty()) return false;
    if (hull.size() == 1) return hull[0] == p;
    if (hull.size() == 2) {
        if (cross(hull[0], hull[1], p) != 0) return false;
        return std::min(hull[0].x, hull[1].x) <= p.x && p.x <= std::max(hull[0].x, hull[1].x) &&
               std::min(hull[0].y, hull[1].y) <= p.y && p.y <= std::max(hull[0].y, hull[1].y);
    }
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const Point& a = hull[i];
        const Point& b = hull[(i + 1) % hull.size()];
        if (cross(a, b, p) < 0) return false;
    }
    return true;
}

double polygon_area(const std::vector<Point>& poly) {
    if (poly.size() < 3) return 0.0;
    std::int64_t twice = 0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point& a = poly[i];
        const Point& b = poly[(i + 1) % poly.size()];
        twice += a.x * b.y - b.x * a.y;
    }
    return 0.5 * static_cast<double>(twice);
}

// Each CCW edge (a -> b) constrains cross(b-a, p-a) >= 0; for a fixed row y
// that is a half-line in x with integer endpoints, so the covered pixels of
// the row are the intersection of per-edge bounds.
std::vector<RowSpan> rasterize_convex(const std::vector<Point>& hull) {
    std::vector<RowSpan> rows;
    if (hull.empty()) return rows;

    std::int64_t ymin = hull[0].y, ymax = hull[0].y;
    for (const auto& p : hull) {
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }

    if (hull.size() <= 2) {
        const Point a = hull.front();
        const Point b = hull.back();
        for (std::int64_t y = ymin; y <= ymax; ++y) {
            RowSpan span{y, 0, -1};
            // integer points of the segment on this row
            if (a.y == b.y) {
                span.x_lo = std::min(a.x, b.x);
                span.x_hi = std::max(a.x, b.x);
            } else {
                // x = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y), kept only
                // when it lands on an integer
                const std::int64_t num = (y - a.y) * (b.x - a.x);
                const std::int64_t den = b.y - a.y;
                if (num % den == 0) {
                    span.x_lo = span.x_hi = a.x + num / den;
                }
            }
            rows.push_back(span);
        }
        return rows;
    }

    for (std::int64_t y = ymin; y <= ymax; ++y) {
        std::int64_t xlo = std::numeric_limits<std::int64_t>::min();
        std::int64_t xhi = std::numeric_limits<std::int64_t>::max();
        bool empty = false;
        for (std::size_t i = 0; i < hull.size() && !empty; ++i) {
            const Point& a = hull[i];
            const Point& b = hull[(i + 1) % hull.size()];
            // cross = (b.x-a.x)(y-a.y) - (b.y-a.y)(x-a.x) >= 0  =>  k*x <= c
            const std::int64_t k = b.y - a.y;
            const std::int64_t c = (b.x - a.x) * (y - a.y) + k * a.x;
            if (k > 0) {
                xhi = std::min(xhi, floor_div(c, k));
            } else if (k < 0) {
                xlo = std::max(xlo, ceil_div(c, k));
            } else if (c < 0) {
                empty = true;
            }
        }
        RowSpan span{y, 0, -1};
        if (!empty && xlo <= xhi) {
            span.x_lo = xlo;
            span.x_hi = xhi;
        }
        rows.push_back(span);
    }
    return rows;
}

}  // namespace sseg
