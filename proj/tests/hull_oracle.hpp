#pragma once

// O(n^3) convex-hull oracle used to cross-check the production hull. A
// directed pair (a,b) is a CCW hull edge when every other point lies
// strictly left of it or on the segment between a and b.

#include <algorithm>
#include <map>
#include <vector>

#include "sseg/geometry.hpp"

namespace ssegtest {

inline std::int64_t ocross(const sseg::Point& o, const sseg::Point& a, const sseg::Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline bool on_segment(const sseg::Point& a, const sseg::Point& b, const sseg::Point& p) {
    if (ocross(a, b, p) != 0) return false;
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
           std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

// Hull vertices in CCW order; degenerate sets collapse to 1 or 2 points.
inline std::vector<sseg::Point> brute_force_hull(std::vector<sseg::Point> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const std::size_t n = pts.size();
    if (n <= 2) return pts;

    // collinear input set?
    bool collinear = true;
    for (std::size_t i = 2; i < n && collinear; ++i) {
        if (ocross(pts[0], pts[1], pts[i]) != 0) collinear = false;
    }
    if (collinear) return {pts.front(), pts.back()};

    std::map<sseg::Point, sseg::Point> next;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            bool edge = true;
            for (std::size_t k = 0; k < n && edge; ++k) {
                if (k == i || k == j) continue;
                const std::int64_t c = ocross(pts[i], pts[j], pts[k]);
                if (c < 0) edge = false;
                // collinear beyond the segment means (i,j) is only a sub-edge
                if (c == 0 && !on_segment(pts[i], pts[j], pts[k])) edge = false;
            }
            if (edge) next[pts[i]] = pts[j];
        }
    }

    std::vector<sseg::Point> hull;
    auto it = next.begin();
    sseg::Point start = it->first;
    sseg::Point cur = start;
    do {
        hull.push_back(cur);
        cur = next.at(cur);
    } while (!(cur == start) && hull.size() <= n);
    return hull;
}

// Membership test straight off the oracle hull.
inline bool oracle_inside(const std::vector<sseg::Point>& hull, const sseg::Point& p) {
    if (hull.empty()) return false;
    if (hull.size() == 1) return hull[0] == p;
    if (hull.size() == 2) return on_segment(hull[0], hull[1], p);
    for (std::size_t i = 0; i < hull.size(); ++i) {
        if (ocross(hull[i], hull[(i + 1) % hull.size()], p) < 0) return false;
    }
    return true;
}

}  // namespace ssegtest
