#pragma once

#include <cstdint>
#include <vector>

#include "sseg/geometry.hpp"
#include "sseg/image.hpp"
#include "sseg/scene.hpp"

namespace sseg {

// A detected or ground-truth structure: a pixel set stored over its tight
// bbox, plus the hull polygon when hull footprints are in use.
struct ObjectInstance {
    int cls = 0;
    int level = 0;
    Box bbox;
    std::vector<std::uint8_t> mask;  // bbox-local, 1 = inside
    std::int64_t area = 0;
    std::vector<Point> hull;

    bool at(int y, int x) const {
        if (y < bbox.y0 || y >= bbox.y1 || x < bbox.x0 || x >= bbox.x1) return false;
        return mask[static_cast<std::size_t>(y - bbox.y0) * bbox.width() + (x - bbox.x0)] != 0;
    }
};

// 4-connected components of one class of a level mask; background and
// border ids never form instances. With use_hull every component is
// replaced by its filled convex hull.
std::vector<ObjectInstance> extract_instances(const LabelImage& mask, int cls, bool use_hull,
                                              int level = 0);

double instance_iou(const ObjectInstance& a, const ObjectInstance& b);

struct MatchResult {
    struct Pair {
        int pred = -1, gt = -1;
        double iou = 0.0;
    };
    std::vector<Pair> matches;
    std::vector<int> unmatched_pred;  // false positives
    std::vector<int> unmatched_gt;    // false negatives
    std::int64_t tp = 0, fp = 0, fn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    bool precision_defined = true, recall_defined = true;
};

// Candidate pairs at IoU >= threshold, greedily matched one-to-one in
// descending IoU order.
MatchResult match_instances(const std::vector<ObjectInstance>& preds,
                            const std::vector<ObjectInstance>& gts, double threshold);

// Builds an instance from an explicit pixel-rectangle (tests, constructed
// ground truth).
ObjectInstance instance_from_box(const Box& box, int cls = 0, int level = 0);

}  // namespace sseg
