#include "sseg/instances.hpp"

#include <algorithm>

namespace sseg {

namespace {

ObjectInstance from_pixels(const std::vector<Point>& pixels, int cls, int level, bool use_hull) {
    ObjectInstance inst;
    inst.cls = cls;
    inst.level = level;
    if (use_hull) {
        inst.hull = convex_hull(std::vector<Point>(pixels));
        const auto spans = rasterize_convex(inst.hull);
        std::int64_t x0 = 1'000'000'000, x1 = -1, y0 = 1'000'000'000, y1 = -1;
        for (const auto& s : spans) {
            if (s.x_lo > s.x_hi) continue;
            x0 = std::min(x0, s.x_lo);
            x1 = std::max(x1, s.x_hi + 1);
            y0 = std::min(y0, s.y);
            y1 = std::max(y1, s.y + 1);
        }
        inst.bbox = Box{static_cast<int>(x0), static_cast<int>(y0), static_cast<int>(x1),
                        static_cast<int>(y1)};
        inst.mask.assign(static_cast<std::size_t>(inst.bbox.width()) * inst.bbox.height(), 0);
        for (const auto& s : spans) {
            for (std::int64_t x = s.x_lo; x <= s.x_hi; ++x) {
                inst.mask[static_cast<std::size_t>(s.y - inst.bbox.y0) * inst.bbox.width() +
                          (x - inst.bbox.x0)] = 1;
                ++inst.area;
            }
        }
    } else {
        std::int64_t x0 = 1'000'000'000, x1 = -1, y0 = 1'000'000'000, y1 = -1;
        for (const auto& p : pixels) {
            x0 = std::min(x0, p.x);
            x1 = std::max(x1, p.x + 1);
            y0 = std::min(y0, p.y);
            y1 = std::max(y1, p.y + 1);
        }
        inst.bbox = Box{static_cast<int>(x0), static_cast<int>(y0), static_cast<int>(x1),
                        static_cast<int>(y1)};
        inst.mask.assign(static_cast<std::size_t>(inst.bbox.width()) * inst.bbox.height(), 0);
        for (const auto& p : pixels) {
            inst.mask[static_cast<std::size_t>(p.y - inst.bbox.y0) * inst.bbox.width() +
                      (p.x - inst.bbox.x0)] = 1;
        }
        inst.area = static_cast<std::int64_t>(pixels.size());
    }
    return inst;
}

}  // namespace

std::vector<ObjectInstance> extract_instances(const LabelImage& mask, int cls, bool use_hull,
                                              int level) {
    std::vector<ObjectInstance> out;
    if (cls == ClassSchema::kBackground || cls == ClassSchema::kBorder) return out;

    std::vector<std::uint8_t> seen(mask.px.size(), 0);
    std::vector<Point> stack;
    for (int sy = 0; sy < mask.h; ++sy) {
        for (int sx = 0; sx < mask.w; ++sx) {
            const std::size_t si = static_cast<std::size_t>(sy) * mask.w + sx;
            if (seen[si] || mask.px[si] != cls) continue;
            std::vector<Point> pixels;
            stack.clear();
            stack.push_back({sx, sy});
            seen[si] = 1;
            while (!stack.empty()) {
                const Point p = stack.back();
                stack.pop_back();
                pixels.push_back(p);
                const int nx[4] = {static_cast<int>(p.x) - 1, static_cast<int>(p.x) + 1,
                                   static_cast<int>(p.x), static_cast<int>(p.x)};
                const int ny[4] = {static_cast<int>(p.y), static_cast<int>(p.y),
                                   static_cast<int>(p.y) - 1, static_cast<int>(p.y) + 1};
                for (int k = 0; k < 4; ++k) {
                    if (nx[k] < 0 || nx[k] >= mask.w || ny[k] < 0 || ny[k] >= mask.h) continue;
                    const std::size_t ni = static_cast<std::size_t>(ny[k]) * mask.w + nx[k];
                    if (!seen[ni] && mask.px[ni] == cls) {
                        seen[ni] = 1;
                        stack.push_back({nx[k], ny[k]});
                    }
                }
            }
            out.push_back(from_pixels(pixels, cls, level, use_hull));
        }
    }
    return out;
}

double instance_iou(const ObjectInstance& a, const ObjectInstance& b) {
    const int y0 = std::max(a.bbox.y0, b.bbox.y0);
    const int y1 = std::min(a.bbox.y1, b.bbox.y1);
    const int x0 = std::max(a.bbox.x0, b.bbox.x0);
    const int x1 = std::min(a.bbox.x1, b.bbox.x1);
    std::int64_t inter = 0;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            if (a.at(y, x) && b.at(y, x)) ++inter;
        }
    }
    const std::int64_t uni = a.area + b.area - inter;
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

MatchResult match_instances(const std::vector<ObjectInstance>& preds,
                            const std::vector<ObjectInstance>& gts, double threshold) {
    struct Cand {
        double iou;
        int pred, gt;
    };
    std::vector<Cand> cands;
    for (int p = 0; p < static_cast<int>(preds.size()); ++p) {
        for (int g = 0; g < static_cast<int>(gts.size()); ++g) {
            const double iou = instance_iou(preds[static_cast<std::size_t>(p)],
                                            gts[static_cast<std::size_t>(g)]);
            if (iou >= threshold) cands.push_back({iou, p, g});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.pred != b.pred) return a.pred < b.pred;
        return a.gt < b.gt;
    });

    MatchResult res;
    std::vector<std::uint8_t> pred_used(preds.size(), 0), gt_used(gts.size(), 0);
    for (const auto& c : cands) {
        if (pred_used[static_cast<std::size_t>(c.pred)] || gt_used[static_cast<std::size_t>(c.gt)]) {
            continue;
        }
        pred_used[static_cast<std::size_t>(c.pred)] = 1;
        gt_used[static_cast<std::size_t>(c.gt)] = 1;
        res.matches.push_back({c.pred, c.gt, c.iou});
    }
    for (int p = 0; p < static_cast<int>(preds.size()); ++p) {
        if (!pred_used[static_cast<std::size_t>(p)]) res.unmatched_pred.push_back(p);
    }
    for (int g = 0; g < static_cast<int>(gts.size()); ++g) {
        if (!gt_used[static_cast<std::size_t>(g)]) res.unmatched_gt.push_back(g);
    }
    res.tp = static_cast<std::int64_t>(res.matches.size());
    res.fp = static_cast<std::int64_t>(res.unmatched_pred.size());
    res.fn = static_cast<std::int64_t>(res.unmatched_gt.size());
    res.precision_defined = (res.tp + res.fp) > 0;
    res.recall_defined = (res.tp + res.fn) > 0;
    res.precision = res.precision_defined
                        ? static_cast<double>(res.tp) / static_cast<double>(res.tp + res.fp)
                        : 0.0;
    res.recall = res.recall_defined
                     ? static_cast<double>(res.tp) / static_cast<double>(res.tp + res.fn)
                     : 0.0;
    res.f1 = (res.precision + res.recall) > 0.0
                 ? 2.0 * res.precision * res.recall / (res.precision + res.recall)
                 : 0.0;
    return res;
}

ObjectInstance instance_from_box(const Box& box, int cls, int level) {
    ObjectInstance inst;
    inst.cls = cls;
    inst.level = level;
    inst.bbox = box;
    inst.mask.assign(static_cast<std::size_t>(box.width()) * box.height(), 1);
    inst.area = box.area();
    inst.hull = {{box.x0, box.y0}, {box.x1 - 1, box.y0}, {box.x1 - 1, box.y1 - 1}, {box.x0, box.y1 - 1}};
    return inst;
}

}  // namespace sseg
