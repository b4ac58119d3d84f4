#include <algorithm>
#include <cmath>

#include "sseg/geometry.hpp"
#include "sseg/rng.hpp"
#include "sseg/scene.hpp"

namespace sseg {

namespace {

constexpr float kPaper = 1.0f;

void fill_rect(GrayImage& img, const Box& b, float v) {
    for (int y = std::max(0, b.y0); y < std::min(img.h, b.y1); ++y) {
        for (int x = std::max(0, b.x0); x < std::min(img.w, b.x1); ++x) img.at(y, x) = v;
    }
}

void stroke_rect(GrayImage& img, const Box& b, float v) {
    fill_rect(img, Box{b.x0, b.y0, b.x1, b.y0 + 1}, v);
    fill_rect(img, Box{b.x0, b.y1 - 1, b.x1, b.y1}, v);
    fill_rect(img, Box{b.x0, b.y0, b.x0 + 1, b.y1}, v);
    fill_rect(img, Box{b.x1 - 1, b.y0, b.x1, b.y1}, v);
}

// Word-textured bar: dark word segments separated by small gaps.
void draw_textrun(GrayImage& img, const Box& b, Rng& rng) {
    int x = b.x0;
    while (x < b.x1) {
        const int ww = static_cast<int>(rng.next_int(4, 13));
        const float ink = static_cast<float>(rng.next_real(0.08, 0.30));
        fill_rect(img, Box{x, b.y0 + 1, std::min(b.x1, x + ww), b.y1 - 1}, ink);
        x += ww + static_cast<int>(rng.next_int(2, 3));
    }
}

void draw_widget(GrayImage& img, const Box& b, Rng& rng) {
    if (b.width() <= 10 || b.height() <= 8 || rng.next_bool(0.6)) {
        stroke_rect(img, b, 0.25f);
    } else {
        fill_rect(img, Box{b.x0, b.y1 - 2, b.x1, b.y1 - 1}, 0.25f);  // underline style
    }
}

void draw_table(GrayImage& img, const DocumentScene& scene, const SceneObject& table, Rng& rng) {
    stroke_rect(img, table.bbox, 0.2f);
    for (int c : table.children) {
        const auto& o = scene.by_id(c);
        stroke_rect(img, o.bbox, 0.35f);
        // sprinkle text-like marks into row cells
        if (o.cls == "table_row" && rng.next_bool(0.8)) {
            const int h = std::max(2, o.bbox.height() - 4);
            const int y0 = o.bbox.y0 + (o.bbox.height() - h) / 2;
            int x = o.bbox.x0 + 3;
            while (x + 6 < o.bbox.x1) {
                const int ww = static_cast<int>(rng.next_int(5, 12));
                if (rng.next_bool(0.55)) {
                    fill_rect(img, Box{x, y0, std::min(o.bbox.x1 - 2, x + ww), y0 + h},
                              static_cast<float>(rng.next_real(0.1, 0.4)));
                }
                x += ww + 4;
            }
        }
    }
}

void draw_list(GrayImage& img, const SceneObject& list, Rng& rng) {
    int y = list.bbox.y0;
    while (y + 4 <= list.bbox.y1) {
        const int h = static_cast<int>(rng.next_int(4, 7));
        fill_rect(img, Box{list.bbox.x0, y + 1, list.bbox.x0 + 3, y + 4}, 0.15f);
        int x = list.bbox.x0 + 6;
        while (x < list.bbox.x1) {
            const int ww = static_cast<int>(rng.next_int(4, 13));
            fill_rect(img, Box{x, y, std::min(list.bbox.x1, x + ww), y + h},
                      static_cast<float>(rng.next_real(0.1, 0.3)));
            x += ww + 2;
        }
        y += h + static_cast<int>(rng.next_int(3, 5));
    }
}

std::vector<Point> corner_points(const std::vector<Box>& boxes) {
    std::vector<Point> pts;
    pts.reserve(boxes.size() * 4);
    for (const auto& b : boxes) {
        pts.push_back({b.x0, b.y0});
        pts.push_back({b.x1 - 1, b.y0});
        pts.push_back({b.x0, b.y1 - 1});
        pts.push_back({b.x1 - 1, b.y1 - 1});
    }
    return pts;
}

struct Footprint {
    Box bbox;                         // tight, half-open
    std::vector<std::uint8_t> mask;   // bbox-local
    bool at(int y, int x) const {     // canvas coords
        if (y < bbox.y0 || y >= bbox.y1 || x < bbox.x0 || x >= bbox.x1) return false;
        return mask[static_cast<std::size_t>(y - bbox.y0) * bbox.width() + (x - bbox.x0)] != 0;
    }
};

Footprint hull_footprint(const std::vector<Box>& element_boxes) {
    const auto hull = convex_hull(corner_points(element_boxes));
    const auto spans = rasterize_convex(hull);
    Footprint fp;
    std::int64_t x0 = 1'000'000'000, x1 = -1, y0 = 1'000'000'000, y1 = -1;
    for (const auto& s : spans) {
        if (s.x_lo > s.x_hi) continue;
        x0 = std::min(x0, s.x_lo);
        x1 = std::max(x1, s.x_hi + 1);
        y0 = std::min(y0, s.y);
        y1 = std::max(y1, s.y + 1);
    }
    fp.bbox = Box{static_cast<int>(x0), static_cast<int>(y0), static_cast<int>(x1), static_cast<int>(y1)};
    fp.mask.assign(static_cast<std::size_t>(fp.bbox.width()) * fp.bbox.height(), 0);
    for (const auto& s : spans) {
        for (std::int64_t x = s.x_lo; x <= s.x_hi; ++x) {
            fp.mask[static_cast<std::size_t>(s.y - fp.bbox.y0) * fp.bbox.width() + (x - fp.bbox.x0)] = 1;
        }
    }
    return fp;
}

}  // namespace

GrayImage render_scene(const DocumentScene& scene) {
    GrayImage img(scene.canvas_h, scene.canvas_w, kPaper);
    for (const auto& obj : scene.objects) {
        Rng rng(mix_seed(scene.seed, 0xd0a1 + static_cast<std::uint64_t>(obj.id)));
        if (obj.cls == "textrun") {
            draw_textrun(img, obj.bbox, rng);
        } else if (obj.cls == "widget") {
            draw_widget(img, obj.bbox, rng);
        } else if (obj.cls == "table") {
            draw_table(img, scene, obj, rng);
        } else if (obj.cls == "list") {
            draw_list(img, obj, rng);
        }
    }
    return img;
}

std::vector<LabelImage> rasterize_masks(const DocumentScene& scene, const ClassSchema& schema) {
    const int bw = scene.params.border_width;
    std::vector<LabelImage> masks;
    for (int l = 0; l < schema.level_count(); ++l) {
        masks.emplace_back(scene.canvas_h, scene.canvas_w, ClassSchema::kBackground);
    }

    std::vector<Footprint> footprints(scene.objects.size());
    // interiors first, then border rings only over background so no ring
    // ever eats into a structure of its own level
    for (const auto& obj : scene.objects) {
        const int li = obj.level - 1;
        if (li < 0 || li >= schema.level_count()) continue;
        const int cls = schema.class_id(li, obj.cls);
        auto& mask = masks[static_cast<std::size_t>(li)];
        auto fp = hull_footprint(scene.element_boxes(obj));
        for (int y = std::max(0, fp.bbox.y0); y < std::min(scene.canvas_h, fp.bbox.y1); ++y) {
            for (int x = std::max(0, fp.bbox.x0); x < std::min(scene.canvas_w, fp.bbox.x1); ++x) {
                if (fp.at(y, x)) mask.at(y, x) = cls;
            }
        }
        footprints[static_cast<std::size_t>(obj.id)] = std::move(fp);
    }

    for (const auto& obj : scene.objects) {
        const int li = obj.level - 1;
        if (li < 0 || li >= schema.level_count()) continue;
        auto& mask = masks[static_cast<std::size_t>(li)];
        const auto& fp = footprints[static_cast<std::size_t>(obj.id)];
        const int y0 = std::max(0, fp.bbox.y0 - bw);
        const int y1 = std::min(scene.canvas_h, fp.bbox.y1 + bw);
        const int x0 = std::max(0, fp.bbox.x0 - bw);
        const int x1 = std::min(scene.canvas_w, fp.bbox.x1 + bw);
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                if (mask.at(y, x) != ClassSchema::kBackground) continue;
                bool near = false;
                for (int dy = -bw; dy <= bw && !near; ++dy) {
                    for (int dx = -bw; dx <= bw && !near; ++dx) {
                        if (fp.at(y + dy, x + dx)) near = true;
                    }
                }
                if (near) mask.at(y, x) = ClassSchema::kBorder;
            }
        }
    }
    return masks;
}

std::vector<double> mask_density(const std::vector<LabelImage>& masks) {
    std::vector<double> out;
    for (const auto& m : masks) {
        std::int64_t nonbg = 0;
        for (const auto v : m.px) {
            if (v != ClassSchema::kBackground) ++nonbg;
        }
        out.push_back(static_cast<double>(nonbg) / static_cast<double>(m.px.size()));
    }
    return out;
}

}  // namespace sseg
