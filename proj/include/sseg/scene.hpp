#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sseg/image.hpp"
#include "sseg/schema.hpp"

namespace sseg {

// Pixel box, half-open on both axes.
struct Box {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    std::int64_t area() const { return static_cast<std::int64_t>(width()) * height(); }
    bool empty() const { return x1 <= x0 || y1 <= y0; }
    bool contains(const Box& o) const {
        return x0 <= o.x0 && y0 <= o.y0 && o.x1 <= x1 && o.y1 <= y1;
    }
    bool intersects(const Box& o) const {
        return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
    }
    Box united(const Box& o) const {
        if (empty()) return o;
        if (o.empty()) return *this;
        return Box{std::min(x0, o.x0), std::min(y0, o.y0), std::max(x1, o.x1), std::max(y1, o.y1)};
    }
    bool operator==(const Box&) const = default;
};

struct SceneObject {
    int id = -1;
    int level = 1;  // 1-based schema level
    std::string cls;
    Box bbox;
    std::vector<int> children;
};

struct GenParams {
    int canvas_w = 208, canvas_h = 464;
    int border_width = 2;
    int margin = 6;
    int gap_min = 6, gap_max = 13;

    // text
    int run_h_min = 6, run_h_max = 9;
    int word_w_min = 5, word_w_max = 14;
    int word_gap = 2;
    int line_gap_min = 3, line_gap_max = 4;
    int block_lines_min = 1, block_lines_max = 3;

    // widgets
    int widget_w_min = 24, widget_w_max = 64;
    int widget_h_min = 9, widget_h_max = 14;
    int checkbox = 7;

    // choice groups
    int group_fields_min = 3, group_fields_max = 5;
    double group_title_prob = 0.85;

    double weight_textblock = 0.30;
    double weight_textfield = 0.40;
    double weight_choicegroup = 0.30;

    // probability that a choice group is positioned to straddle the next
    // multiple of span_pitch (the strip write pitch)
    double span_bias = 0.25;
    int span_pitch = 96;

    // table/list corpus (tl schema)
    int table_rows_min = 3, table_rows_max = 6;
    int table_cols_min = 2, table_cols_max = 4;
    double weight_table = 0.5;

    double min_ink = 0.02, max_ink = 0.60;

    std::string schema_id = "default";

    void validate() const;
    GenParams scaled(double factor) const;
};

struct DocumentScene {
    int canvas_h = 0, canvas_w = 0;
    std::uint64_t seed = 0;
    GenParams params;
    std::vector<SceneObject> objects;

    const SceneObject& by_id(int id) const { return objects[static_cast<std::size_t>(id)]; }

    // Transitive leaf boxes (textruns/widgets for forms; rows+cols+cells
    // resolve to their own boxes for tables).
    std::vector<Box> element_boxes(const SceneObject& obj) const;
};

// Deterministic: the same (seed, params) always yields the identical scene.
DocumentScene generate_scene(std::uint64_t seed, const GenParams& params);

// Throws std::runtime_error describing the first violated invariant.
void validate_scene(const DocumentScene& scene);

// Ink rendering of the scene; masks carry the class ids per level, with the
// border ring painted around every structure footprint.
GrayImage render_scene(const DocumentScene& scene);
std::vector<LabelImage> rasterize_masks(const DocumentScene& scene, const ClassSchema& schema);

// Fraction of non-background pixels per level of the rasterized masks.
std::vector<double> mask_density(const std::vector<LabelImage>& masks);

}  // namespace sseg
