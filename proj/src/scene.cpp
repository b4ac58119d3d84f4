#include "sseg/scene.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "sseg/rng.hpp"

namespace sseg {

void GenParams::validate() const {
    if (canvas_w < 48 || canvas_h < 48) throw std::invalid_argument("gen: canvas too small");
    if (border_width < 1) throw std::invalid_argument("gen: border_width must be >= 1");
    if (run_h_min > run_h_max || word_w_min > word_w_max || block_lines_min > block_lines_max ||
        widget_w_min > widget_w_max || widget_h_min > widget_h_max ||
        group_fields_min > group_fields_max || table_rows_min > table_rows_max ||
        table_cols_min > table_cols_max || gap_min > gap_max || line_gap_min > line_gap_max) {
        throw std::invalid_argument("gen: empty range");
    }
    if (span_bias < 0.0 || span_bias > 1.0 || group_title_prob < 0.0 || group_title_prob > 1.0) {
        throw std::invalid_argument("gen: probability out of [0,1]");
    }
    if (weight_textblock < 0 || weight_textfield < 0 || weight_choicegroup < 0 ||
        weight_textblock + weight_textfield + weight_choicegroup <= 0) {
        throw std::invalid_argument("gen: structure weights must be nonnegative, not all zero");
    }
}

GenParams GenParams::scaled(double f) const {
    GenParams p = *this;
    auto s = [f](int v) { return std::max(1, static_cast<int>(std::lround(v * f))); };
    p.canvas_w = s(canvas_w);
    p.canvas_h = s(canvas_h);
    p.border_width = s(border_width);
    p.margin = s(margin);
    p.gap_min = s(gap_min);
    p.gap_max = s(gap_max);
    p.run_h_min = s(run_h_min);
    p.run_h_max = s(run_h_max);
    p.word_w_min = s(word_w_min);
    p.word_w_max = s(word_w_max);
    p.word_gap = s(word_gap);
    p.line_gap_min = s(line_gap_min);
    p.line_gap_max = s(line_gap_max);
    p.widget_w_min = s(widget_w_min);
    p.widget_w_max = s(widget_w_max);
    p.widget_h_min = s(widget_h_min);
    p.widget_h_max = s(widget_h_max);
    p.checkbox = s(checkbox);
    p.span_pitch = s(span_pitch);
    return p;
}

std::vector<Box> DocumentScene::element_boxes(const SceneObject& obj) const {
    std::vector<Box> out;
    std::vector<int> stack{obj.id};
    while (!stack.empty()) {
        const SceneObject& o = by_id(stack.back());
        stack.pop_back();
        if (o.children.empty()) {
            out.push_back(o.bbox);
        } else {
            for (int c : o.children) stack.push_back(c);
        }
    }
    return out;
}

namespace {

// Objects are first built with boxes relative to (0,0), then committed into
// the scene at the final offset with global ids.
struct Proto {
    int level;
    std::string cls;
    Box bbox;
    std::vector<int> child_locals;
};

struct Batch {
    std::vector<Proto> objs;
    int root = -1;
    int width = 0, height = 0;

    int add(int level, std::string cls, Box box, std::vector<int> kids = {}) {
        objs.push_back({level, std::move(cls), box, std::move(kids)});
        return static_cast<int>(objs.size()) - 1;
    }

    void finish(int root_local) {
        root = root_local;
        Box u;
        for (const auto& o : objs) u = u.united(o.bbox);
        width = u.x1;
        height = u.y1;
    }
};

int commit(DocumentScene& scene, const Batch& batch, int dx, int dy) {
    const int base = static_cast<int>(scene.objects.size());
    for (const auto& p : batch.objs) {
        SceneObject obj;
        obj.id = base + static_cast<int>(&p - batch.objs.data());
        obj.level = p.level;
        obj.cls = p.cls;
        obj.bbox = Box{p.bbox.x0 + dx, p.bbox.y0 + dy, p.bbox.x1 + dx, p.bbox.y1 + dy};
        for (int c : p.child_locals) obj.children.push_back(base + c);
        scene.objects.push_back(std::move(obj));
    }
    return base + batch.root;
}

int rand_range(Rng& rng, int lo, int hi) { return static_cast<int>(rng.next_int(lo, hi)); }

// One line of words starting at (x, y), total width <= max_w.
int make_textrun(Batch& b, Rng& rng, const GenParams& p, int x, int y, int max_w) {
    const int h = rand_range(rng, p.run_h_min, p.run_h_max);
    const int min_w = std::min(max_w, 2 * p.word_w_min + p.word_gap);
    const int w = rand_range(rng, min_w, std::max(min_w, max_w));
    return b.add(1, "textrun", Box{x, y, x + w, y + h});
}

// Stack of 1..n textruns; cls picks textblock vs choicegroup_title.
int make_textblock(Batch& b, Rng& rng, const GenParams& p, int x, int y, int max_w,
                   const std::string& cls, int max_lines) {
    const int lines = rand_range(rng, p.block_lines_min, std::min(p.block_lines_max, max_lines));
    std::vector<int> kids;
    Box bbox;
    int cy = y;
    for (int i = 0; i < lines; ++i) {
        const int run = make_textrun(b, rng, p, x, cy, max_w);
        kids.push_back(run);
        bbox = bbox.united(b.objs[static_cast<std::size_t>(run)].bbox);
        cy = b.objs[static_cast<std::size_t>(run)].bbox.y1 + rand_range(rng, p.line_gap_min, p.line_gap_max);
    }
    return b.add(2, cls, bbox, std::move(kids));
}

// Caption textblock plus 1..2 widgets, side-by-side or stacked.
int make_textfield(Batch& b, Rng& rng, const GenParams& p, int max_w) {
    std::vector<int> kids;
    Box bbox;
    const bool stacked = rng.next_bool(0.35);
    if (stacked) {
        const int cap = make_textblock(b, rng, p, 0, 0, std::max(p.word_w_min * 2, max_w / 2),
                                       "textblock", 1);
        kids.push_back(cap);
        const Box cb = b.objs[static_cast<std::size_t>(cap)].bbox;
        const int wy = cb.y1 + rand_range(rng, 3, 5);
        const int ww = std::min(max_w, rand_range(rng, p.widget_w_min, p.widget_w_max));
        const int wh = rand_range(rng, p.widget_h_min, p.widget_h_max);
        const int widget = b.add(1, "widget", Box{0, wy, ww, wy + wh});
        kids.push_back(widget);
        bbox = cb.united(b.objs[static_cast<std::size_t>(widget)].bbox);
    } else {
        const int cap_w = std::max(p.word_w_min * 2, max_w * 2 / 5);
        const int cap = make_textblock(b, rng, p, 0, 0, cap_w, "textblock", 1);
        kids.push_back(cap);
        const Box cb = b.objs[static_cast<std::size_t>(cap)].bbox;
        int wx = cb.x1 + rand_range(rng, 4, 7);
        const int n_widgets = rng.next_bool(0.25) ? 2 : 1;
        bbox = cb;
        for (int i = 0; i < n_widgets; ++i) {
            const int room = max_w - wx;
            if (room < p.widget_w_min) break;
            const int ww = std::min(room, rand_range(rng, p.widget_w_min, p.widget_w_max));
            const int wh = rand_range(rng, p.widget_h_min, p.widget_h_max);
            const int widget = b.add(1, "widget", Box{wx, 0, wx + ww, wh});
            kids.push_back(widget);
            bbox = bbox.united(b.objs[static_cast<std::size_t>(widget)].bbox);
            wx += ww + rand_range(rng, 4, 6);
        }
    }
    return b.add(3, "textfield", bbox, std::move(kids));
}

// Checkbox widget plus a one-line label block.
int make_choicefield(Batch& b, Rng& rng, const GenParams& p, int y, int max_w) {
    const int box = p.checkbox;
    const int widget = b.add(1, "widget", Box{0, y, box, y + box});
    const int lx = box + rand_range(rng, 3, 5);
    const int label = make_textblock(b, rng, p, lx, y, std::max(p.word_w_min * 2, max_w - lx), "textblock", 1);
    Box bbox = b.objs[static_cast<std::size_t>(widget)].bbox.united(b.objs[static_cast<std::size_t>(label)].bbox);
    return b.add(3, "choicefield", bbox, {widget, label});
}

int make_choicegroup(Batch& b, Rng& rng, const GenParams& p, int max_w) {
    std::vector<int> kids;
    Box bbox;
    int cy = 0;
    if (rng.next_bool(p.group_title_prob)) {
        const int title = make_textblock(b, rng, p, 0, 0, max_w, "choicegroup_title", 2);
        kids.push_back(title);
        bbox = b.objs[static_cast<std::size_t>(title)].bbox;
        cy = bbox.y1 + rand_range(rng, 4, 6);
    }
    const int n = rand_range(rng, p.group_fields_min, p.group_fields_max);
    const int indent = rand_range(rng, 2, 6);
    for (int i = 0; i < n; ++i) {
        const int cf = make_choicefield(b, rng, p, 0, max_w - indent);
        // shift the whole choicefield subtree down to cy and right by indent
        auto& root = b.objs[static_cast<std::size_t>(cf)];
        std::vector<int> stack{cf};
        while (!stack.empty()) {
            auto& o = b.objs[static_cast<std::size_t>(stack.back())];
            stack.pop_back();
            o.bbox.y0 += cy;
            o.bbox.y1 += cy;
            o.bbox.x0 += indent;
            o.bbox.x1 += indent;
            for (int k : o.child_locals) stack.push_back(k);
        }
        kids.push_back(cf);
        bbox = bbox.united(root.bbox);
        cy = root.bbox.y1 + rand_range(rng, 3, 5);
    }
    return b.add(4, "choicegroup", bbox, std::move(kids));
}

// rows x cols grid; the row/column bands are the decomposition ground truth.
int make_table(Batch& b, Rng& rng, const GenParams& p, int max_w, int max_h) {
    const int rows = rand_range(rng, p.table_rows_min, p.table_rows_max);
    const int cols = rand_range(rng, p.table_cols_min, p.table_cols_max);
    const int row_h = rand_range(rng, p.widget_h_min + 2, p.widget_h_max + 6);
    const int gap = 2;  // grid line + spacing between bands
    const int width = std::min(max_w, rand_range(rng, max_w * 3 / 5, max_w));
    const int height = std::min(max_h, rows * row_h + (rows - 1) * gap);
    // at least one row band; an oversized result fails the caller's fit
    // check rather than producing a degenerate table
    const int usable_rows = std::max(1, std::min(rows, (height + gap) / (row_h + gap)));

    std::vector<int> kids;
    for (int r = 0; r < usable_rows; ++r) {
        const int y0 = r * (row_h + gap);
        kids.push_back(b.add(2, "table_row", Box{0, y0, width, y0 + row_h}));
    }
    const int col_w = (width - (cols - 1) * gap) / cols;
    const int table_h = usable_rows * (row_h + gap) - gap;
    for (int c = 0; c < cols; ++c) {
        const int x0 = c * (col_w + gap);
        kids.push_back(b.add(3, "table_column", Box{x0, 0, x0 + col_w, table_h}));
    }
    return b.add(1, "table", Box{0, 0, width, table_h}, std::move(kids));
}

int make_list(Batch& b, Rng& rng, const GenParams& p, int max_w) {
    const int items = rand_range(rng, 3, 6);
    Box bbox;
    int cy = 0;
    for (int i = 0; i < items; ++i) {
        const int h = rand_range(rng, p.run_h_min, p.run_h_max);
        const int w = rand_range(rng, std::min(max_w, 40), max_w);
        bbox = bbox.united(Box{0, cy, w, cy + h});
        cy += h + rand_range(rng, p.line_gap_min, p.line_gap_max + 1);
    }
    return b.add(1, "list", bbox, {});
}

}  // namespace

DocumentScene generate_scene(std::uint64_t seed, const GenParams& params) {
    params.validate();
    DocumentScene scene;
    scene.canvas_h = params.canvas_h;
    scene.canvas_w = params.canvas_w;
    scene.seed = seed;
    scene.params = params;

    Rng rng(mix_seed(seed, 0x10c));
    const int margin = params.margin;
    const int content_w = params.canvas_w - 2 * margin;
    const int bottom = params.canvas_h - margin;
    const bool tl = (params.schema_id == "tl");

    int y = margin;
    int misses = 0;
    while (misses < 4) {
        Batch batch;
        bool want_span = false;
        if (tl) {
            if (rng.next_bool(params.weight_table)) {
                make_table(batch, rng, params, content_w, bottom - y);
            } else {
                make_list(batch, rng, params, content_w);
            }
            batch.finish(static_cast<int>(batch.objs.size()) - 1);
        } else {
            const double total =
                params.weight_textblock + params.weight_textfield + params.weight_choicegroup;
            const double roll = rng.next_real(0.0, total);
            if (roll < params.weight_textblock) {
                make_textblock(batch, rng, params, 0, 0, content_w, "textblock",
                               params.block_lines_max);
            } else if (roll < params.weight_textblock + params.weight_textfield) {
                make_textfield(batch, rng, params, content_w);
            } else {
                make_choicegroup(batch, rng, params, content_w);
                want_span = params.span_pitch > 0 && rng.next_bool(params.span_bias);
            }
            batch.finish(static_cast<int>(batch.objs.size()) - 1);
        }

        bool feasible = batch.height > 0 && y + batch.height <= bottom;
        for (const auto& o : batch.objs) {
            if (o.bbox.empty()) feasible = false;
        }
        if (!feasible) {
            ++misses;  // try a (likely smaller) different structure
            continue;
        }

        int place_y = y;
        if (want_span) {
            // pull the group onto the next strip boundary when there is room
            const int pitch = params.span_pitch;
            const int first = ((y + 4) / pitch + 1) * pitch;
            for (int boundary = first; boundary < bottom; boundary += pitch) {
                const int lo = std::max(y, boundary - batch.height * 3 / 4);
                const int hi = std::min(boundary - batch.height / 4, bottom - batch.height);
                if (lo <= hi && boundary > lo && boundary < lo + batch.height) {
                    place_y = lo + rand_range(rng, 0, hi - lo);
                    break;
                }
            }
        }

        const int slack = content_w - batch.width;
        const int place_x = margin + (slack > 0 ? rand_range(rng, 0, std::min(slack, 24)) : 0);
        commit(scene, batch, place_x, place_y);
        y = place_y + batch.height + rand_range(rng, params.gap_min, params.gap_max);
    }
    return scene;
}

void validate_scene(const DocumentScene& scene) {
    const auto& objs = scene.objects;
    std::vector<int> ref_count(objs.size(), 0);

    for (std::size_t i = 0; i < objs.size(); ++i) {
        const auto& o = objs[i];
        if (o.id != static_cast<int>(i)) throw std::runtime_error("scene: ids not dense");
        if (o.bbox.empty()) throw std::runtime_error("scene: empty bbox on object " + std::to_string(o.id));
        if (o.bbox.x0 < 0 || o.bbox.y0 < 0 || o.bbox.x1 > scene.canvas_w || o.bbox.y1 > scene.canvas_h) {
            throw std::runtime_error("scene: object " + std::to_string(o.id) + " outside canvas");
        }
        for (int c : o.children) {
            if (c < 0 || c >= static_cast<int>(objs.size())) {
                throw std::runtime_error("scene: dangling child id");
            }
            ref_count[static_cast<std::size_t>(c)]++;
            if (!o.bbox.contains(objs[static_cast<std::size_t>(c)].bbox)) {
                throw std::runtime_error("scene: child " + std::to_string(c) +
                                         " escapes parent " + std::to_string(o.id));
            }
        }

        // composition rules
        auto child_classes = [&](const char* a, const char* bcls) {
            for (int c : o.children) {
                const auto& cc = objs[static_cast<std::size_t>(c)].cls;
                if (cc != a && cc != bcls) {
                    throw std::runtime_error("scene: " + o.cls + " " + std::to_string(o.id) +
                                             " has illegal child class " + cc);
                }
            }
        };
        if (o.cls == "textrun" || o.cls == "widget" || o.cls == "list" || o.cls == "table_row" ||
            o.cls == "table_column") {
            if (!o.children.empty()) throw std::runtime_error("scene: leaf class with children");
        } else if (o.cls == "textblock" || o.cls == "choicegroup_title") {
            if (o.children.empty()) throw std::runtime_error("scene: empty textblock");
            child_classes("textrun", "textrun");
        } else if (o.cls == "textfield" || o.cls == "choicefield") {
            child_classes("widget", "textblock");
            int widgets = 0, blocks = 0;
            for (int c : o.children) {
                (objs[static_cast<std::size_t>(c)].cls == "widget" ? widgets : blocks)++;
            }
            if (widgets < 1 || blocks != 1) {
                throw std::runtime_error("scene: " + o.cls + " needs >=1 widget and exactly 1 caption");
            }
        } else if (o.cls == "choicegroup") {
            int fields = 0, titles = 0;
            for (int c : o.children) {
                const auto& cc = objs[static_cast<std::size_t>(c)].cls;
                if (cc == "choicefield") fields++;
                else if (cc == "choicegroup_title") titles++;
                else throw std::runtime_error("scene: choicegroup has illegal child class " + cc);
            }
            if (fields < 1 || titles > 1) {
                throw std::runtime_error("scene: choicegroup needs >=1 field and <=1 title");
            }
        } else if (o.cls == "table") {
            int rows = 0, cols = 0;
            for (int c : o.children) {
                const auto& cc = objs[static_cast<std::size_t>(c)].cls;
                if (cc == "table_row") rows++;
                else if (cc == "table_column") cols++;
                else throw std::runtime_error("scene: table has illegal child class " + cc);
            }
            if (rows < 1 || cols < 1) throw std::runtime_error("scene: table needs rows and columns");
        } else {
            throw std::runtime_error("scene: unknown class " + o.cls);
        }
    }

    // every object is referenced by at most one parent
    for (std::size_t i = 0; i < objs.size(); ++i) {
        if (ref_count[i] > 1) {
            throw std::runtime_error("scene: object " + std::to_string(i) + " has multiple parents");
        }
    }

    // same-level disjointness; same-class pairs additionally keep a 1px gap
    // so 4-connected components never merge (table rows/cols overlap their
    // siblings of the other class by design, so tl levels share no classes)
    for (std::size_t i = 0; i < objs.size(); ++i) {
        for (std::size_t j = i + 1; j < objs.size(); ++j) {
            const auto& a = objs[i];
            const auto& b = objs[j];
            if (a.level != b.level) continue;
            if (a.cls == "table_row" && b.cls == "table_column") continue;
            if (a.cls == "table_column" && b.cls == "table_row") continue;
            if (a.bbox.intersects(b.bbox)) {
                throw std::runtime_error("scene: level " + std::to_string(a.level) +
                                         " objects " + std::to_string(a.id) + "," +
                                         std::to_string(b.id) + " overlap");
            }
            if (a.cls == b.cls) {
                const bool gapped = a.bbox.x1 < b.bbox.x0 || b.bbox.x1 < a.bbox.x0 ||
                                    a.bbox.y1 < b.bbox.y0 || b.bbox.y1 < a.bbox.y0;
                if (!gapped) {
                    throw std::runtime_error("scene: same-class objects " + std::to_string(a.id) +
                                             "," + std::to_string(b.id) + " touch");
                }
            }
        }
    }
}

}  // namespace sseg
