#include "sseg/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "sseg/rng.hpp"

namespace sseg {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json params_to_json_obj(const GenParams& p) {
    json j;
    j["canvas_w"] = p.canvas_w;
    j["canvas_h"] = p.canvas_h;
    j["border_width"] = p.border_width;
    j["margin"] = p.margin;
    j["gap_min"] = p.gap_min;
    j["gap_max"] = p.gap_max;
    j["run_h_min"] = p.run_h_min;
    j["run_h_max"] = p.run_h_max;
    j["word_w_min"] = p.word_w_min;
    j["word_w_max"] = p.word_w_max;
    j["word_gap"] = p.word_gap;
    j["line_gap_min"] = p.line_gap_min;
    j["line_gap_max"] = p.line_gap_max;
    j["block_lines_min"] = p.block_lines_min;
    j["block_lines_max"] = p.block_lines_max;
    j["widget_w_min"] = p.widget_w_min;
    j["widget_w_max"] = p.widget_w_max;
    j["widget_h_min"] = p.widget_h_min;
    j["widget_h_max"] = p.widget_h_max;
    j["checkbox"] = p.checkbox;
    j["group_fields_min"] = p.group_fields_min;
    j["group_fields_max"] = p.group_fields_max;
    j["group_title_prob"] = p.group_title_prob;
    j["weight_textblock"] = p.weight_textblock;
    j["weight_textfield"] = p.weight_textfield;
    j["weight_choicegroup"] = p.weight_choicegroup;
    j["span_bias"] = p.span_bias;
    j["span_pitch"] = p.span_pitch;
    j["table_rows_min"] = p.table_rows_min;
    j["table_rows_max"] = p.table_rows_max;
    j["table_cols_min"] = p.table_cols_min;
    j["table_cols_max"] = p.table_cols_max;
    j["weight_table"] = p.weight_table;
    j["min_ink"] = p.min_ink;
    j["max_ink"] = p.max_ink;
    j["schema"] = p.schema_id;
    return j;
}

GenParams params_from_json_obj(const json& j) {
    GenParams p;
    p.canvas_w = j.value("canvas_w", p.canvas_w);
    p.canvas_h = j.value("canvas_h", p.canvas_h);
    p.border_width = j.value("border_width", p.border_width);
    p.margin = j.value("margin", p.margin);
    p.gap_min = j.value("gap_min", p.gap_min);
    p.gap_max = j.value("gap_max", p.gap_max);
    p.run_h_min = j.value("run_h_min", p.run_h_min);
    p.run_h_max = j.value("run_h_max", p.run_h_max);
    p.word_w_min = j.value("word_w_min", p.word_w_min);
    p.word_w_max = j.value("word_w_max", p.word_w_max);
    p.word_gap = j.value("word_gap", p.word_gap);
    p.line_gap_min = j.value("line_gap_min", p.line_gap_min);
    p.line_gap_max = j.value("line_gap_max", p.line_gap_max);
    p.block_lines_min = j.value("block_lines_min", p.block_lines_min);
    p.block_lines_max = j.value("block_lines_max", p.block_lines_max);
    p.widget_w_min = j.value("widget_w_min", p.widget_w_min);
    p.widget_w_max = j.value("widget_w_max", p.widget_w_max);
    p.widget_h_min = j.value("widget_h_min", p.widget_h_min);
    p.widget_h_max = j.value("widget_h_max", p.widget_h_max);
    p.checkbox = j.value("checkbox", p.checkbox);
    p.group_fields_min = j.value("group_fields_min", p.group_fields_min);
    p.group_fields_max = j.value("group_fields_max", p.group_fields_max);
    p.group_title_prob = j.value("group_title_prob", p.group_title_prob);
    p.weight_textblock = j.value("weight_textblock", p.weight_textblock);
    p.weight_textfield = j.value("weight_textfield", p.weight_textfield);
    p.weight_choicegroup = j.value("weight_choicegroup", p.weight_choicegroup);
    p.span_bias = j.value("span_bias", p.span_bias);
    p.span_pitch = j.value("span_pitch", p.span_pitch);
    p.table_rows_min = j.value("table_rows_min", p.table_rows_min);
    p.table_rows_max = j.value("table_rows_max", p.table_rows_max);
    p.table_cols_min = j.value("table_cols_min", p.table_cols_min);
    p.table_cols_max = j.value("table_cols_max", p.table_cols_max);
    p.weight_table = j.value("weight_table", p.weight_table);
    p.min_ink = j.value("min_ink", p.min_ink);
    p.max_ink = j.value("max_ink", p.max_ink);
    p.schema_id = j.value("schema", p.schema_id);
    return p;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::string scene_to_jsonl(const DocumentScene& scene) {
    std::ostringstream os;
    for (const auto& o : scene.objects) {
        json j;
        j["id"] = o.id;
        j["level"] = o.level;
        j["class"] = o.cls;
        j["bbox"] = {o.bbox.x0, o.bbox.y0, o.bbox.x1, o.bbox.y1};
        j["children"] = o.children;
        os << j.dump() << "\n";
    }
    return os.str();
}

}  // namespace

std::string sample_stem(int idx) {
    std::ostringstream os;
    os << std::setw(6) << std::setfill('0') << idx;
    return os.str();
}

std::string gen_params_to_json(const GenParams& p) { return params_to_json_obj(p).dump(2); }

GenParams gen_params_from_json(const std::string& text) {
    return params_from_json_obj(json::parse(text));
}

MaterializedSample materialize_sample(const GenParams& params, std::uint64_t sample_seed,
                                      const ClassSchema& schema) {
    MaterializedSample s;
    s.scene = generate_scene(sample_seed, params);
    s.image = render_scene(s.scene);
    s.masks = rasterize_masks(s.scene, schema);
    return s;
}

Manifest emit_dataset(int n, std::uint64_t seed, const std::string& out_dir,
                      const GenParams& params) {
    if (n < 1) throw std::invalid_argument("emit_dataset: n must be >= 1");
    params.validate();
    const ClassSchema schema = ClassSchema::by_id(params.schema_id);

    const fs::path root(out_dir);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw std::runtime_error("cannot create " + root.string() + ": " + ec.message());

    const int n_train = static_cast<int>(n * 0.8);
    const int n_val = static_cast<int>(n * 0.1);

    Manifest manifest;
    manifest.seed = seed;
    manifest.count = n;
    manifest.params = params;

    for (int i = 0; i < n; ++i) {
        SampleRef ref;
        ref.idx = i;
        ref.split = (i < n_train) ? "train" : (i < n_train + n_val) ? "val" : "test";
        ref.seed = mix_seed(seed, static_cast<std::uint64_t>(i));
        manifest.samples.push_back(ref);

        const fs::path dir = root / ref.split;
        fs::create_directories(dir, ec);
        if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

        auto sample = materialize_sample(params, ref.seed, schema);
        const std::string stem = sample_stem(i);
        write_pgm((dir / (stem + ".img.pgm")).string(), sample.image);
        for (int l = 0; l < schema.level_count(); ++l) {
            write_label_pgm((dir / (stem + ".L" + std::to_string(l + 1) + ".msk.pgm")).string(),
                            sample.masks[static_cast<std::size_t>(l)]);
        }
        write_text(dir / (stem + ".scene.jsonl"), scene_to_jsonl(sample.scene));
    }

    json j;
    j["seed"] = seed;
    j["count"] = n;
    j["params"] = params_to_json_obj(params);
    j["samples"] = json::array();
    for (const auto& s : manifest.samples) {
        j["samples"].push_back({{"idx", s.idx}, {"split", s.split}, {"seed", s.seed}});
    }
    write_text(root / "manifest.json", j.dump(2) + "\n");
    return manifest;
}

Manifest read_manifest(const std::string& dir) {
    const fs::path path = fs::path(dir) / "manifest.json";
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    json j;
    f >> j;
    Manifest m;
    m.seed = j.at("seed");
    m.count = j.at("count");
    m.params = params_from_json_obj(j.at("params"));
    for (const auto& js : j.at("samples")) {
        m.samples.push_back({js.at("idx"), js.at("split"), js.at("seed")});
    }
    return m;
}

LoadedSample load_sample(const std::string& dir, const SampleRef& ref, int levels) {
    LoadedSample s;
    const fs::path base = fs::path(dir) / ref.split / sample_stem(ref.idx);
    s.image = read_pgm(base.string() + ".img.pgm");
    for (int l = 1; l <= levels; ++l) {
        s.masks.push_back(read_label_pgm(base.string() + ".L" + std::to_string(l) + ".msk.pgm"));
    }
    return s;
}

std::vector<SceneObject> read_scene_jsonl(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::vector<SceneObject> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        SceneObject o;
        o.id = j.at("id");
        o.level = j.at("level");
        o.cls = j.at("class");
        const auto& b = j.at("bbox");
        o.bbox = Box{b.at(0), b.at(1), b.at(2), b.at(3)};
        o.children = j.at("children").get<std::vector<int>>();
        out.push_back(std::move(o));
    }
    return out;
}

}  // namespace sseg
