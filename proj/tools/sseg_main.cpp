#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sseg/dataset.hpp"
#include "sseg/metrics.hpp"
#include "sseg/model_io.hpp"
#include "sseg/overlay.hpp"
#include "sseg/runconfig.hpp"
#include "sseg/strip.hpp"

namespace fs = std::filesystem;
using namespace sseg;

namespace {

struct CommonFlags {
    std::string profile = "desk";
    std::string variant = "highres";
    std::string config_path;
    std::uint64_t seed = 0;

    CLI::Option* profile_opt = nullptr;
    CLI::Option* variant_opt = nullptr;
    CLI::Option* config_opt = nullptr;
    CLI::Option* seed_opt = nullptr;

    // geometry / network / generator overrides
    int canvas_w = 0, canvas_h = 0, strip_h = 0, overlap_h = -1;
    int base_width = 0, desk_scale = 0, num_bdb = -1;
    std::string schema;
    double span_bias = -1.0;
    int span_pitch = -1, border_width = 0;
    CLI::Option *cw_opt = nullptr, *ch_opt = nullptr, *sh_opt = nullptr, *oh_opt = nullptr;
    CLI::Option *bw_opt = nullptr, *ds_opt = nullptr, *nb_opt = nullptr, *schema_opt = nullptr;
    CLI::Option *sb_opt = nullptr, *sp_opt = nullptr, *bwid_opt = nullptr;

    void attach(CLI::App* cmd) {
        profile_opt = cmd->add_option("--profile", profile, "Config preset: desk or paper");
        variant_opt = cmd->add_option("--variant", variant,
                                      "highres|noprior|lowres|dilated2d|lowres_tl");
        config_opt = cmd->add_option("--config", config_path, "Config file (json); flags win");
        seed_opt = cmd->add_option("--seed", seed, "Run seed (fallback: SSEG_SEED env)");
        cw_opt = cmd->add_option("--canvas-w", canvas_w, "Canvas width");
        ch_opt = cmd->add_option("--canvas-h", canvas_h, "Canvas height");
        sh_opt = cmd->add_option("--strip-h", strip_h, "Strip height S_h");
        oh_opt = cmd->add_option("--overlap-h", overlap_h, "Overlap height O_h");
        bw_opt = cmd->add_option("--base-width", base_width, "First conv channels");
        ds_opt = cmd->add_option("--desk-scale", desk_scale, "Divide all layer widths");
        nb_opt = cmd->add_option("--num-bdb", num_bdb, "Context encoder blocks");
        schema_opt = cmd->add_option("--schema", schema, "Class schema: default or tl");
        sb_opt = cmd->add_option("--span-bias", span_bias, "P(choice group straddles a boundary)");
        sp_opt = cmd->add_option("--span-pitch", span_pitch, "Strip write pitch targeted by span bias");
        bwid_opt = cmd->add_option("--border-width", border_width, "Ground-truth border ring width");
    }

    RunConfig resolve() const {
        RunConfig cfg;
        if (config_opt && config_opt->count()) {
            std::ifstream f(config_path);
            if (!f) throw std::runtime_error("cannot read config " + config_path);
            std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
            cfg = RunConfig::from_json(text);
        } else {
            cfg = RunConfig::preset(profile, variant_by_name(variant));
        }
        if (variant_opt && variant_opt->count() && config_opt && config_opt->count()) {
            cfg.network.variant = variant_by_name(variant);
        }
        if (seed_opt && seed_opt->count()) {
            cfg.seed = seed;
        } else if (const char* env = std::getenv("SSEG_SEED")) {
            cfg.seed = std::strtoull(env, nullptr, 10);
        }
        if (cw_opt->count()) {
            cfg.strip.w = canvas_w;
            cfg.gen.canvas_w = canvas_w;
        }
        if (ch_opt->count()) {
            cfg.strip.h = canvas_h;
            cfg.gen.canvas_h = canvas_h;
        }
        if (sh_opt->count()) cfg.strip.strip_h = strip_h;
        if (oh_opt->count()) cfg.strip.overlap_h = overlap_h;
        if (bw_opt->count()) cfg.network.base_width = base_width;
        if (ds_opt->count()) cfg.network.desk_scale = desk_scale;
        if (nb_opt->count()) cfg.network.num_bdb = num_bdb;
        if (schema_opt->count()) {
            cfg.network.schema_id = schema;
            cfg.gen.schema_id = schema;
        }
        if (sb_opt->count()) cfg.gen.span_bias = span_bias;
        if (sp_opt->count()) cfg.gen.span_pitch = span_pitch;
        if (bwid_opt->count()) cfg.gen.border_width = border_width;
        return cfg;
    }
};

void write_snapshot(const fs::path& out_dir, const RunConfig& cfg) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
    std::ofstream f(out_dir / "config.resolved.json", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write config snapshot in " + out_dir.string());
    f << cfg.to_json() << "\n";
}

HierMask masks_to_hiermask(const std::vector<LabelImage>& masks) {
    HierMask gt;
    for (const auto& m : masks) {
        ClassMap cm(1, m.h, m.w);
        std::copy(m.px.begin(), m.px.end(), cm.labels.begin());
        gt.levels.push_back(std::move(cm));
    }
    return gt;
}

int cmd_gen_data(const CommonFlags& flags, int n, const std::string& out_dir) {
    RunConfig cfg = flags.resolve();
    cfg.validate();
    write_snapshot(out_dir, cfg);
    auto manifest = emit_dataset(n, cfg.seed, out_dir, cfg.gen);
    std::cout << "wrote " << manifest.count << " samples to " << out_dir << " ("
              << manifest.split("train").size() << " train, " << manifest.split("val").size()
              << " val, " << manifest.split("test").size() << " test)\n";
    return 0;
}

int cmd_train(const CommonFlags& flags, const std::string& data_dir, const std::string& out_dir,
              std::int64_t steps_flag, bool steps_set, int batch_flag, bool batch_set,
              bool teacher, int save_every) {
    RunConfig cfg = flags.resolve();
    if (steps_set) cfg.train.steps = steps_flag;
    if (batch_set) cfg.train.batch_strips = batch_flag;
    if (teacher) cfg.train.teacher_prior = true;
    cfg.validate();
    write_snapshot(out_dir, cfg);

    const auto manifest = read_manifest(data_dir);
    const auto schema = ClassSchema::by_id(cfg.network.schema_id);
    auto refs = manifest.split("train");
    if (refs.empty()) throw std::runtime_error("no train split in " + data_dir);

    std::vector<PageCanvas> canvases;
    std::vector<HierMask> gts;
    for (const auto* ref : refs) {
        auto sample = load_sample(data_dir, *ref, schema.level_count());
        canvases.push_back(preprocess(sample.image, cfg.strip));
        if (sample.image.h == cfg.strip.h && sample.image.w == cfg.strip.w) {
            gts.push_back(masks_to_hiermask(sample.masks));
        } else {
            // ground truth lives at source resolution; resample to canvas
            std::vector<LabelImage> scaled;
            const ScaleRecord rec = canvases.back().rec;
            for (const auto& m : sample.masks) {
                LabelImage c(cfg.strip.h, cfg.strip.w, 0);
                for (int y = 0; y < cfg.strip.h; ++y) {
                    const int sy = static_cast<int>((y + 0.5) / rec.scale);
                    if (sy >= m.h) continue;
                    for (int x = 0; x < cfg.strip.w; ++x) {
                        const int sx = std::min(m.w - 1, static_cast<int>((x + 0.5) / rec.scale));
                        c.at(y, x) = m.at(sy, sx);
                    }
                }
                scaled.push_back(std::move(c));
            }
            gts.push_back(masks_to_hiermask(scaled));
        }
    }

    auto net = SegNet<float>::build(cfg.network, cfg.seed, true);
    std::cout << "network " << variant_name(cfg.network.variant) << ", "
              << net.param_count() << " parameters, " << canvases.size() << " train pages, "
              << cfg.train.steps << " steps\n";

    TrainConfig<float> tcfg;
    tcfg.batch_strips = cfg.train.batch_strips;
    tcfg.steps = cfg.train.steps;
    tcfg.seed = cfg.seed;
    tcfg.teacher_prior = cfg.train.teacher_prior;
    tcfg.rho = static_cast<float>(cfg.train.rho);
    tcfg.epsilon = static_cast<float>(cfg.train.epsilon);
    tcfg.lr = static_cast<float>(cfg.train.lr);
    tcfg.decay_factor = static_cast<float>(cfg.train.decay_factor);
    tcfg.decay_interval = cfg.train.decay_interval;
    Trainer<float> trainer(net, cfg.strip, tcfg);

    std::int64_t last_saved = -1;
    while (trainer.steps_done() < cfg.train.steps) {
        for (std::size_t p = 0; p < canvases.size() && trainer.steps_done() < cfg.train.steps; ++p) {
            trainer.train_page(canvases[p], gts[p]);
            if (save_every > 0 && trainer.steps_done() / save_every > last_saved) {
                last_saved = trainer.steps_done() / save_every;
                char name[64];
                std::snprintf(name, sizeof(name), "model.step%06lld.sseg",
                              static_cast<long long>(trainer.steps_done()));
                save_model((fs::path(out_dir) / name).string(), net, cfg);
            }
        }
        if (!trainer.log().empty()) {
            const auto& row = trainer.log().back();
            std::cout << "step " << row.step << "  loss " << row.loss << "  lr " << row.lr << "\n";
        }
    }

    const auto schema_levels = schema.level_count();
    std::ofstream csv(fs::path(out_dir) / "loss.csv", std::ios::binary);
    csv << "step,loss";
    for (int l = 1; l <= schema_levels; ++l) csv << ",loss_l" << l;
    csv << ",lr\n";
    for (const auto& row : trainer.log()) {
        csv << row.step << "," << row.loss;
        for (double v : row.level_loss) csv << "," << v;
        csv << "," << row.lr << "\n";
    }

    save_model((fs::path(out_dir) / "model.sseg").string(), net, cfg);
    std::cout << "saved " << (fs::path(out_dir) / "model.sseg").string() << "\n";
    return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& image_path, const std::string& out_dir) {
    auto [net, cfg] = load_model<float>(ckpt, false);
    write_snapshot(out_dir, cfg);
    const GrayImage img = read_pgm(image_path);
    const PageCanvas canvas = preprocess(img, cfg.strip);
    auto seg = infer_page(canvas, net, cfg.strip);

    const fs::path stem = fs::path(out_dir) / fs::path(image_path).stem().stem();
    for (std::size_t l = 0; l < seg.levels.size(); ++l) {
        const LabelImage source_res = project_back(seg.levels[l], canvas.rec);
        write_label_pgm(stem.string() + ".L" + std::to_string(l + 1) + ".msk.pgm", source_res);
    }
    std::cout << "wrote " << seg.levels.size() << " level masks for " << image_path << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data_dir, const std::string& split,
             const std::string& out_dir, std::vector<double> thresholds) {
    auto [net, cfg] = load_model<float>(ckpt, false);
    write_snapshot(out_dir, cfg);
    if (thresholds.empty()) thresholds = {0.7};

    const auto manifest = read_manifest(data_dir);
    const auto schema = net.schema;
    auto refs = manifest.split(split);
    if (refs.empty()) throw std::runtime_error("no '" + split + "' split in " + data_dir);

    std::vector<std::vector<LabelImage>> preds, gts;
    for (const auto* ref : refs) {
        auto sample = load_sample(data_dir, *ref, schema.level_count());
        const PageCanvas canvas = preprocess(sample.image, cfg.strip);
        auto seg = infer_page(canvas, net, cfg.strip);
        std::vector<LabelImage> page_pred;
        for (auto& lv : seg.levels) page_pred.push_back(project_back(lv, canvas.rec));
        preds.push_back(std::move(page_pred));
        gts.push_back(std::move(sample.masks));
    }

    MetricsReport report = evaluate_dataset(preds, gts, schema, thresholds);

    if (schema.id == "tl") {
        // rows/cols scored after the standard post-processing, pooled
        ObjectScore rows_acc, cols_acc;
        rows_acc.threshold = cols_acc.threshold = 0.5;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const int table_cls = schema.class_id(0, "table");
            const int row_cls = schema.class_id(1, "table_row");
            const int col_cls = schema.class_id(2, "table_column");
            auto regions = extract_instances(preds[i][0], table_cls, true, 1);
            auto [prow, pcol] = table_decompose_postprocess(preds[i][1], row_cls, preds[i][2],
                                                            col_cls, regions);
            auto grow = extract_instances(gts[i][1], row_cls, false, 2);
            auto gcol = extract_instances(gts[i][2], col_cls, false, 3);
            auto rm = match_instances(prow, grow, 0.5);
            auto cm = match_instances(pcol, gcol, 0.5);
            rows_acc.tp += rm.tp;
            rows_acc.fp += rm.fp;
            rows_acc.fn += rm.fn;
            cols_acc.tp += cm.tp;
            cols_acc.fp += cm.fp;
            cols_acc.fn += cm.fn;
        }
        rows_acc.finalize();
        cols_acc.finalize();
        report.has_decomposition = true;
        report.decomposition.rows = rows_acc;
        report.decomposition.cols = cols_acc;
        report.decomposition.precision = 0.5 * (rows_acc.precision + cols_acc.precision);
        report.decomposition.recall = 0.5 * (rows_acc.recall + cols_acc.recall);
        report.decomposition.f1 = 0.5 * (rows_acc.f1 + cols_acc.f1);
        report.decomposition.rows_flagged = !rows_acc.precision_defined || !rows_acc.recall_defined;
        report.decomposition.cols_flagged = !cols_acc.precision_defined || !cols_acc.recall_defined;
    }

    std::ofstream jf(fs::path(out_dir) / "report.json", std::ios::binary);
    jf << report.to_json() << "\n";
    std::ofstream tf(fs::path(out_dir) / "report.txt", std::ios::binary);
    const std::string text = report.to_text();
    tf << text;
    std::cout << text;
    return 0;
}

int cmd_overlay(const std::string& image_path, const std::string& mask_path, int level,
                const std::string& schema_id, const std::string& out_path, double alpha) {
    const GrayImage img = read_pgm(image_path);
    const LabelImage mask = read_label_pgm(mask_path);
    const auto schema = ClassSchema::by_id(schema_id);
    if (level < 1 || level > schema.level_count()) {
        throw std::runtime_error("overlay: level " + std::to_string(level) + " outside schema");
    }
    const auto palette = default_palette();
    auto out = overlay_mask(img, mask, schema, level - 1, palette, alpha);
    write_ppm(out_path, out);
    std::ofstream legend(out_path + ".legend.txt", std::ios::binary);
    legend << palette_legend(schema, level - 1, palette);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_trace_strips(const CommonFlags& flags, const std::string& out_path) {
    RunConfig cfg = flags.resolve();
    const auto plan = plan_strips(cfg.strip);
    nlohmann::json j;
    j["w"] = cfg.strip.w;
    j["h"] = cfg.strip.h;
    j["strip_h"] = cfg.strip.strip_h;
    j["overlap_h"] = cfg.strip.overlap_h;
    j["strip_count"] = static_cast<int>(plan.strips.size());
    j["strips"] = nlohmann::json::array();
    for (const auto& win : plan.strips) {
        j["strips"].push_back({{"index", win.index}, {"y_start", win.y_start}, {"v_h", win.v_h}});
    }
    const std::string text = j.dump(2) + "\n";
    std::cout << text;
    if (!out_path.empty()) {
        std::ofstream f(out_path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + out_path);
        f << text;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Strip-scheduled hierarchical document segmentation"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic form corpus");
    CommonFlags gen_flags;
    gen_flags.attach(gen);
    int gen_n = 10;
    std::string gen_out = "data";
    gen->add_option("-n,--count", gen_n, "Number of pages");
    gen->add_option("--out", gen_out, "Output directory");

    // train
    auto* train = app.add_subcommand("train", "Train a model on a generated corpus");
    CommonFlags train_flags;
    train_flags.attach(train);
    std::string train_data = "data", train_out = "run";
    std::int64_t train_steps = 0;
    int train_batch = 0, save_every = 0;
    bool teacher = false;
    train->add_option("--data", train_data, "Dataset directory (from gen-data)");
    train->add_option("--out", train_out, "Output directory");
    auto* steps_opt = train->add_option("--steps", train_steps, "Optimizer steps");
    auto* batch_opt = train->add_option("--batch", train_batch, "Strips per optimizer step");
    train->add_flag("--teacher-prior", teacher, "Feed ground-truth priors while training");
    train->add_option("--save-every", save_every, "Also checkpoint every N steps");

    // infer
    auto* infer = app.add_subcommand("infer", "Run a checkpoint over one page image");
    std::string infer_ckpt, infer_image, infer_out = "out";
    infer->add_option("--ckpt", infer_ckpt, "Checkpoint path")->required();
    infer->add_option("--image", infer_image, "Input page (pgm)")->required();
    infer->add_option("--out", infer_out, "Output directory");

    // eval
    auto* eval = app.add_subcommand("eval", "Score a checkpoint against dataset ground truth");
    std::string eval_ckpt, eval_data = "data", eval_split = "test", eval_out = "eval";
    std::vector<double> eval_thresholds;
    eval->add_option("--ckpt", eval_ckpt, "Checkpoint path")->required();
    eval->add_option("--data", eval_data, "Dataset directory");
    eval->add_option("--split", eval_split, "train|val|test");
    eval->add_option("--out", eval_out, "Output directory");
    eval->add_option("--thresholds", eval_thresholds, "Object-match IoU thresholds");

    // overlay
    auto* overlay = app.add_subcommand("overlay", "Tint a mask over its page image");
    std::string ov_image, ov_mask, ov_out = "overlay.ppm", ov_schema = "default";
    int ov_level = 1;
    double ov_alpha = 0.45;
    overlay->add_option("--image", ov_image, "Page image (pgm)")->required();
    overlay->add_option("--mask", ov_mask, "Label mask (pgm)")->required();
    overlay->add_option("--level", ov_level, "Hierarchy level of the mask");
    overlay->add_option("--schema", ov_schema, "default or tl");
    overlay->add_option("--out", ov_out, "Output ppm");
    overlay->add_option("--alpha", ov_alpha, "Tint opacity");

    // trace-strips
    auto* trace = app.add_subcommand("trace-strips", "Dump the strip plan as json");
    CommonFlags trace_flags;
    trace_flags.attach(trace);
    std::string trace_out;
    trace->add_option("--out", trace_out, "Also write the json here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(gen_flags, gen_n, gen_out);
        if (train->parsed()) {
            return cmd_train(train_flags, train_data, train_out, train_steps,
                             steps_opt->count() > 0, train_batch, batch_opt->count() > 0, teacher,
                             save_every);
        }
        if (infer->parsed()) return cmd_infer(infer_ckpt, infer_image, infer_out);
        if (eval->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_split, eval_out, eval_thresholds);
        if (overlay->parsed()) {
            return cmd_overlay(ov_image, ov_mask, ov_level, ov_schema, ov_out, ov_alpha);
        }
        if (trace->parsed()) return cmd_trace_strips(trace_flags, trace_out);
    } catch (const std::exception& e) {
        std::cerr << "sseg: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
