#include "sseg/metrics.hpp"

#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace sseg {

namespace {

using nlohmann::json;

std::pair<std::int64_t, std::int64_t> class_inter_union(const LabelImage& pred,
                                                        const LabelImage& gt, int cls) {
    std::int64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.px.size(); ++i) {
        const bool p = pred.px[i] == cls;
        const bool g = gt.px[i] == cls;
        if (p && g) ++inter;
        if (p || g) ++uni;
    }
    return {inter, uni};
}

json score_to_json(const ObjectScore& s) {
    return json{{"threshold", s.threshold},
                {"tp", s.tp},
                {"fp", s.fp},
                {"fn", s.fn},
                {"precision", s.precision},
                {"recall", s.recall},
                {"f1", s.f1},
                {"precision_defined", s.precision_defined},
                {"recall_defined", s.recall_defined}};
}

ObjectScore score_from_json(const json& j) {
    ObjectScore s;
    s.threshold = j.at("threshold");
    s.tp = j.at("tp");
    s.fp = j.at("fp");
    s.fn = j.at("fn");
    s.precision = j.at("precision");
    s.recall = j.at("recall");
    s.f1 = j.at("f1");
    s.precision_defined = j.at("precision_defined");
    s.recall_defined = j.at("recall_defined");
    return s;
}

}  // namespace

MetricsReport evaluate_dataset(const std::vector<std::vector<LabelImage>>& preds,
                               const std::vector<std::vector<LabelImage>>& gts,
                               const ClassSchema& schema, const std::vector<double>& thresholds) {
    if (preds.size() != gts.size()) {
        throw std::invalid_argument("evaluate_dataset: pred/gt image counts differ");
    }
    MetricsReport report;
    report.schema_id = schema.id;

    for (int l = 0; l < schema.level_count(); ++l) {
        for (int cls = 2; cls < schema.class_count(l); ++cls) {
            ClassReport cr;
            cr.level = l + 1;
            cr.cls = schema.class_name(l, cls);
            double iou_sum = 0.0;
            for (std::size_t img = 0; img < preds.size(); ++img) {
                const auto& pm = preds[img][static_cast<std::size_t>(l)];
                const auto& gm = gts[img][static_cast<std::size_t>(l)];
                if (pm.h != gm.h || pm.w != gm.w) {
                    throw std::invalid_argument("evaluate_dataset: resolution mismatch at image " +
                                                std::to_string(img));
                }
                const auto [inter, uni] = class_inter_union(pm, gm, cls);
                if (uni == 0) continue;  // class absent in both: skip the image
                iou_sum += static_cast<double>(inter) / static_cast<double>(uni);
                cr.miou_images++;
            }
            if (cr.miou_images > 0) {
                cr.miou_present = true;
                cr.miou = iou_sum / cr.miou_images;
            }

            for (double thr : thresholds) {
                ObjectScore score;
                score.threshold = thr;
                for (std::size_t img = 0; img < preds.size(); ++img) {
                    auto pi = extract_instances(preds[img][static_cast<std::size_t>(l)], cls, true, l + 1);
                    auto gi = extract_instances(gts[img][static_cast<std::size_t>(l)], cls, true, l + 1);
                    auto match = match_instances(pi, gi, thr);
                    score.tp += match.tp;
                    score.fp += match.fp;
                    score.fn += match.fn;
                }
                score.finalize();
                cr.object_scores.push_back(score);
            }
            report.classes.push_back(std::move(cr));
        }
    }
    return report;
}

std::pair<std::vector<ObjectInstance>, std::vector<ObjectInstance>> table_decompose_postprocess(
    const LabelImage& row_mask, int row_cls, const LabelImage& col_mask, int col_cls,
    const std::vector<ObjectInstance>& table_regions, double area_frac) {
    std::vector<ObjectInstance> rows, cols;
    for (const auto& region : table_regions) {
        // clip the class masks to the region before extracting components
        LabelImage local_rows(row_mask.h, row_mask.w, 0);
        LabelImage local_cols(col_mask.h, col_mask.w, 0);
        for (int y = region.bbox.y0; y < region.bbox.y1; ++y) {
            for (int x = region.bbox.x0; x < region.bbox.x1; ++x) {
                if (!region.at(y, x)) continue;
                if (row_mask.at(y, x) == row_cls) local_rows.at(y, x) = row_cls;
                if (col_mask.at(y, x) == col_cls) local_cols.at(y, x) = col_cls;
            }
        }
        const double min_area = area_frac * static_cast<double>(region.area);

        for (const auto& comp : extract_instances(local_rows, row_cls, false, 2)) {
            if (static_cast<double>(comp.area) < min_area) continue;
            // extend horizontally across the region
            ObjectInstance full;
            full.cls = row_cls;
            full.level = 2;
            full.bbox = Box{region.bbox.x0, comp.bbox.y0, region.bbox.x1, comp.bbox.y1};
            full.mask.assign(static_cast<std::size_t>(full.bbox.width()) * full.bbox.height(), 0);
            for (int y = full.bbox.y0; y < full.bbox.y1; ++y) {
                for (int x = full.bbox.x0; x < full.bbox.x1; ++x) {
                    if (region.at(y, x)) {
                        full.mask[static_cast<std::size_t>(y - full.bbox.y0) * full.bbox.width() +
                                  (x - full.bbox.x0)] = 1;
                        ++full.area;
                    }
                }
            }
            if (full.area > 0) rows.push_back(std::move(full));
        }

        for (const auto& comp : extract_instances(local_cols, col_cls, false, 3)) {
            if (static_cast<double>(comp.area) < min_area) continue;
            ObjectInstance full;
            full.cls = col_cls;
            full.level = 3;
            full.bbox = Box{comp.bbox.x0, region.bbox.y0, comp.bbox.x1, region.bbox.y1};
            full.mask.assign(static_cast<std::size_t>(full.bbox.width()) * full.bbox.height(), 0);
            for (int y = full.bbox.y0; y < full.bbox.y1; ++y) {
                for (int x = full.bbox.x0; x < full.bbox.x1; ++x) {
                    if (region.at(y, x)) {
                        full.mask[static_cast<std::size_t>(y - full.bbox.y0) * full.bbox.width() +
                                  (x - full.bbox.x0)] = 1;
                        ++full.area;
                    }
                }
            }
            if (full.area > 0) cols.push_back(std::move(full));
        }
    }
    return {std::move(rows), std::move(cols)};
}

DecompositionScore decomposition_score(const std::vector<ObjectInstance>& pred_rows,
                                       const std::vector<ObjectInstance>& pred_cols,
                                       const std::vector<ObjectInstance>& gt_rows,
                                       const std::vector<ObjectInstance>& gt_cols,
                                       double threshold) {
    DecompositionScore out;
    auto rmatch = match_instances(pred_rows, gt_rows, threshold);
    auto cmatch = match_instances(pred_cols, gt_cols, threshold);
    out.rows.threshold = out.cols.threshold = threshold;
    out.rows.tp = rmatch.tp;
    out.rows.fp = rmatch.fp;
    out.rows.fn = rmatch.fn;
    out.rows.finalize();
    out.cols.tp = cmatch.tp;
    out.cols.fp = cmatch.fp;
    out.cols.fn = cmatch.fn;
    out.cols.finalize();
    out.rows_flagged = !out.rows.precision_defined || !out.rows.recall_defined;
    out.cols_flagged = !out.cols.precision_defined || !out.cols.recall_defined;
    out.precision = 0.5 * (out.rows.precision + out.cols.precision);
    out.recall = 0.5 * (out.rows.recall + out.cols.recall);
    out.f1 = 0.5 * (out.rows.f1 + out.cols.f1);
    return out;
}

std::string MetricsReport::to_json() const {
    json j;
    j["schema"] = schema_id;
    j["classes"] = json::array();
    for (const auto& c : classes) {
        json jc;
        jc["level"] = c.level;
        jc["class"] = c.cls;
        jc["miou_present"] = c.miou_present;
        jc["miou"] = c.miou;
        jc["miou_images"] = c.miou_images;
        jc["object_scores"] = json::array();
        for (const auto& s : c.object_scores) jc["object_scores"].push_back(score_to_json(s));
        j["classes"].push_back(jc);
    }
    j["has_decomposition"] = has_decomposition;
    if (has_decomposition) {
        j["decomposition"] = {{"rows", score_to_json(decomposition.rows)},
                              {"cols", score_to_json(decomposition.cols)},
                              {"precision", decomposition.precision},
                              {"recall", decomposition.recall},
                              {"f1", decomposition.f1},
                              {"rows_flagged", decomposition.rows_flagged},
                              {"cols_flagged", decomposition.cols_flagged}};
    }
    return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
    const json j = json::parse(text);
    MetricsReport r;
    r.schema_id = j.at("schema");
    for (const auto& jc : j.at("classes")) {
        ClassReport c;
        c.level = jc.at("level");
        c.cls = jc.at("class");
        c.miou_present = jc.at("miou_present");
        c.miou = jc.at("miou");
        c.miou_images = jc.at("miou_images");
        for (const auto& js : jc.at("object_scores")) c.object_scores.push_back(score_from_json(js));
        r.classes.push_back(std::move(c));
    }
    r.has_decomposition = j.at("has_decomposition");
    if (r.has_decomposition) {
        const auto& jd = j.at("decomposition");
        r.decomposition.rows = score_from_json(jd.at("rows"));
        r.decomposition.cols = score_from_json(jd.at("cols"));
        r.decomposition.precision = jd.at("precision");
        r.decomposition.recall = jd.at("recall");
        r.decomposition.f1 = jd.at("f1");
        r.decomposition.rows_flagged = jd.at("rows_flagged");
        r.decomposition.cols_flagged = jd.at("cols_flagged");
    }
    return r;
}

std::string MetricsReport::to_text() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);

    std::size_t col = 10;
    for (const auto& c : classes) col = std::max(col, c.cls.size() + 2);

    os << std::left << std::setw(12) << "Metric";
    for (const auto& c : classes) os << std::right << std::setw(static_cast<int>(col)) << c.cls;
    os << "\n";
    os << std::string(12 + col * classes.size(), '-') << "\n";

    os << std::left << std::setw(12) << "MIoU";
    for (const auto& c : classes) {
        std::ostringstream cell;
        if (c.miou_present) {
            cell << std::fixed << std::setprecision(2) << 100.0 * c.miou;
        } else {
            cell << "--";
        }
        os << std::right << std::setw(static_cast<int>(col)) << cell.str();
    }
    os << "\n";

    const std::size_t n_thr = classes.empty() ? 0 : classes.front().object_scores.size();
    for (std::size_t t = 0; t < n_thr; ++t) {
        const double thr = classes.front().object_scores[t].threshold;
        for (const char* metric : {"P", "R", "F1"}) {
            std::ostringstream label;
            label << metric << "(" << std::setprecision(1) << thr << ")";
            os << std::left << std::setw(12) << label.str();
            for (const auto& c : classes) {
                const auto& s = c.object_scores[t];
                double v = 0.0;
                bool flagged = false;
                if (std::string(metric) == "P") {
                    v = s.precision;
                    flagged = !s.precision_defined;
                } else if (std::string(metric) == "R") {
                    v = s.recall;
                    flagged = !s.recall_defined;
                } else {
                    v = s.f1;
                    flagged = !s.precision_defined && !s.recall_defined;
                }
                std::ostringstream cell;
                cell << std::fixed << std::setprecision(2) << 100.0 * v;
                if (flagged) cell << "*";
                os << std::right << std::setw(static_cast<int>(col)) << cell.str();
            }
            os << "\n";
        }
    }

    if (has_decomposition) {
        os << "\nTable decomposition (avg of rows and columns, IoU "
           << decomposition.rows.threshold << ")\n";
        os << "  P " << 100.0 * decomposition.precision << "  R " << 100.0 * decomposition.recall
           << "  F1 " << 100.0 * decomposition.f1;
        if (decomposition.rows_flagged || decomposition.cols_flagged) os << "  *";
        os << "\n";
    }
    return os.str();
}

}  // namespace sseg
