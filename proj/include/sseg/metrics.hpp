#pragma once

#include <string>
#include <vector>

#include "sseg/instances.hpp"
#include "sseg/schema.hpp"

namespace sseg {

struct ObjectScore {
    double threshold = 0.7;
    std::int64_t tp = 0, fp = 0, fn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    bool precision_defined = true, recall_defined = true;

    void finalize() {
        precision_defined = (tp + fp) > 0;
        recall_defined = (tp + fn) > 0;
        precision = precision_defined ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        recall = recall_defined ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
};

struct ClassReport {
    int level = 0;  // 1-based
    std::string cls;
    bool miou_present = false;  // false: class empty in every image
    double miou = 0.0;
    int miou_images = 0;
    std::vector<ObjectScore> object_scores;  // one per configured threshold
};

struct DecompositionScore {
    ObjectScore rows, cols;
    double precision = 0.0, recall = 0.0, f1 = 0.0;  // arithmetic mean of the two
    bool rows_flagged = false, cols_flagged = false;
};

struct MetricsReport {
    std::string schema_id;
    std::vector<ClassReport> classes;
    bool has_decomposition = false;
    DecompositionScore decomposition;

    std::string to_json() const;
    static MetricsReport from_json(const std::string& text);
    std::string to_text() const;  // aligned columns, one column per structure
};

// Per-image per-class IoU of prediction vs ground truth, averaged over the
// images where pred and gt are not both empty for that class. Object-level
// P/R/F1 pooled over the dataset at each threshold, instances extracted as
// filled hulls.
MetricsReport evaluate_dataset(const std::vector<std::vector<LabelImage>>& preds,
                               const std::vector<std::vector<LabelImage>>& gts,
                               const ClassSchema& schema,
                               const std::vector<double>& thresholds = {0.7});

// Within each table region: row components below area_frac * region area
// are dropped, survivors are extended to the region's full width; columns
// symmetric (full height).
std::pair<std::vector<ObjectInstance>, std::vector<ObjectInstance>> table_decompose_postprocess(
    const LabelImage& row_mask, int row_cls, const LabelImage& col_mask, int col_cls,
    const std::vector<ObjectInstance>& table_regions, double area_frac = 0.02);

// Rows and columns matched separately; reported metrics are the arithmetic
// mean of the two P/R/F1 triples.
DecompositionScore decomposition_score(const std::vector<ObjectInstance>& pred_rows,
                                       const std::vector<ObjectInstance>& pred_cols,
                                       const std::vector<ObjectInstance>& gt_rows,
                                       const std::vector<ObjectInstance>& gt_cols,
                                       double threshold = 0.5);

}  // namespace sseg
