#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "hull_oracle.hpp"
#include "sseg/instances.hpp"
#include "sseg/metrics.hpp"
#include "sseg/rng.hpp"

using namespace sseg;

namespace {

// Exhaustive optimal one-to-one matching: maximal TP count over all
// injective pred->gt assignments with IoU >= threshold.
int best_tp(const std::vector<std::vector<double>>& iou, double thr, std::size_t pred,
            std::vector<std::uint8_t>& gt_used) {
    if (pred == iou.size()) return 0;
    int best = best_tp(iou, thr, pred + 1, gt_used);  // leave this pred unmatched
    for (std::size_t g = 0; g < gt_used.size(); ++g) {
        if (gt_used[g] || iou[pred][g] < thr) continue;
        gt_used[g] = 1;
        best = std::max(best, 1 + best_tp(iou, thr, pred + 1, gt_used));
        gt_used[g] = 0;
    }
    return best;
}

int exhaustive_tp(const std::vector<ObjectInstance>& preds, const std::vector<ObjectInstance>& gts,
                  double thr) {
    std::vector<std::vector<double>> iou(preds.size(), std::vector<double>(gts.size(), 0.0));
    for (std::size_t p = 0; p < preds.size(); ++p) {
        for (std::size_t g = 0; g < gts.size(); ++g) iou[p][g] = instance_iou(preds[p], gts[g]);
    }
    std::vector<std::uint8_t> used(gts.size(), 0);
    return best_tp(iou, thr, 0, used);
}

LabelImage mask_with_boxes(int h, int w, const std::vector<Box>& boxes, int cls) {
    LabelImage m(h, w, 0);
    for (const auto& b : boxes) {
        for (int y = b.y0; y < b.y1; ++y) {
            for (int x = b.x0; x < b.x1; ++x) m.at(y, x) = cls;
        }
    }
    return m;
}

}  // namespace

TEST_CASE("convex_hull basics") {
    // 4 unit-square corners -> the square, CCW, no extra vertices
    std::vector<Point> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    auto hull = convex_hull(sq);
    REQUIRE(hull.size() == 4);
    CHECK(polygon_area(hull) == doctest::Approx(1.0));
    for (const auto& p : sq) CHECK(std::count(hull.begin(), hull.end(), p) == 1);

    // center point is excluded
    std::vector<Point> sq5{{0, 0}, {2, 0}, {2, 2}, {0, 2}, {1, 1}};
    auto hull5 = convex_hull(sq5);
    CHECK(hull5.size() == 4);
    CHECK(std::count(hull5.begin(), hull5.end(), Point{1, 1}) == 0);

    // degenerate sets
    CHECK(convex_hull({{3, 4}}).size() == 1);
    auto seg = convex_hull({{0, 0}, {2, 2}, {1, 1}});
    REQUIRE(seg.size() == 2);
    CHECK(seg[0] == Point{0, 0});
    CHECK(seg[1] == Point{2, 2});

    // collinear boundary points are dropped
    auto col = convex_hull({{0, 0}, {2, 0}, {4, 0}, {4, 2}, {0, 2}});
    CHECK(col.size() == 4);
}

TEST_CASE("convex_hull equals the O(n^3) brute force on random point sets") {
    Rng rng(808);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = static_cast<int>(rng.next_int(1, 50));
        std::vector<Point> pts;
        for (int i = 0; i < n; ++i) {
            pts.push_back({rng.next_int(-30, 30), rng.next_int(-30, 30)});
        }
        auto fast = convex_hull(pts);
        auto slow = ssegtest::brute_force_hull(pts);

        REQUIRE(fast.size() == slow.size());
        // same cyclic order; align on the minimum vertex
        const auto fmin = std::min_element(fast.begin(), fast.end()) - fast.begin();
        const auto smin = std::min_element(slow.begin(), slow.end()) - slow.begin();
        for (std::size_t i = 0; i < fast.size(); ++i) {
            CHECK(fast[(fmin + i) % fast.size()] == slow[(smin + i) % slow.size()]);
        }
        // every input point inside, per the oracle's own membership test
        for (const auto& p : pts) CHECK(ssegtest::oracle_inside(slow, p));
    }
}

TEST_CASE("hull idempotence and area dominance") {
    Rng rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = static_cast<int>(rng.next_int(3, 25));
        std::vector<Point> pts;
        for (int i = 0; i < n; ++i) pts.push_back({rng.next_int(0, 40), rng.next_int(0, 40)});
        auto h1 = convex_hull(pts);
        auto h2 = convex_hull(h1);
        CHECK(h1 == h2);
    }
}

TEST_CASE("extract_instances") {
    SUBCASE("two disjoint rectangles with exact areas") {
        auto mask = mask_with_boxes(40, 40, {{2, 2, 10, 8}, {20, 20, 30, 35}}, 2);
        auto inst = extract_instances(mask, 2, false);
        REQUIRE(inst.size() == 2);
        CHECK(inst[0].area == 8 * 6);
        CHECK(inst[1].area == 10 * 15);
        CHECK(inst[0].bbox == Box{2, 2, 10, 8});
    }

    SUBCASE("plus-sign component with hull: area equals brute-force hull fill") {
        LabelImage mask(30, 30, 0);
        for (int y = 5; y < 20; ++y) {
            for (int x = 10; x < 15; ++x) mask.at(y, x) = 2;
        }
        for (int y = 10; y < 15; ++y) {
            for (int x = 3; x < 24; ++x) mask.at(y, x) = 2;
        }
        auto inst = extract_instances(mask, 2, true);
        REQUIRE(inst.size() == 1);

        std::vector<Point> pixels;
        for (int y = 0; y < 30; ++y) {
            for (int x = 0; x < 30; ++x) {
                if (mask.at(y, x) == 2) pixels.push_back({x, y});
            }
        }
        auto oracle = ssegtest::brute_force_hull(pixels);
        std::int64_t oracle_area = 0;
        for (int y = 0; y < 30; ++y) {
            for (int x = 0; x < 30; ++x) {
                const bool in = ssegtest::oracle_inside(oracle, {x, y});
                if (in) ++oracle_area;
                CHECK(inst[0].at(y, x) == in);
            }
        }
        CHECK(inst[0].area == oracle_area);
        CHECK(inst[0].area > static_cast<std::int64_t>(pixels.size()));  // hull fills the notches
    }

    SUBCASE("background and border ids yield no instances") {
        auto mask = mask_with_boxes(10, 10, {{1, 1, 5, 5}}, 1);
        CHECK(extract_instances(mask, 0, false).empty());
        CHECK(extract_instances(mask, 1, false).empty());
        LabelImage empty(10, 10, 0);
        CHECK(extract_instances(empty, 2, true).empty());
    }
}

TEST_CASE("instance_iou") {
    auto a = instance_from_box(Box{0, 0, 10, 10});
    auto b = instance_from_box(Box{0, 0, 10, 10});
    CHECK(instance_iou(a, b) == 1.0);

    auto c = instance_from_box(Box{20, 20, 30, 30});
    CHECK(instance_iou(a, c) == 0.0);

    // 10x10 boxes offset by 5 columns: I=50, U=150
    auto d = instance_from_box(Box{5, 0, 15, 10});
    CHECK(instance_iou(a, d) == doctest::Approx(1.0 / 3.0));

    // symmetry and range on random boxes
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        auto r1 = instance_from_box(Box{static_cast<int>(rng.next_int(0, 20)),
                                        static_cast<int>(rng.next_int(0, 20)),
                                        static_cast<int>(rng.next_int(21, 40)),
                                        static_cast<int>(rng.next_int(21, 40))});
        auto r2 = instance_from_box(Box{static_cast<int>(rng.next_int(0, 20)),
                                        static_cast<int>(rng.next_int(0, 20)),
                                        static_cast<int>(rng.next_int(21, 40)),
                                        static_cast<int>(rng.next_int(21, 40))});
        const double ab = instance_iou(r1, r2);
        CHECK(ab == instance_iou(r2, r1));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        if (r1.bbox == r2.bbox) CHECK(ab == 1.0);
    }
}

TEST_CASE("match_instances") {
    SUBCASE("1 pred matching 1 of 2 gts at IoU 0.8") {
        // pred overlaps gt1 with IoU 0.8: 10x10 vs 10x8 shifted
        auto pred = instance_from_box(Box{0, 0, 10, 10});
        auto gt1 = instance_from_box(Box{0, 1, 10, 10});  // IoU 9/10 = 0.9
        auto gt2 = instance_from_box(Box{30, 30, 40, 40});
        auto res = match_instances({pred}, {gt1, gt2}, 0.7);
        CHECK(res.tp == 1);
        CHECK(res.fp == 0);
        CHECK(res.fn == 1);
        CHECK(res.precision == doctest::Approx(1.0));
        CHECK(res.recall == doctest::Approx(0.5));
        CHECK(res.f1 == doctest::Approx(2.0 / 3.0));
    }

    SUBCASE("empty preds against nonempty gts: flagged precision, zero recall") {
        auto gt = instance_from_box(Box{0, 0, 5, 5});
        auto res = match_instances({}, {gt}, 0.7);
        CHECK(!res.precision_defined);
        CHECK(res.precision == 0.0);
        CHECK(res.recall == 0.0);
        CHECK(res.f1 == 0.0);
    }

    SUBCASE("raising the threshold never increases TP") {
        Rng rng(19);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<ObjectInstance> preds, gts;
            const int np = static_cast<int>(rng.next_int(1, 5));
            const int ng = static_cast<int>(rng.next_int(1, 5));
            for (int i = 0; i < np; ++i) {
                const int x = static_cast<int>(rng.next_int(0, 30));
                const int y = static_cast<int>(rng.next_int(0, 30));
                preds.push_back(instance_from_box(Box{x, y, x + static_cast<int>(rng.next_int(4, 12)),
                                                      y + static_cast<int>(rng.next_int(4, 12))}));
            }
            for (int i = 0; i < ng; ++i) {
                const int x = static_cast<int>(rng.next_int(0, 30));
                const int y = static_cast<int>(rng.next_int(0, 30));
                gts.push_back(instance_from_box(Box{x, y, x + static_cast<int>(rng.next_int(4, 12)),
                                                    y + static_cast<int>(rng.next_int(4, 12))}));
            }
            std::int64_t prev = std::numeric_limits<std::int64_t>::max();
            for (double thr = 0.5; thr <= 0.91; thr += 0.1) {
                auto res = match_instances(preds, gts, thr);
                CHECK(res.tp <= prev);
                prev = res.tp;
            }
        }
    }
}

TEST_CASE("greedy matching agrees with exhaustive optimal on >=95% of 1000 scenes") {
    Rng rng(2718);
    int agree = 0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        std::vector<ObjectInstance> preds, gts;
        const int np = static_cast<int>(rng.next_int(0, 6));
        const int ng = static_cast<int>(rng.next_int(1, 6));
        for (int i = 0; i < np; ++i) {
            const int x = static_cast<int>(rng.next_int(0, 24));
            const int y = static_cast<int>(rng.next_int(0, 24));
            preds.push_back(instance_from_box(Box{x, y, x + static_cast<int>(rng.next_int(6, 16)),
                                                  y + static_cast<int>(rng.next_int(6, 16))}));
        }
        for (int i = 0; i < ng; ++i) {
            // gts near preds so borderline overlaps actually occur
            if (!preds.empty() && rng.next_bool(0.7)) {
                const auto& base = preds[static_cast<std::size_t>(rng.next_int(0, np - 1))].bbox;
                const int dx = static_cast<int>(rng.next_int(-4, 4));
                const int dy = static_cast<int>(rng.next_int(-4, 4));
                gts.push_back(instance_from_box(
                    Box{base.x0 + dx, base.y0 + dy, base.x1 + dx, base.y1 + dy}));
            } else {
                const int x = static_cast<int>(rng.next_int(0, 24));
                const int y = static_cast<int>(rng.next_int(0, 24));
                gts.push_back(instance_from_box(Box{x, y, x + static_cast<int>(rng.next_int(6, 16)),
                                                    y + static_cast<int>(rng.next_int(6, 16))}));
            }
        }
        auto greedy = match_instances(preds, gts, 0.5);
        const int optimal = exhaustive_tp(preds, gts, 0.5);
        CHECK(greedy.tp <= optimal);
        if (greedy.tp == optimal) ++agree;
    }
    CHECK(agree >= 950);
}

TEST_CASE("table decomposition post-processing") {
    const int H = 60, W = 80;
    auto region = instance_from_box(Box{10, 10, 70, 50}, 2, 1);

    SUBCASE("three 60%-width row blobs become full-width rows") {
        LabelImage rows(H, W, 0);
        for (int r = 0; r < 3; ++r) {
            const int y0 = 12 + r * 12;
            for (int y = y0; y < y0 + 8; ++y) {
                for (int x = 14; x < 14 + 36; ++x) rows.at(y, x) = 2;  // 36 of 60 px wide
            }
        }
        LabelImage cols(H, W, 0);
        auto [out_rows, out_cols] = table_decompose_postprocess(rows, 2, cols, 2, {region}, 0.02);
        REQUIRE(out_rows.size() == 3);
        CHECK(out_cols.empty());
        for (const auto& r : out_rows) {
            CHECK(r.bbox.x0 == 10);
            CHECK(r.bbox.x1 == 70);
            CHECK(r.area == 60 * 8);
        }
    }

    SUBCASE("speck below the area threshold is removed") {
        LabelImage rows(H, W, 0);
        rows.at(20, 20) = 2;
        rows.at(20, 21) = 2;  // 2 px blob, region area 2400, threshold 48
        LabelImage cols(H, W, 0);
        auto [out_rows, out_cols] = table_decompose_postprocess(rows, 2, cols, 2, {region}, 0.02);
        CHECK(out_rows.empty());
        CHECK(out_cols.empty());
    }

    SUBCASE("columns extend to full height") {
        LabelImage rows(H, W, 0);
        LabelImage cols(H, W, 0);
        for (int x = 20; x < 28; ++x) {
            for (int y = 15; y < 30; ++y) cols.at(y, x) = 2;
        }
        auto [out_rows, out_cols] = table_decompose_postprocess(rows, 2, cols, 2, {region}, 0.02);
        REQUIRE(out_cols.size() == 1);
        CHECK(out_cols[0].bbox.y0 == 10);
        CHECK(out_cols[0].bbox.y1 == 50);
    }

    SUBCASE("no table regions means empty output regardless of masks") {
        auto rows = mask_with_boxes(H, W, {{0, 0, 80, 60}}, 2);
        auto [out_rows, out_cols] = table_decompose_postprocess(rows, 2, rows, 2, {}, 0.02);
        CHECK(out_rows.empty());
        CHECK(out_cols.empty());
    }
}

TEST_CASE("decomposition_score") {
    auto r1 = instance_from_box(Box{0, 0, 40, 8});
    auto r2 = instance_from_box(Box{0, 12, 40, 20});
    auto c1 = instance_from_box(Box{0, 0, 18, 20});
    auto c2 = instance_from_box(Box{22, 0, 40, 20});

    SUBCASE("perfect rows and cols score (1,1,1)") {
        auto s = decomposition_score({r1, r2}, {c1, c2}, {r1, r2}, {c1, c2}, 0.5);
        CHECK(s.precision == doctest::Approx(1.0));
        CHECK(s.recall == doctest::Approx(1.0));
        CHECK(s.f1 == doctest::Approx(1.0));
    }

    SUBCASE("rows perfect, cols half: averaged (0.75,0.75,0.75)") {
        // one of two columns predicted, plus a bogus extra far away
        auto bogus = instance_from_box(Box{0, 100, 5, 120});
        auto s = decomposition_score({r1, r2}, {c1, bogus}, {r1, r2}, {c1, c2}, 0.5);
        CHECK(s.precision == doctest::Approx(0.75));
        CHECK(s.recall == doctest::Approx(0.75));
        CHECK(s.f1 == doctest::Approx(0.75));
    }

    SUBCASE("all-empty predictions score zero with flags") {
        auto s = decomposition_score({}, {}, {r1}, {c1}, 0.5);
        CHECK(s.precision == 0.0);
        CHECK(s.recall == 0.0);
        CHECK(s.f1 == 0.0);
        CHECK(s.rows_flagged);
        CHECK(s.cols_flagged);
    }
}

TEST_CASE("dataset MIoU: per-image averaging with empty-class skipping") {
    const auto schema = ClassSchema::document();
    // image 1: textrun pred/gt boxes with IoU 1/3; image 2: class absent
    std::vector<std::vector<LabelImage>> preds, gts;
    {
        std::vector<LabelImage> p, g;
        for (int l = 0; l < 4; ++l) {
            p.emplace_back(20, 20, 0);
            g.emplace_back(20, 20, 0);
        }
        p[0] = mask_with_boxes(20, 20, {{0, 0, 10, 10}}, 2);
        g[0] = mask_with_boxes(20, 20, {{5, 0, 15, 10}}, 2);
        preds.push_back(p);
        gts.push_back(g);
    }
    {
        std::vector<LabelImage> p, g;
        for (int l = 0; l < 4; ++l) {
            p.emplace_back(20, 20, 0);
            g.emplace_back(20, 20, 0);
        }
        preds.push_back(p);
        gts.push_back(g);
    }
    auto report = evaluate_dataset(preds, gts, schema, {0.7});
    const auto& textrun = report.classes[0];
    REQUIRE(textrun.cls == "textrun");
    CHECK(textrun.miou_present);
    CHECK(textrun.miou_images == 1);  // second image skipped
    CHECK(textrun.miou == doctest::Approx(1.0 / 3.0));

    // a class empty everywhere is reported absent, not zero
    const auto& widget = report.classes[1];
    REQUIRE(widget.cls == "widget");
    CHECK(!widget.miou_present);

    // identical masks give IoU 1; disjoint give 0
    gts[0][0] = preds[0][0];
    auto r2 = evaluate_dataset(preds, gts, schema, {0.7});
    CHECK(r2.classes[0].miou == doctest::Approx(1.0));
}

TEST_CASE("metrics report serialization round-trips exactly") {
    MetricsReport r;
    r.schema_id = "default";
    ClassReport c;
    c.level = 1;
    c.cls = "textrun";
    c.miou_present = true;
    c.miou = 0.875;
    c.miou_images = 42;
    ObjectScore s;
    s.threshold = 0.7;
    s.tp = 10;
    s.fp = 3;
    s.fn = 2;
    s.finalize();
    c.object_scores.push_back(s);
    r.classes.push_back(c);
    r.has_decomposition = true;
    r.decomposition.rows = s;
    r.decomposition.cols = s;
    r.decomposition.precision = s.precision;
    r.decomposition.recall = s.recall;
    r.decomposition.f1 = s.f1;

    const std::string json1 = r.to_json();
    auto back = MetricsReport::from_json(json1);
    CHECK(back.to_json() == json1);
    CHECK(back.classes[0].miou == r.classes[0].miou);
    CHECK(back.decomposition.rows.tp == 10);

    CHECK(r.to_text().find("textrun") != std::string::npos);
}
