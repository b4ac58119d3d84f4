#pragma once

#include <cmath>
#include <cstring>
#include <functional>
#include <vector>

#include "sseg/adadelta.hpp"
#include "sseg/image.hpp"
#include "sseg/network.hpp"

namespace sseg {

// Page canvas and strip geometry. The canvas height is chosen so the strips
// tile it exactly: (h - strip_h) must be a multiple of (strip_h - overlap_h).
struct StripConfig {
    int w = 208, h = 464;
    int strip_h = 176;    // S_h
    int overlap_h = 80;   // O_h

    void validate() const {
        if (w < 1 || h < 1) throw std::invalid_argument("strip config: canvas dims must be >= 1");
        if (!(0 <= overlap_h && overlap_h < strip_h && strip_h <= h)) {
            throw std::invalid_argument("strip config: need 0 <= O_h < S_h <= h, got S_h=" +
                                        std::to_string(strip_h) + " O_h=" + std::to_string(overlap_h) +
                                        " h=" + std::to_string(h));
        }
        const int pitch = strip_h - overlap_h;
        if ((h - strip_h) % pitch != 0) {
            const int k = (h - strip_h + pitch / 2) / pitch;
            const int suggestion = strip_h + k * pitch;
            throw std::invalid_argument(
                "strip config: (h - S_h) not divisible by (S_h - O_h); nearest valid h is " +
                std::to_string(suggestion));
        }
    }

    int pitch() const { return strip_h - overlap_h; }
    int strip_count() const { return 1 + (h - strip_h) / pitch(); }
};

struct StripWindow {
    int index = 0;
    int y_start = 0;  // both the read offset and the write offset
    int v_h = 0;      // rows written to the output mask
};

struct StripPlan {
    StripConfig config;
    std::vector<StripWindow> strips;
};

inline StripPlan plan_strips(const StripConfig& cfg) {
    cfg.validate();
    StripPlan plan;
    plan.config = cfg;
    const int n = cfg.strip_count();
    for (int step = 0; step < n; ++step) {
        StripWindow win;
        win.index = step;
        win.y_start = cfg.pitch() * step;
        win.v_h = (step < n - 1) ? cfg.pitch() : cfg.strip_h;
        plan.strips.push_back(win);
    }
    return plan;
}

// How an input image was fitted to the canvas; kept so predictions can be
// projected back to source coordinates.
struct ScaleRecord {
    int orig_h = 0, orig_w = 0;
    double scale = 1.0;  // canvas px per source px (w / orig_w)
    int scaled_h = 0;    // rows with content before crop/pad
};

struct PageCanvas {
    int h = 0, w = 0;
    std::vector<float> px;
    ScaleRecord rec;

    float at(int y, int x) const { return px[static_cast<std::size_t>(y) * w + x]; }
};

// Resize so the width becomes cfg.w (height scales by the same ratio), then
// bottom-crop or bottom-pad with zeros to cfg.h.
inline PageCanvas preprocess(const GrayImage& img, const StripConfig& cfg) {
    cfg.validate();
    if (img.h < 1 || img.w < 1) throw std::invalid_argument("preprocess: degenerate image");
    const double scale = static_cast<double>(cfg.w) / img.w;
    const int scaled_h = std::max(1, static_cast<int>(std::lround(img.h * scale)));

    GrayImage resized = (img.w == cfg.w && scaled_h == img.h)
                            ? img
                            : resize_bilinear(img, scaled_h, cfg.w);

    PageCanvas canvas;
    canvas.h = cfg.h;
    canvas.w = cfg.w;
    canvas.px.assign(static_cast<std::size_t>(cfg.h) * cfg.w, 0.0f);
    const int copy_rows = std::min(scaled_h, cfg.h);
    std::memcpy(canvas.px.data(), resized.px.data(),
                sizeof(float) * static_cast<std::size_t>(copy_rows) * cfg.w);
    canvas.rec = ScaleRecord{img.h, img.w, scale, scaled_h};
    return canvas;
}

// Nearest-neighbour projection of a canvas-resolution label map back to the
// source image resolution. Rows that were cropped away map to background.
inline LabelImage project_back(const LabelImage& canvas_map, const ScaleRecord& rec) {
    LabelImage out(rec.orig_h, rec.orig_w, 0);
    for (int y = 0; y < rec.orig_h; ++y) {
        const int cy = static_cast<int>((y + 0.5) * rec.scale);
        if (cy >= canvas_map.h || cy >= rec.scaled_h) continue;
        for (int x = 0; x < rec.orig_w; ++x) {
            const int cx = std::min(canvas_map.w - 1, static_cast<int>((x + 0.5) * rec.scale));
            out.at(y, x) = canvas_map.at(cy, cx);
        }
    }
    return out;
}

// Logits handed from one strip to the next, one channel per class across
// all levels. Only the top overlap_h rows are ever written; the rest stays
// zero, and the whole buffer is zeroed at the start of every page.
struct PriorBuffer {
    int channels = 0, strip_h = 0, w = 0;
    int valid_rows = 0;
    std::vector<float> logits;  // channels x strip_h x w

    PriorBuffer() = default;
    PriorBuffer(int channels_, int strip_h_, int w_, int valid_rows_)
        : channels(channels_), strip_h(strip_h_), w(w_), valid_rows(valid_rows_),
          logits(static_cast<std::size_t>(channels_) * strip_h_ * w_, 0.0f) {}

    void reset() { std::fill(logits.begin(), logits.end(), 0.0f); }

    float at(int c, int y, int x) const {
        return logits[(static_cast<std::size_t>(c) * strip_h + y) * w + x];
    }
};

// Per-strip observer used by tests to capture exactly what the runner saw.
template <typename T>
using StripHook = std::function<void(const StripWindow& win,
                                     const std::vector<std::vector<T>>& level_logits,
                                     const PriorBuffer& prior_after)>;

struct PageSegmentation {
    std::vector<LabelImage> levels;             // argmax class per level, canvas resolution
    std::vector<std::vector<float>> logits;     // optional, per level C_l x h x w
};

namespace detail {

template <typename T>
TensorPtr<T> assemble_strip_input(const PageCanvas& canvas, int y0, int strip_h,
                                  const PriorBuffer* prior) {
    const int w = canvas.w;
    const int channels = 1 + (prior ? prior->channels : 0);
    std::vector<T> v(static_cast<std::size_t>(channels) * strip_h * w);
    const float* src = canvas.px.data() + static_cast<std::size_t>(y0) * w;
    for (std::size_t i = 0; i < static_cast<std::size_t>(strip_h) * w; ++i) {
        v[i] = static_cast<T>(src[i]);
    }
    if (prior) {
        T* dst = v.data() + static_cast<std::size_t>(strip_h) * w;
        for (std::size_t i = 0; i < prior->logits.size(); ++i) dst[i] = static_cast<T>(prior->logits[i]);
    }
    return make_tensor<T>({1, channels, strip_h, w}, std::move(v), false);
}

template <typename T>
void update_prior(PriorBuffer& prior, const HierLogits<T>& logits, int strip_h, int overlap_h, int w) {
    int c_off = 0;
    for (const auto& lv : logits) {
        const int C = lv->dim(1);
        for (int c = 0; c < C; ++c) {
            const T* src = lv->values.data() +
                           (static_cast<std::size_t>(c) * strip_h + (strip_h - overlap_h)) * w;
            float* dst = prior.logits.data() + static_cast<std::size_t>(c_off + c) * strip_h * w;
            for (std::size_t i = 0; i < static_cast<std::size_t>(overlap_h) * w; ++i) {
                dst[i] = static_cast<float>(src[i]);
            }
        }
        c_off += C;
    }
}

template <typename T>
void argmax_rows(const TensorPtr<T>& logits, int rows, LabelImage& out, int y_dst) {
    const int C = logits->dim(1), H = logits->dim(2), W = logits->dim(3);
    for (int y = 0; y < rows; ++y) {
        for (int x = 0; x < W; ++x) {
            int best = 0;
            T bestv = logits->values[static_cast<std::size_t>(y) * W + x];
            for (int c = 1; c < C; ++c) {
                const T v = logits->values[(static_cast<std::size_t>(c) * H + y) * W + x];
                if (v > bestv) {
                    bestv = v;
                    best = c;
                }
            }
            out.at(y_dst + y, x) = best;
        }
    }
}

}  // namespace detail

// Strip-by-strip inference over a page. Each strip sees the image rows
// concatenated with the prior channels, predicts all levels, hands its
// bottom overlap rows to the next strip, and contributes v_h rows to the
// output mask.
template <typename T>
PageSegmentation infer_page(const PageCanvas& canvas, const SegNet<T>& net, const StripConfig& cfg,
                            bool keep_logits = false, const StripHook<T>& hook = nullptr) {
    cfg.validate();
    if (canvas.h != cfg.h || canvas.w != cfg.w) {
        throw std::invalid_argument("infer_page: canvas " + std::to_string(canvas.h) + "x" +
                                    std::to_string(canvas.w) + " does not match strip config " +
                                    std::to_string(cfg.h) + "x" + std::to_string(cfg.w));
    }
    NoGradGuard ng;
    const StripPlan plan = plan_strips(cfg);
    const bool uses_prior = net.config.uses_prior();
    const int prior_ch = uses_prior ? net.schema.total_classes() : 0;
    PriorBuffer prior(prior_ch, cfg.strip_h, cfg.w, cfg.overlap_h);

    PageSegmentation seg;
    const int L = net.schema.level_count();
    for (int l = 0; l < L; ++l) seg.levels.emplace_back(cfg.h, cfg.w, 0);
    if (keep_logits) {
        for (int l = 0; l < L; ++l) {
            seg.logits.emplace_back(static_cast<std::size_t>(net.schema.class_count(l)) * cfg.h * cfg.w, 0.0f);
        }
    }

    for (const auto& win : plan.strips) {
        auto input = detail::assemble_strip_input<T>(canvas, win.y_start, cfg.strip_h,
                                                     uses_prior ? &prior : nullptr);
        HierLogits<T> logits = net.forward(input);
        for (int l = 0; l < L; ++l) {
            detail::argmax_rows(logits[static_cast<std::size_t>(l)], win.v_h,
                                seg.levels[static_cast<std::size_t>(l)], win.y_start);
            if (keep_logits) {
                const auto& lv = logits[static_cast<std::size_t>(l)];
                const int C = lv->dim(1);
                for (int c = 0; c < C; ++c) {
                    for (int y = 0; y < win.v_h; ++y) {
                        float* dst = seg.logits[static_cast<std::size_t>(l)].data() +
                                     (static_cast<std::size_t>(c) * cfg.h + win.y_start + y) * cfg.w;
                        const T* src = lv->values.data() +
                                       (static_cast<std::size_t>(c) * cfg.strip_h + y) * cfg.w;
                        for (int x = 0; x < cfg.w; ++x) dst[x] = static_cast<float>(src[x]);
                    }
                }
            }
        }
        if (uses_prior && cfg.overlap_h > 0) {
            detail::update_prior(prior, logits, cfg.strip_h, cfg.overlap_h, cfg.w);
        }
        if (hook) {
            std::vector<std::vector<T>> copies;
            for (const auto& lv : logits) copies.push_back(lv->values);
            hook(win, copies, prior);
        }
    }
    return seg;
}

template <typename T>
struct TrainConfig {
    int batch_strips = 4;
    std::int64_t steps = 2000;
    std::uint64_t seed = 7;
    bool teacher_prior = false;
    T teacher_margin = T(1);
    T rho = T(0.95);
    T epsilon = T(1e-6);
    T lr = T(0.1);
    T decay_factor = T(0.1);
    std::int64_t decay_interval = 2000;

    void validate() const {
        if (batch_strips < 1 || steps < 0) {
            throw std::invalid_argument("train config: counts must be positive");
        }
    }
};

struct TrainLogRow {
    std::int64_t step = 0;
    double loss = 0.0;
    std::vector<double> level_loss;
    double lr = 0.0;
};

// Owns the optimizer and the grad-accumulation cadence: strips accumulate
// gradients, and every batch_strips strips the optimizer steps once. The
// prior entering the next strip carries values only, so no gradient crosses
// strip boundaries and each strip's graph is released before the next one
// is built.
template <typename T>
class Trainer {
public:
    Trainer(SegNet<T>& net, const StripConfig& cfg, const TrainConfig<T>& tcfg)
        : net_(net), cfg_(cfg), tcfg_(tcfg), params_(net.params()) {
        cfg_.validate();
        tcfg_.validate();
        opt_.rho = tcfg.rho;
        opt_.epsilon = tcfg.epsilon;
        opt_.lr_multiplier = tcfg.lr;
        opt_.decay_factor = tcfg.decay_factor;
        opt_.decay_interval = tcfg.decay_interval;
        opt_.attach(params_);
        level_acc_.assign(static_cast<std::size_t>(net.schema.level_count()), 0.0);
    }

    std::int64_t steps_done() const { return opt_.step_count; }
    double lr_multiplier() const { return static_cast<double>(opt_.lr_multiplier); }
    const std::vector<TrainLogRow>& log() const { return log_; }

    // Runs every strip of one page; returns the per-strip losses.
    std::vector<T> train_page(const PageCanvas& canvas, const HierMask& gt) {
        if (static_cast<int>(gt.levels.size()) != net_.schema.level_count()) {
            throw std::invalid_argument("train_page: ground truth level count mismatch");
        }
        for (const auto& lv : gt.levels) {
            if (lv.b != 1 || lv.h != cfg_.h || lv.w != cfg_.w) {
                throw std::invalid_argument("train_page: ground truth resolution mismatch");
            }
        }
        const StripPlan plan = plan_strips(cfg_);
        const bool uses_prior = net_.config.uses_prior();
        const int prior_ch = uses_prior ? net_.schema.total_classes() : 0;
        PriorBuffer prior(prior_ch, cfg_.strip_h, cfg_.w, cfg_.overlap_h);

        std::vector<T> strip_losses;
        for (const auto& win : plan.strips) {
            auto input = detail::assemble_strip_input<T>(canvas, win.y_start, cfg_.strip_h,
                                                         uses_prior ? &prior : nullptr);
            HierLogits<T> logits = net_.forward(input);
            HierMask gt_slice = slice_gt(gt, win.y_start);
            std::vector<T> per_level(logits.size());
            TensorPtr<T> loss;
            for (std::size_t l = 0; l < logits.size(); ++l) {
                auto ce = softmax_ce_map(logits[l], gt_slice.levels[l]);
                per_level[l] = ce->item();
                loss = loss ? add(loss, ce) : ce;
            }
            backward(loss);
            strip_losses.push_back(loss->item());

            if (uses_prior && cfg_.overlap_h > 0) {
                if (tcfg_.teacher_prior) {
                    fill_teacher_prior(prior, gt, win.y_start);
                } else {
                    detail::update_prior(prior, logits, cfg_.strip_h, cfg_.overlap_h, cfg_.w);
                }
            }

            batch_loss_ += static_cast<double>(strip_losses.back());
            for (std::size_t l = 0; l < per_level.size(); ++l) {
                level_acc_[l] += static_cast<double>(per_level[l]);
            }
            if (++pending_ == tcfg_.batch_strips) flush_batch();
        }
        return strip_losses;
    }

private:
    HierMask slice_gt(const HierMask& gt, int y0) const {
        HierMask out;
        for (const auto& lv : gt.levels) {
            ClassMap m(1, cfg_.strip_h, cfg_.w);
            std::memcpy(m.labels.data(), lv.labels.data() + static_cast<std::size_t>(y0) * cfg_.w,
                        sizeof(std::int32_t) * static_cast<std::size_t>(cfg_.strip_h) * cfg_.w);
            out.levels.push_back(std::move(m));
        }
        return out;
    }

    // Ground-truth labels of the overlap rows encoded as one-hot logits.
    void fill_teacher_prior(PriorBuffer& prior, const HierMask& gt, int y0) const {
        prior.reset();
        const int rows = cfg_.overlap_h;
        const int src_y = y0 + cfg_.strip_h - cfg_.overlap_h;
        int c_off = 0;
        for (int l = 0; l < net_.schema.level_count(); ++l) {
            const auto& lv = gt.levels[static_cast<std::size_t>(l)];
            const int C = net_.schema.class_count(l);
            for (int y = 0; y < rows; ++y) {
                for (int x = 0; x < cfg_.w; ++x) {
                    const std::int32_t cls = lv.at(0, src_y + y, x);
                    prior.logits[(static_cast<std::size_t>(c_off + cls) * cfg_.strip_h + y) * cfg_.w + x] =
                        static_cast<float>(tcfg_.teacher_margin);
                }
            }
            c_off += C;
        }
    }

    void flush_batch() {
        opt_.step(params_);
        net_.zero_grads();
        TrainLogRow row;
        row.step = opt_.step_count;
        row.loss = batch_loss_ / pending_;
        for (double acc : level_acc_) row.level_loss.push_back(acc / pending_);
        row.lr = static_cast<double>(opt_.lr_multiplier);
        log_.push_back(std::move(row));
        pending_ = 0;
        batch_loss_ = 0.0;
        std::fill(level_acc_.begin(), level_acc_.end(), 0.0);
    }

    SegNet<T>& net_;
    StripConfig cfg_;
    TrainConfig<T> tcfg_;
    std::vector<TensorPtr<T>> params_;
    AdaDeltaState<T> opt_;
    int pending_ = 0;
    double batch_loss_ = 0.0;
    std::vector<double> level_acc_;
    std::vector<TrainLogRow> log_;
};

}  // namespace sseg
