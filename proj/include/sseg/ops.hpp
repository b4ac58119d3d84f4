#pragma once

#include <cmath>
#include <cstring>
#include <limits>
#include <span>

#include "sseg/parallel.hpp"
#include "sseg/tensor.hpp"

namespace sseg {

enum class LayerKind { conv, conv_transpose, maxpool, relu, concat };
enum class PaddingMode { same, valid };

struct LayerSpec {
    LayerKind kind = LayerKind::conv;
    int kh = 1, kw = 1;
    int in_ch = 1, out_ch = 1;
    int stride = 1;
    int dil_y = 1, dil_x = 1;
    PaddingMode padding = PaddingMode::same;

    void validate() const {
        if (kh < 1 || kw < 1) throw std::invalid_argument("layer kernel dims must be >= 1");
        if (stride != 1 && stride != 2) throw std::invalid_argument("layer stride must be 1 or 2");
        if (dil_y < 1 || dil_x < 1) throw std::invalid_argument("layer dilation must be >= 1");
        if (in_ch < 1 || out_ch < 1) throw std::invalid_argument("layer channels must be >= 1");
    }

    int span_h() const { return (kh - 1) * dil_y + 1; }
    int span_w() const { return (kw - 1) * dil_x + 1; }
};

// The context-encoder banks are built from 1d kernels only: one of the two
// kernel dims is 9 and the other is 1.
inline void validate_bdb_kernel(const LayerSpec& spec) {
    const bool vertical = (spec.kh == 9 && spec.kw == 1);
    const bool horizontal = (spec.kh == 1 && spec.kw == 9);
    if (!vertical && !horizontal) {
        throw std::invalid_argument("bdb kernel must be 9x1 or 1x9, got " +
                                    std::to_string(spec.kh) + "x" + std::to_string(spec.kw));
    }
}

namespace detail {

struct Pad2d {
    int top = 0, bottom = 0, left = 0, right = 0;
};

// "same" keeps out = ceil(in / stride); the odd pixel goes bottom/right.
inline Pad2d compute_padding(const LayerSpec& spec, int h, int w) {
    Pad2d p;
    if (spec.padding == PaddingMode::same) {
        const int out_h = (h + spec.stride - 1) / spec.stride;
        const int out_w = (w + spec.stride - 1) / spec.stride;
        const int tot_h = std::max(0, (out_h - 1) * spec.stride + spec.span_h() - h);
        const int tot_w = std::max(0, (out_w - 1) * spec.stride + spec.span_w() - w);
        p.top = tot_h / 2;
        p.bottom = tot_h - p.top;
        p.left = tot_w / 2;
        p.right = tot_w - p.left;
    }
    return p;
}

template <typename T>
std::vector<T> pad_input(const Tensor<T>& x, const Pad2d& p) {
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Hp = H + p.top + p.bottom;
    const int Wp = W + p.left + p.right;
    std::vector<T> out(static_cast<std::size_t>(B) * C * Hp * Wp, T(0));
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            const T* src = x.values.data() + (static_cast<std::size_t>(b) * C + c) * H * W;
            T* dst = out.data() + ((static_cast<std::size_t>(b) * C + c) * Hp + p.top) * Wp + p.left;
            for (int y = 0; y < H; ++y) {
                std::memcpy(dst + static_cast<std::size_t>(y) * Wp, src + static_cast<std::size_t>(y) * W,
                            sizeof(T) * static_cast<std::size_t>(W));
            }
        }
    }
    return out;
}

inline void require_4d(const Shape& s, const char* what) {
    if (s.size() != 4) {
        throw std::invalid_argument(std::string(what) + " must be 4-d, got " + shape_str(s));
    }
}

}  // namespace detail

// Dilated 2-d convolution, weights (out_ch, in_ch, kh, kw), bias (out_ch)
// or nullptr. Output follows standard convolution arithmetic; "same"
// padding preserves H,W at stride 1.
template <typename T>
TensorPtr<T> conv2d(const TensorPtr<T>& x, const LayerSpec& spec, const TensorPtr<T>& w,
                    const TensorPtr<T>& b) {
    spec.validate();
    detail::require_4d(x->shape, "conv2d input");
    detail::require_4d(w->shape, "conv2d weights");
    const int B = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    if (C != spec.in_ch) {
        throw std::invalid_argument("conv2d: input channels " + std::to_string(C) +
                                    " != spec in_ch " + std::to_string(spec.in_ch));
    }
    if (w->dim(0) != spec.out_ch || w->dim(1) != spec.in_ch || w->dim(2) != spec.kh ||
        w->dim(3) != spec.kw) {
        throw std::invalid_argument("conv2d: weight shape " + shape_str(w->shape) +
                                    " does not match spec (" + std::to_string(spec.out_ch) + "," +
                                    std::to_string(spec.in_ch) + "," + std::to_string(spec.kh) + "," +
                                    std::to_string(spec.kw) + ")");
    }
    if (b && (b->shape.size() != 1 || b->dim(0) != spec.out_ch)) {
        throw std::invalid_argument("conv2d: bias shape " + shape_str(b->shape) + " != (" +
                                    std::to_string(spec.out_ch) + ")");
    }

    const detail::Pad2d pad = detail::compute_padding(spec, H, W);
    const int Hp = H + pad.top + pad.bottom;
    const int Wp = W + pad.left + pad.right;
    if (Hp < spec.span_h() || Wp < spec.span_w()) {
        throw std::invalid_argument("conv2d: input " + shape_str(x->shape) +
                                    " smaller than kernel span " + std::to_string(spec.span_h()) +
                                    "x" + std::to_string(spec.span_w()));
    }
    const int Ho = (Hp - spec.span_h()) / spec.stride + 1;
    const int Wo = (Wp - spec.span_w()) / spec.stride + 1;
    const int Co = spec.out_ch;
    const int s = spec.stride;
    const int dy = spec.dil_y, dx = spec.dil_x;
    const int KH = spec.kh, KW = spec.kw;

    const bool req = GradMode::enabled() && (x->requires_grad || w->requires_grad || (b && b->requires_grad));
    auto out = zeros<T>({B, Co, Ho, Wo}, req);

    const std::vector<T> xpad = detail::pad_input(*x, pad);
    const T* xp = xpad.data();
    const T* wp = w->values.data();
    T* op = out->values.data();

    parallel_for(static_cast<std::int64_t>(B) * Co, [&](std::int64_t idx) {
        const int bi = static_cast<int>(idx / Co);
        const int co = static_cast<int>(idx % Co);
        T* oplane = op + (static_cast<std::size_t>(bi) * Co + co) * Ho * Wo;
        const T bias = b ? b->values[static_cast<std::size_t>(co)] : T(0);
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(Ho) * Wo; ++i) oplane[i] = bias;
        for (int ci = 0; ci < C; ++ci) {
            const T* xplane = xp + (static_cast<std::size_t>(bi) * C + ci) * Hp * Wp;
            const T* wbase = wp + (static_cast<std::size_t>(co) * C + ci) * KH * KW;
            for (int kh = 0; kh < KH; ++kh) {
                for (int kw = 0; kw < KW; ++kw) {
                    const T wv = wbase[static_cast<std::size_t>(kh) * KW + kw];
                    if (wv == T(0)) continue;
                    for (int ho = 0; ho < Ho; ++ho) {
                        const T* xrow = xplane + static_cast<std::size_t>(ho * s + kh * dy) * Wp + kw * dx;
                        T* orow = oplane + static_cast<std::size_t>(ho) * Wo;
                        if (s == 1) {
                            for (int wo = 0; wo < Wo; ++wo) orow[wo] += wv * xrow[wo];
                        } else {
                            for (int wo = 0; wo < Wo; ++wo) orow[wo] += wv * xrow[static_cast<std::size_t>(wo) * s];
                        }
                    }
                }
            }
        }
    });

    if (req) {
        out->parents = {x, w};
        if (b) out->parents.push_back(b);
        Tensor<T>* onode = out.get();
        TensorPtr<T> xh = x, wh = w, bh = b;
        out->backprop = [onode, xh, wh, bh, pad, B, C, H, W, Hp, Wp, Ho, Wo, Co, s, dy, dx, KH, KW]() {
            const std::vector<T> xpad2 = detail::pad_input(*xh, pad);
            const T* gp = onode->grad.data();

            if (bh && bh->requires_grad) {
                bh->ensure_grad();
                for (int co = 0; co < Co; ++co) {
                    T acc = T(0);
                    for (int bi = 0; bi < B; ++bi) {
                        const T* gplane = gp + (static_cast<std::size_t>(bi) * Co + co) * Ho * Wo;
                        for (std::int64_t i = 0; i < static_cast<std::int64_t>(Ho) * Wo; ++i) acc += gplane[i];
                    }
                    bh->grad[static_cast<std::size_t>(co)] += acc;
                }
            }

            if (wh->requires_grad) {
                wh->ensure_grad();
                parallel_for(Co, [&](std::int64_t co) {
                    for (int ci = 0; ci < C; ++ci) {
                        T* wg = wh->grad.data() + (static_cast<std::size_t>(co) * C + ci) * KH * KW;
                        for (int kh = 0; kh < KH; ++kh) {
                            for (int kw = 0; kw < KW; ++kw) {
                                T acc = T(0);
                                for (int bi = 0; bi < B; ++bi) {
                                    const T* gplane = gp + (static_cast<std::size_t>(bi) * Co + co) * Ho * Wo;
                                    const T* xplane = xpad2.data() + (static_cast<std::size_t>(bi) * C + ci) * Hp * Wp;
                                    for (int ho = 0; ho < Ho; ++ho) {
                                        const T* xrow = xplane + static_cast<std::size_t>(ho * s + kh * dy) * Wp + kw * dx;
                                        const T* grow = gplane + static_cast<std::size_t>(ho) * Wo;
                                        if (s == 1) {
                                            for (int wo = 0; wo < Wo; ++wo) acc += grow[wo] * xrow[wo];
                                        } else {
                                            for (int wo = 0; wo < Wo; ++wo) acc += grow[wo] * xrow[static_cast<std::size_t>(wo) * s];
                                        }
                                    }
                                }
                                wg[static_cast<std::size_t>(kh) * KW + kw] += acc;
                            }
                        }
                    }
                });
            }

            if (xh->requires_grad) {
                xh->ensure_grad();
                parallel_for(static_cast<std::int64_t>(B) * C, [&](std::int64_t idx) {
                    const int bi = static_cast<int>(idx / C);
                    const int ci = static_cast<int>(idx % C);
                    std::vector<T> dplane(static_cast<std::size_t>(Hp) * Wp, T(0));
                    for (int co = 0; co < Co; ++co) {
                        const T* gplane = gp + (static_cast<std::size_t>(bi) * Co + co) * Ho * Wo;
                        const T* wbase = wh->values.data() + (static_cast<std::size_t>(co) * C + ci) * KH * KW;
                        for (int kh = 0; kh < KH; ++kh) {
                            for (int kw = 0; kw < KW; ++kw) {
                                const T wv = wbase[static_cast<std::size_t>(kh) * KW + kw];
                                if (wv == T(0)) continue;
                                for (int ho = 0; ho < Ho; ++ho) {
                                    T* drow = dplane.data() + static_cast<std::size_t>(ho * s + kh * dy) * Wp + kw * dx;
                                    const T* grow = gplane + static_cast<std::size_t>(ho) * Wo;
                                    if (s == 1) {
                                        for (int wo = 0; wo < Wo; ++wo) drow[wo] += wv * grow[wo];
                                    } else {
                                        for (int wo = 0; wo < Wo; ++wo) drow[static_cast<std::size_t>(wo) * s] += wv * grow[wo];
                                    }
                                }
                            }
                        }
                    }
                    T* xg = xh->grad.data() + (static_cast<std::size_t>(bi) * C + ci) * H * W;
                    for (int y = 0; y < H; ++y) {
                        const T* drow = dplane.data() + static_cast<std::size_t>(y + pad.top) * Wp + pad.left;
                        T* grow = xg + static_cast<std::size_t>(y) * W;
                        for (int xcol = 0; xcol < W; ++xcol) grow[xcol] += drow[xcol];
                    }
                });
            }
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> conv2d(const TensorPtr<T>& x, const LayerSpec& spec, const TensorPtr<T>& w) {
    return conv2d(x, spec, w, TensorPtr<T>{});
}

// Transposed convolution, weights (in_ch, out_ch, kh, kw), no padding:
// out = (in - 1) * stride + kernel. With kernel 2 and stride 2 this is the
// exact 2x upsampler the decoder relies on.
template <typename T>
TensorPtr<T> conv_transpose2d(const TensorPtr<T>& x, const LayerSpec& spec, const TensorPtr<T>& w) {
    spec.validate();
    if (spec.stride != 2 && spec.stride != 1) {
        throw std::invalid_argument("conv_transpose2d: unsupported stride " + std::to_string(spec.stride));
    }
    if (spec.dil_y != 1 || spec.dil_x != 1) {
        throw std::invalid_argument("conv_transpose2d: dilation not supported");
    }
    detail::require_4d(x->shape, "conv_transpose2d input");
    detail::require_4d(w->shape, "conv_transpose2d weights");
    const int B = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    if (C != spec.in_ch || w->dim(0) != spec.in_ch || w->dim(1) != spec.out_ch ||
        w->dim(2) != spec.kh || w->dim(3) != spec.kw) {
        throw std::invalid_argument("conv_transpose2d: weight shape " + shape_str(w->shape) +
                                    " does not match spec/input channels");
    }
    const int s = spec.stride, KH = spec.kh, KW = spec.kw;
    const int Co = spec.out_ch;
    const int Ho = (H - 1) * s + KH;
    const int Wo = (W - 1) * s + KW;

    const bool req = GradMode::enabled() && (x->requires_grad || w->requires_grad);
    auto out = zeros<T>({B, Co, Ho, Wo}, req);
    T* op = out->values.data();

    parallel_for(static_cast<std::int64_t>(B) * Co, [&](std::int64_t idx) {
        const int bi = static_cast<int>(idx / Co);
        const int co = static_cast<int>(idx % Co);
        T* oplane = op + (static_cast<std::size_t>(bi) * Co + co) * Ho * Wo;
        for (int ci = 0; ci < C; ++ci) {
            const T* xplane = x->values.data() + (static_cast<std::size_t>(bi) * C + ci) * H * W;
            const T* wbase = w->values.data() + (static_cast<std::size_t>(ci) * Co + co) * KH * KW;
            for (int kh = 0; kh < KH; ++kh) {
                for (int kw = 0; kw < KW; ++kw) {
                    const T wv = wbase[static_cast<std::size_t>(kh) * KW + kw];
                    if (wv == T(0)) continue;
                    for (int hi = 0; hi < H; ++hi) {
                        const T* xrow = xplane + static_cast<std::size_t>(hi) * W;
                        T* orow = oplane + static_cast<std::size_t>(hi * s + kh) * Wo + kw;
                        for (int wi = 0; wi < W; ++wi) orow[static_cast<std::size_t>(wi) * s] += wv * xrow[wi];
                    }
                }
            }
        }
    });

    if (req) {
        out->parents = {x, w};
        Tensor<T>* onode = out.get();
        TensorPtr<T> xh = x, wh = w;
        out->backprop = [onode, xh, wh, B, C, H, W, Ho, Wo, Co, s, KH, KW]() {
            const T* gp = onode->grad.data();
            if (xh->requires_grad) {
                xh->ensure_grad();
                parallel_for(static_cast<std::int64_t>(B) * C, [&](std::int64_t idx) {
                    const int bi = static_cast<int>(idx / C);
                    const int ci = static_cast<int>(idx % C);
                    T* xg = xh->grad.data() + (static_cast<std::size_t>(bi) * C + ci) * H * W;
                    for (int co = 0; co < Co; ++co) {
                        const T* gplane = gp + (static_cast<std::size_t>(bi) * Co + co) * Ho * Wo;
                        const T* wbase = wh->values.data() + (static_cast<std::size_t>(ci) * Co + co) * KH * KW;
                        for (int kh = 0; kh < KH; ++kh) {
                            for (int kw = 0; kw < KW; ++kw) {
                                const T wv = wbase[static_cast<std::size_t>(kh) * KW + kw];
                                if (wv == T(0)) continue;
                                for (int hi = 0; hi < H; ++hi) {
                                    const T* grow = gplane + static_cast<std::size_t>(hi * s + kh) * Wo + kw;
                                    T* xrow = xg + static_cast<std::size_t>(hi) * W;
                                    for (int wi = 0; wi < W; ++wi) xrow[wi] += wv * grow[static_cast<std::size_t>(wi) * s];
                                }
                            }
                        }
                    }
                });
            }
            if (wh->requires_grad) {
                wh->ensure_grad();
                parallel_for(C, [&](std::int64_t ci) {
                    for (int co = 0; co < Co; ++co) {
                        T* wg = wh->grad.data() + (static_cast<std::size_t>(ci) * Co + co) * KH * KW;
                        for (int kh = 0; kh < KH; ++kh) {
                            for (int kw = 0; kw < KW; ++kw) {
                                T acc = T(0);
                                for (int bi = 0; bi < B; ++bi) {
                                    const T* xplane = xh->values.data() + (static_cast<std::size_t>(bi) * C + ci) * H * W;
                                    const T* gplane = gp + (static_cast<std::size_t>(bi) * Co + co) * Ho * Wo;
                                    for (int hi = 0; hi < H; ++hi) {
                                        const T* xrow = xplane + static_cast<std::size_t>(hi) * W;
                                        const T* grow = gplane + static_cast<std::size_t>(hi * s + kh) * Wo + kw;
                                        for (int wi = 0; wi < W; ++wi) acc += xrow[wi] * grow[static_cast<std::size_t>(wi) * s];
                                    }
                                }
                                wg[static_cast<std::size_t>(kh) * KW + kw] += acc;
                            }
                        }
                    }
                });
            }
        };
    }
    return out;
}

// 2x2 max pooling at stride 2. Odd trailing rows/columns are treated as
// padded with -inf. Ties route the gradient to the first maximal element
// in window scan order.
template <typename T>
TensorPtr<T> maxpool2d(const TensorPtr<T>& x) {
    detail::require_4d(x->shape, "maxpool2d input");
    const int B = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    const int Ho = (H + 1) / 2;
    const int Wo = (W + 1) / 2;
    const bool req = GradMode::enabled() && x->requires_grad;
    auto out = zeros<T>({B, C, Ho, Wo}, req);
    auto argmax = std::make_shared<std::vector<std::int32_t>>(out->values.size());

    parallel_for(static_cast<std::int64_t>(B) * C, [&](std::int64_t idx) {
        const T* xplane = x->values.data() + static_cast<std::size_t>(idx) * H * W;
        T* oplane = out->values.data() + static_cast<std::size_t>(idx) * Ho * Wo;
        std::int32_t* aplane = argmax->data() + static_cast<std::size_t>(idx) * Ho * Wo;
        for (int ho = 0; ho < Ho; ++ho) {
            for (int wo = 0; wo < Wo; ++wo) {
                T best = -std::numeric_limits<T>::infinity();
                std::int32_t best_idx = -1;
                for (int dy = 0; dy < 2; ++dy) {
                    const int y = ho * 2 + dy;
                    if (y >= H) break;
                    for (int dxx = 0; dxx < 2; ++dxx) {
                        const int xcol = wo * 2 + dxx;
                        if (xcol >= W) break;
                        const T v = xplane[static_cast<std::size_t>(y) * W + xcol];
                        if (v > best) {
                            best = v;
                            best_idx = y * W + xcol;
                        }
                    }
                }
                oplane[static_cast<std::size_t>(ho) * Wo + wo] = best;
                aplane[static_cast<std::size_t>(ho) * Wo + wo] = best_idx;
            }
        }
    });

    if (req) {
        out->parents = {x};
        Tensor<T>* onode = out.get();
        TensorPtr<T> xh = x;
        out->backprop = [onode, xh, argmax, B, C, H, W, Ho, Wo]() {
            xh->ensure_grad();
            for (std::int64_t plane = 0; plane < static_cast<std::int64_t>(B) * C; ++plane) {
                const T* gplane = onode->grad.data() + static_cast<std::size_t>(plane) * Ho * Wo;
                const std::int32_t* aplane = argmax->data() + static_cast<std::size_t>(plane) * Ho * Wo;
                T* xg = xh->grad.data() + static_cast<std::size_t>(plane) * H * W;
                for (std::int64_t i = 0; i < static_cast<std::int64_t>(Ho) * Wo; ++i) {
                    xg[aplane[i]] += gplane[i];
                }
            }
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> relu(const TensorPtr<T>& x) {
    const bool req = GradMode::enabled() && x->requires_grad;
    auto out = make_tensor<T>(x->shape, x->values, req);
    for (auto& v : out->values) {
        if (v < T(0)) v = T(0);
    }
    if (req) {
        out->parents = {x};
        Tensor<T>* onode = out.get();
        TensorPtr<T> xh = x;
        out->backprop = [onode, xh]() {
            xh->ensure_grad();
            const std::int64_t n = xh->numel();
            for (std::int64_t i = 0; i < n; ++i) {
                if (xh->values[static_cast<std::size_t>(i)] > T(0)) {
                    xh->grad[static_cast<std::size_t>(i)] += onode->grad[static_cast<std::size_t>(i)];
                }
            }
        };
    }
    return out;
}

// Channel concatenation of same-B,H,W volumes, input order preserved.
template <typename T>
TensorPtr<T> concat_channels(const std::vector<TensorPtr<T>>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_channels: no inputs");
    detail::require_4d(xs[0]->shape, "concat input");
    const int B = xs[0]->dim(0), H = xs[0]->dim(2), W = xs[0]->dim(3);
    int Ctot = 0;
    bool req = false;
    for (const auto& x : xs) {
        detail::require_4d(x->shape, "concat input");
        if (x->dim(0) != B || x->dim(2) != H || x->dim(3) != W) {
            throw std::invalid_argument("concat_channels: spatial mismatch " + shape_str(x->shape) +
                                        " vs " + shape_str(xs[0]->shape));
        }
        Ctot += x->dim(1);
        req = req || x->requires_grad;
    }
    req = req && GradMode::enabled();
    auto out = zeros<T>({B, Ctot, H, W}, req);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    for (int b = 0; b < B; ++b) {
        std::size_t coff = 0;
        for (const auto& x : xs) {
            const int Cx = x->dim(1);
            std::memcpy(out->values.data() + (static_cast<std::size_t>(b) * Ctot + coff) * plane,
                        x->values.data() + static_cast<std::size_t>(b) * Cx * plane,
                        sizeof(T) * static_cast<std::size_t>(Cx) * plane);
            coff += static_cast<std::size_t>(Cx);
        }
    }
    if (req) {
        out->parents.assign(xs.begin(), xs.end());
        Tensor<T>* onode = out.get();
        std::vector<TensorPtr<T>> held = xs;
        out->backprop = [onode, held, B, Ctot, plane]() {
            for (int b = 0; b < B; ++b) {
                std::size_t coff = 0;
                for (const auto& x : held) {
                    const int Cx = x->dim(1);
                    if (x->requires_grad) {
                        x->ensure_grad();
                        const T* g = onode->grad.data() + (static_cast<std::size_t>(b) * Ctot + coff) * plane;
                        T* xg = x->grad.data() + static_cast<std::size_t>(b) * Cx * plane;
                        for (std::size_t i = 0; i < static_cast<std::size_t>(Cx) * plane; ++i) xg[i] += g[i];
                    }
                    coff += static_cast<std::size_t>(Cx);
                }
            }
        };
    }
    return out;
}

// Mean over all pixels of -log softmax(logits)[label].
template <typename T>
TensorPtr<T> softmax_ce_map(const TensorPtr<T>& logits, const ClassMap& labels) {
    detail::require_4d(logits->shape, "softmax_ce_map logits");
    const int B = logits->dim(0), C = logits->dim(1), H = logits->dim(2), W = logits->dim(3);
    if (labels.b != B || labels.h != H || labels.w != W) {
        throw std::invalid_argument("softmax_ce_map: labels " + std::to_string(labels.b) + "x" +
                                    std::to_string(labels.h) + "x" + std::to_string(labels.w) +
                                    " vs logits " + shape_str(logits->shape));
    }
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    auto probs = std::make_shared<std::vector<T>>(logits->values.size());
    T total = T(0);
    for (int b = 0; b < B; ++b) {
        const T* lbase = logits->values.data() + static_cast<std::size_t>(b) * C * plane;
        T* pbase = probs->data() + static_cast<std::size_t>(b) * C * plane;
        for (std::size_t px = 0; px < plane; ++px) {
            const std::int32_t label = labels.labels[static_cast<std::size_t>(b) * plane + px];
            if (label < 0 || label >= C) {
                throw std::invalid_argument("softmax_ce_map: label " + std::to_string(label) +
                                            " out of range [0," + std::to_string(C) + ")");
            }
            T m = lbase[px];
            for (int c = 1; c < C; ++c) m = std::max(m, lbase[static_cast<std::size_t>(c) * plane + px]);
            T denom = T(0);
            for (int c = 0; c < C; ++c) {
                const T e = std::exp(lbase[static_cast<std::size_t>(c) * plane + px] - m);
                pbase[static_cast<std::size_t>(c) * plane + px] = e;
                denom += e;
            }
            const T inv = T(1) / denom;
            for (int c = 0; c < C; ++c) pbase[static_cast<std::size_t>(c) * plane + px] *= inv;
            total += -std::log(pbase[static_cast<std::size_t>(label) * plane + px]);
        }
    }
    const T npix = static_cast<T>(static_cast<std::int64_t>(B) * H * W);
    const bool req = GradMode::enabled() && logits->requires_grad;
    auto out = make_tensor<T>({1}, {total / npix}, req);
    if (req) {
        out->parents = {logits};
        Tensor<T>* onode = out.get();
        TensorPtr<T> lh = logits;
        ClassMap lcopy = labels;
        out->backprop = [onode, lh, probs, lcopy = std::move(lcopy), B, C, plane, npix]() {
            lh->ensure_grad();
            const T scale = onode->grad[0] / npix;
            for (int b = 0; b < B; ++b) {
                const T* pbase = probs->data() + static_cast<std::size_t>(b) * C * plane;
                T* gbase = lh->grad.data() + static_cast<std::size_t>(b) * C * plane;
                for (std::size_t px = 0; px < plane; ++px) {
                    const std::int32_t label = lcopy.labels[static_cast<std::size_t>(b) * plane + px];
                    for (int c = 0; c < C; ++c) {
                        T g = pbase[static_cast<std::size_t>(c) * plane + px];
                        if (c == label) g -= T(1);
                        gbase[static_cast<std::size_t>(c) * plane + px] += scale * g;
                    }
                }
            }
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> add(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    if (a->shape != b->shape) {
        throw std::invalid_argument("add: shape mismatch " + shape_str(a->shape) + " vs " +
                                    shape_str(b->shape));
    }
    const bool req = GradMode::enabled() && (a->requires_grad || b->requires_grad);
    std::vector<T> v(a->values.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->values[i] + b->values[i];
    auto out = make_tensor<T>(a->shape, std::move(v), req);
    if (req) {
        out->parents = {a, b};
        Tensor<T>* onode = out.get();
        TensorPtr<T> ah = a, bh = b;
        out->backprop = [onode, ah, bh]() {
            if (ah->requires_grad) ah->accumulate_grad(onode->grad.data(), onode->numel());
            if (bh->requires_grad) bh->accumulate_grad(onode->grad.data(), onode->numel());
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> sum_all(const TensorPtr<T>& x) {
    T total = T(0);
    for (const T v : x->values) total += v;
    const bool req = GradMode::enabled() && x->requires_grad;
    auto out = make_tensor<T>({1}, {total}, req);
    if (req) {
        out->parents = {x};
        Tensor<T>* onode = out.get();
        TensorPtr<T> xh = x;
        out->backprop = [onode, xh]() {
            xh->ensure_grad();
            for (auto& g : xh->grad) g += onode->grad[0];
        };
    }
    return out;
}

// Scalar projection against fixed coefficients; handy for probing the
// gradient footprint of single output elements.
template <typename T>
TensorPtr<T> weighted_sum(const TensorPtr<T>& x, std::vector<T> coeffs) {
    if (coeffs.size() != x->values.size()) {
        throw std::invalid_argument("weighted_sum: coefficient count mismatch");
    }
    T total = T(0);
    for (std::size_t i = 0; i < coeffs.size(); ++i) total += coeffs[i] * x->values[i];
    const bool req = GradMode::enabled() && x->requires_grad;
    auto out = make_tensor<T>({1}, {total}, req);
    if (req) {
        out->parents = {x};
        Tensor<T>* onode = out.get();
        TensorPtr<T> xh = x;
        auto held = std::make_shared<std::vector<T>>(std::move(coeffs));
        out->backprop = [onode, xh, held]() {
            xh->ensure_grad();
            for (std::size_t i = 0; i < held->size(); ++i) {
                xh->grad[i] += (*held)[i] * onode->grad[0];
            }
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> scale(const TensorPtr<T>& x, T factor) {
    std::vector<T> v(x->values.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = x->values[i] * factor;
    const bool req = GradMode::enabled() && x->requires_grad;
    auto out = make_tensor<T>(x->shape, std::move(v), req);
    if (req) {
        out->parents = {x};
        Tensor<T>* onode = out.get();
        TensorPtr<T> xh = x;
        out->backprop = [onode, xh, factor]() {
            xh->ensure_grad();
            const std::int64_t n = xh->numel();
            for (std::int64_t i = 0; i < n; ++i) {
                xh->grad[static_cast<std::size_t>(i)] += factor * onode->grad[static_cast<std::size_t>(i)];
            }
        };
    }
    return out;
}

}  // namespace sseg
