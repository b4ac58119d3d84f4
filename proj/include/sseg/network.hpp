#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "sseg/ops.hpp"
#include "sseg/rng.hpp"
#include "sseg/schema.hpp"
#include "sseg/tensor.hpp"

namespace sseg {

enum class Variant { highres, noprior, lowres, dilated2d, lowres_tl };

inline std::string variant_name(Variant v) {
    switch (v) {
        case Variant::highres: return "highres";
        case Variant::noprior: return "noprior";
        case Variant::lowres: return "lowres";
        case Variant::dilated2d: return "dilated2d";
        case Variant::lowres_tl: return "lowres_tl";
    }
    return "?";
}

inline Variant variant_by_name(const std::string& name) {
    if (name == "highres") return Variant::highres;
    if (name == "noprior") return Variant::noprior;
    if (name == "lowres") return Variant::lowres;
    if (name == "dilated2d") return Variant::dilated2d;
    if (name == "lowres_tl") return Variant::lowres_tl;
    throw std::invalid_argument("unknown network variant '" + name + "'");
}

struct NetworkConfig {
    Variant variant = Variant::highres;
    int base_width = 8;      // channels of the first conv
    int desk_scale = 1;      // divides every layer width
    std::array<int, 4> dilation_rates{1, 2, 4, 8};
    int num_bdb = 4;
    std::string schema_id = "default";
    int lowres_h = 256, lowres_w = 112;  // canvas used by the lowres variants

    bool uses_prior() const {
        return variant == Variant::highres || variant == Variant::dilated2d;
    }

    int input_channels(const ClassSchema& schema) const {
        return 1 + (uses_prior() ? schema.total_classes() : 0);
    }

    // Effective first-conv width after scaling down for desk runs.
    int width_unit() const { return base_width / desk_scale; }

    void validate() const {
        if (base_width < 1 || desk_scale < 1) {
            throw std::invalid_argument("network: base_width and desk_scale must be >= 1");
        }
        if (base_width % desk_scale != 0) {
            throw std::invalid_argument("network: desk_scale " + std::to_string(desk_scale) +
                                        " does not divide base_width " + std::to_string(base_width));
        }
        for (std::size_t i = 1; i < dilation_rates.size(); ++i) {
            if (dilation_rates[i] <= dilation_rates[i - 1]) {
                throw std::invalid_argument("network: dilation rates must be strictly increasing");
            }
        }
        if (num_bdb < 0) throw std::invalid_argument("network: num_bdb must be >= 0");
        if (lowres_h < 16 || lowres_w < 16) {
            throw std::invalid_argument("network: lowres size must be >= 16");
        }
    }
};

// Skip volumes captured right before each downsampling, finest last.
template <typename T>
struct FeaturePack {
    TensorPtr<T> trunk;                     // 1/16 resolution
    std::array<TensorPtr<T>, 4> details;    // details[0] at 1/1 ... details[3] at 1/8
};

// One logit volume per schema level, all at input resolution.
template <typename T>
using HierLogits = std::vector<TensorPtr<T>>;

struct HierMask {
    std::vector<ClassMap> levels;
};

template <typename T>
struct NamedParam {
    std::string name;
    TensorPtr<T> tensor;
};

namespace detail {

template <typename T>
TensorPtr<T> init_weight(const Shape& shape, int fan_in, Rng& rng, bool requires_grad) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<T> v(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& x : v) x = static_cast<T>(rng.next_real(-bound, bound));
    return make_tensor<T>(shape, std::move(v), requires_grad);
}

}  // namespace detail

template <typename T>
struct ConvLayer {
    LayerSpec spec;
    TensorPtr<T> w;
    TensorPtr<T> b;  // null for transpose convs

    TensorPtr<T> forward(const TensorPtr<T>& x) const {
        if (spec.kind == LayerKind::conv_transpose) return conv_transpose2d(x, spec, w);
        return conv2d(x, spec, w, b);
    }

    std::int64_t param_count() const { return w->numel() + (b ? b->numel() : 0); }
};

template <typename T>
ConvLayer<T> make_conv(int in_ch, int out_ch, int kh, int kw, Rng& rng, int stride = 1,
                       int dil_y = 1, int dil_x = 1, PaddingMode padding = PaddingMode::same,
                       bool trainable = true) {
    ConvLayer<T> layer;
    layer.spec = LayerSpec{LayerKind::conv, kh, kw, in_ch, out_ch, stride, dil_y, dil_x, padding};
    layer.spec.validate();
    layer.w = detail::init_weight<T>({out_ch, in_ch, kh, kw}, in_ch * kh * kw, rng, trainable);
    layer.b = zeros<T>({out_ch}, trainable);
    return layer;
}

template <typename T>
ConvLayer<T> make_conv_transpose(int in_ch, int out_ch, int k, Rng& rng, bool trainable = true) {
    ConvLayer<T> layer;
    layer.spec = LayerSpec{LayerKind::conv_transpose, k, k, in_ch, out_ch, 2, 1, 1, PaddingMode::valid};
    layer.spec.validate();
    layer.w = detail::init_weight<T>({in_ch, out_ch, k, k}, in_ch * k * k, rng, trainable);
    return layer;
}

// The segmentation network: image encoder with four detail skips, a context
// encoder of bidirectional 1d dilated blocks, and a shared decoder with one
// 1x1 head per hierarchy level.
template <typename T>
struct SegNet {
    NetworkConfig config;
    ClassSchema schema;

    // image encoder; enc3 downsamples by stride 2, enc4..6 feed 2x2 maxpools
    ConvLayer<T> enc1, enc2, enc3, enc4, enc5, enc6;

    struct Bdb {
        std::array<ConvLayer<T>, 4> vert;
        ConvLayer<T> vert_fuse;
        std::array<ConvLayer<T>, 4> horiz;
        ConvLayer<T> horiz_fuse;
    };
    std::vector<Bdb> bdbs;

    struct Stage {
        ConvLayer<T> up;
        ConvLayer<T> conv;
    };
    std::array<Stage, 4> stages;
    ConvLayer<T> final_conv;
    std::vector<ConvLayer<T>> heads;

    static constexpr int kEncoderStride = 16;

    int input_channels() const { return config.input_channels(schema); }
    int trunk_channels() const { return 16 * config.width_unit(); }

    static SegNet build(const NetworkConfig& cfg, std::uint64_t seed, bool trainable = true) {
        cfg.validate();
        SegNet net;
        net.config = cfg;
        net.schema = ClassSchema::by_id(cfg.schema_id);
        net.schema.validate();
        Rng rng(mix_seed(seed, 0x5e9));

        const int b = cfg.width_unit();
        const int in_ch = cfg.input_channels(net.schema);

        net.enc1 = make_conv<T>(in_ch, b, 3, 3, rng, 1, 1, 1, PaddingMode::same, trainable);
        net.enc2 = make_conv<T>(b, b, 3, 3, rng, 1, 1, 1, PaddingMode::same, trainable);
        net.enc3 = make_conv<T>(b, 2 * b, 3, 3, rng, 2, 1, 1, PaddingMode::same, trainable);
        net.enc4 = make_conv<T>(2 * b, 4 * b, 3, 3, rng, 1, 1, 1, PaddingMode::same, trainable);
        net.enc5 = make_conv<T>(4 * b, 8 * b, 3, 3, rng, 1, 1, 1, PaddingMode::same, trainable);
        net.enc6 = make_conv<T>(8 * b, 16 * b, 3, 3, rng, 1, 1, 1, PaddingMode::same, trainable);

        const int ce_ch = 16 * b;
        const int branch_ch = ce_ch / 4;
        const bool square = cfg.variant == Variant::dilated2d;
        for (int i = 0; i < cfg.num_bdb; ++i) {
            Bdb blk;
            for (int r = 0; r < 4; ++r) {
                const int rate = cfg.dilation_rates[static_cast<std::size_t>(r)];
                if (square) {
                    blk.vert[static_cast<std::size_t>(r)] =
                        make_conv<T>(ce_ch, branch_ch, 3, 3, rng, 1, rate, rate, PaddingMode::same, trainable);
                } else {
                    blk.vert[static_cast<std::size_t>(r)] =
                        make_conv<T>(ce_ch, branch_ch, 9, 1, rng, 1, rate, 1, PaddingMode::same, trainable);
                    validate_bdb_kernel(blk.vert[static_cast<std::size_t>(r)].spec);
                }
            }
            blk.vert_fuse = make_conv<T>(branch_ch * 4, ce_ch, 1, 1, rng, 1, 1, 1, PaddingMode::same, trainable);
            for (int r = 0; r < 4; ++r) {
                const int rate = cfg.dilation_rates[static_cast<std::size_t>(r)];
                if (square) {
                    blk.horiz[static_cast<std::size_t>(r)] =
                        make_conv<T>(ce_ch, branch_ch, 3, 3, rng, 1, rate, rate, PaddingMode::same, trainable);
                } else {
                    blk.horiz[static_cast<std::size_t>(r)] =
                        make_conv<T>(ce_ch, branch_ch, 1, 9, rng, 1, 1, rate, PaddingMode::same, trainable);
                    validate_bdb_kernel(blk.horiz[static_cast<std::size_t>(r)].spec);
                }
            }
            blk.horiz_fuse = make_conv<T>(branch_ch * 4, ce_ch, 1, 1, rng, 1, 1, 1, PaddingMode::same, trainable);
            net.bdbs.push_back(std::move(blk));
        }

        // decoder: detail channels are b, 4b, 8b, 16b from finest to coarsest
        const std::array<int, 4> detail_ch{b, 4 * b, 8 * b, 16 * b};
        const std::array<int, 4> up_ch{8 * b, 4 * b, 2 * b, b};
        int in = ce_ch;
        for (int i = 0; i < 4; ++i) {
            const int dc = up_ch[static_cast<std::size_t>(i)];
            net.stages[static_cast<std::size_t>(i)].up = make_conv_transpose<T>(in, dc, 2, rng, trainable);
            net.stages[static_cast<std::size_t>(i)].conv =
                make_conv<T>(dc, dc, 3, 3, rng, 1, 1, 1, PaddingMode::same, trainable);
            in = dc + detail_ch[static_cast<std::size_t>(3 - i)];
        }
        net.final_conv = make_conv<T>(in, 2 * b, 3, 3, rng, 1, 1, 1, PaddingMode::same, trainable);
        for (int l = 0; l < net.schema.level_count(); ++l) {
            net.heads.push_back(make_conv<T>(2 * b, net.schema.class_count(l), 1, 1, rng, 1, 1, 1,
                                             PaddingMode::same, trainable));
        }

        // grads live on the parameters for their whole lifetime; allocating
        // them here keeps activation accounting clean
        if (trainable) {
            for (auto& p : net.params()) p->ensure_grad();
        }
        return net;
    }

    FeaturePack<T> encode_image(const TensorPtr<T>& x) const {
        if (x->shape.size() != 4 || x->dim(1) != input_channels()) {
            throw std::invalid_argument("encode_image: expected (B," + std::to_string(input_channels()) +
                                        ",H,W), got " + shape_str(x->shape));
        }
        if (x->dim(2) % kEncoderStride != 0 || x->dim(3) % kEncoderStride != 0) {
            throw std::invalid_argument("encode_image: H,W " + std::to_string(x->dim(2)) + "x" +
                                        std::to_string(x->dim(3)) + " not divisible by encoder stride " +
                                        std::to_string(kEncoderStride));
        }
        FeaturePack<T> pack;
        auto a = relu(enc1.forward(x));
        a = relu(enc2.forward(a));
        pack.details[0] = a;
        a = relu(enc3.forward(a));
        a = relu(enc4.forward(a));
        pack.details[1] = a;
        a = maxpool2d(a);
        a = relu(enc5.forward(a));
        pack.details[2] = a;
        a = maxpool2d(a);
        a = relu(enc6.forward(a));
        pack.details[3] = a;
        pack.trunk = maxpool2d(a);
        return pack;
    }

    // One bidirectional block: four parallel dilated convs over the same
    // input per direction, concatenated and fused back to the input width.
    TensorPtr<T> bdb_forward(const Bdb& blk, const TensorPtr<T>& x) const {
        std::vector<TensorPtr<T>> branches;
        branches.reserve(4);
        for (const auto& conv : blk.vert) branches.push_back(relu(conv.forward(x)));
        auto v = relu(blk.vert_fuse.forward(concat_channels(branches)));
        branches.clear();
        for (const auto& conv : blk.horiz) branches.push_back(relu(conv.forward(v)));
        return relu(blk.horiz_fuse.forward(concat_channels(branches)));
    }

    TensorPtr<T> context_encode(const TensorPtr<T>& features) const {
        auto x = features;
        for (const auto& blk : bdbs) x = bdb_forward(blk, x);
        return x;
    }

    HierLogits<T> decode(const TensorPtr<T>& features, const FeaturePack<T>& pack) const {
        auto x = features;
        for (int i = 0; i < 4; ++i) {
            x = relu(stages[static_cast<std::size_t>(i)].up.forward(x));
            x = relu(stages[static_cast<std::size_t>(i)].conv.forward(x));
            const auto& detail = pack.details[static_cast<std::size_t>(3 - i)];
            if (detail->dim(2) != x->dim(2) || detail->dim(3) != x->dim(3)) {
                throw std::invalid_argument("decode: detail scale mismatch at stage " +
                                            std::to_string(i) + ": " + shape_str(detail->shape) +
                                            " vs " + shape_str(x->shape));
            }
            x = concat_channels<T>({x, detail});
        }
        x = relu(final_conv.forward(x));
        HierLogits<T> out;
        out.reserve(heads.size());
        for (const auto& head : heads) out.push_back(head.forward(x));
        return out;
    }

    HierLogits<T> forward(const TensorPtr<T>& x) const {
        auto pack = encode_image(x);
        auto ctx = context_encode(pack.trunk);
        return decode(ctx, pack);
    }

    // Unweighted sum over levels of per-pixel softmax cross-entropy.
    TensorPtr<T> hierarchical_loss(const HierLogits<T>& logits, const HierMask& gt) const {
        if (logits.size() != gt.levels.size()) {
            throw std::invalid_argument("hierarchical_loss: " + std::to_string(logits.size()) +
                                        " logit levels vs " + std::to_string(gt.levels.size()) +
                                        " mask levels");
        }
        TensorPtr<T> total;
        for (std::size_t l = 0; l < logits.size(); ++l) {
            auto ce = softmax_ce_map(logits[l], gt.levels[l]);
            total = total ? add(total, ce) : ce;
        }
        return total;
    }

    std::vector<NamedParam<T>> named_params() {
        std::vector<NamedParam<T>> out;
        auto push = [&out](const std::string& name, ConvLayer<T>& layer) {
            out.push_back({name + ".w", layer.w});
            if (layer.b) out.push_back({name + ".b", layer.b});
        };
        push("enc1", enc1);
        push("enc2", enc2);
        push("enc3", enc3);
        push("enc4", enc4);
        push("enc5", enc5);
        push("enc6", enc6);
        for (std::size_t i = 0; i < bdbs.size(); ++i) {
            const std::string base = "ce.bdb" + std::to_string(i);
            for (int r = 0; r < 4; ++r) push(base + ".v" + std::to_string(r), bdbs[i].vert[static_cast<std::size_t>(r)]);
            push(base + ".vfuse", bdbs[i].vert_fuse);
            for (int r = 0; r < 4; ++r) push(base + ".h" + std::to_string(r), bdbs[i].horiz[static_cast<std::size_t>(r)]);
            push(base + ".hfuse", bdbs[i].horiz_fuse);
        }
        for (std::size_t i = 0; i < stages.size(); ++i) {
            push("de.s" + std::to_string(i) + ".up", stages[i].up);
            push("de.s" + std::to_string(i) + ".conv", stages[i].conv);
        }
        push("de.final", final_conv);
        for (std::size_t l = 0; l < heads.size(); ++l) {
            push("head.l" + std::to_string(l + 1), heads[l]);
        }
        return out;
    }

    std::vector<TensorPtr<T>> params() {
        std::vector<TensorPtr<T>> out;
        for (auto& np : named_params()) out.push_back(np.tensor);
        return out;
    }

    std::int64_t param_count() {
        std::int64_t n = 0;
        for (auto& p : params()) n += p->numel();
        return n;
    }

    void zero_grads() {
        for (auto& p : params()) p->zero_grad();
    }
};

}  // namespace sseg
