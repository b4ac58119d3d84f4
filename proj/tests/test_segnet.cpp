#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "sseg/adadelta.hpp"
#include "sseg/network.hpp"
#include "sseg/rng.hpp"

using namespace sseg;

namespace {

NetworkConfig desk_config(Variant v = Variant::highres, int base = 8) {
    NetworkConfig cfg;
    cfg.variant = v;
    cfg.base_width = base;
    if (v == Variant::lowres_tl) cfg.schema_id = "tl";
    return cfg;
}

TensorPtr<double> rand_input(const SegNet<double>& net, int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    const int c = net.input_channels();
    std::vector<double> v(static_cast<std::size_t>(c) * h * w);
    for (auto& x : v) x = rng.next_real(0.0, 1.0);
    return make_tensor<double>({1, c, h, w}, std::move(v), false);
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("build: desk config runs a forward pass end to end") {
    auto net = SegNet<double>::build(desk_config(), 7, false);
    CHECK(net.input_channels() == 16);
    CHECK(net.param_count() > 0);

    auto x = rand_input(net, 128, 208, 3);
    auto logits = net.forward(x);
    REQUIRE(logits.size() == 4);
    for (int l = 0; l < 4; ++l) {
        CHECK(logits[static_cast<std::size_t>(l)]->shape ==
              Shape{1, net.schema.class_count(l), 128, 208});
        CHECK(all_finite(logits[static_cast<std::size_t>(l)]->values));
    }
}

TEST_CASE("build: paper-scale config declares first conv 3x3x16 -> 64") {
    NetworkConfig cfg = desk_config(Variant::highres, 64);
    auto net = SegNet<float>::build(cfg, 7, false);
    CHECK(net.enc1.spec.kh == 3);
    CHECK(net.enc1.spec.kw == 3);
    CHECK(net.enc1.spec.in_ch == 16);  // 1 gray + 15 prior channels
    CHECK(net.enc1.spec.out_ch == 64);
}

TEST_CASE("build: desk_scale divides widths; non-divisible is rejected") {
    NetworkConfig cfg = desk_config(Variant::highres, 64);
    cfg.desk_scale = 8;
    auto net = SegNet<float>::build(cfg, 7, false);
    CHECK(net.enc1.spec.out_ch == 8);

    cfg.desk_scale = 7;
    CHECK_THROWS_WITH_AS(SegNet<float>::build(cfg, 7, false), doctest::Contains("does not divide"),
                         std::invalid_argument);
}

TEST_CASE("build: dilated2d swaps 1d kernels for 3x3 at identical parameter count") {
    auto hi = SegNet<float>::build(desk_config(Variant::highres), 7, false);
    auto d2 = SegNet<float>::build(desk_config(Variant::dilated2d), 7, false);

    for (const auto& blk : hi.bdbs) {
        for (const auto& c : blk.vert) {
            CHECK(c.spec.kh == 9);
            CHECK(c.spec.kw == 1);
        }
        for (const auto& c : blk.horiz) {
            CHECK(c.spec.kh == 1);
            CHECK(c.spec.kw == 9);
        }
    }
    for (const auto& blk : d2.bdbs) {
        for (const auto& c : blk.vert) {
            CHECK(c.spec.kh == 3);
            CHECK(c.spec.kw == 3);
        }
    }
    // same dilation rates, 9 taps either way: parameter parity is exact,
    // comfortably within the 1% budget
    const auto n_hi = hi.param_count();
    const auto n_d2 = d2.param_count();
    CHECK(n_hi == n_d2);
    CHECK(std::abs(static_cast<double>(n_hi - n_d2)) <= 0.01 * static_cast<double>(n_hi));
}

TEST_CASE("build: deterministic parameters for a fixed seed") {
    auto a = SegNet<float>::build(desk_config(), 42, false);
    auto b = SegNet<float>::build(desk_config(), 42, false);
    auto pa = a.params();
    auto pb = b.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->values == pb[i]->values);

    auto c = SegNet<float>::build(desk_config(), 43, false);
    CHECK(c.params()[0]->values != pa[0]->values);
}

TEST_CASE("encode_image: stride arithmetic and detail scales") {
    auto net = SegNet<double>::build(desk_config(), 7, false);
    auto x = rand_input(net, 128, 208, 5);
    auto pack = net.encode_image(x);
    CHECK(pack.trunk->shape == Shape{1, net.trunk_channels(), 8, 13});
    // detail_4 sits one downsampling above the trunk
    CHECK(pack.details[3]->dim(2) == 2 * pack.trunk->dim(2));
    CHECK(pack.details[3]->dim(3) == 2 * pack.trunk->dim(3));
    // strictly increasing resolution from trunk toward the input
    for (int i = 3; i > 0; --i) {
        CHECK(pack.details[static_cast<std::size_t>(i - 1)]->dim(2) >
              pack.details[static_cast<std::size_t>(i)]->dim(2));
    }
    CHECK(pack.details[0]->dim(2) == 128);
    CHECK(all_finite(pack.trunk->values));

    auto bad = rand_input(net, 120, 200, 5);
    CHECK_THROWS_WITH_AS(net.encode_image(bad), doctest::Contains("divisible"),
                         std::invalid_argument);
}

TEST_CASE("bdb: shape preservation, zero fuse, receptive field") {
    NetworkConfig cfg = desk_config();
    cfg.base_width = 1;  // trunk channels 16, cheap probes
    cfg.num_bdb = 1;
    auto net = SegNet<double>::build(cfg, 7, false);
    const int C = net.trunk_channels();

    for (auto [h, w] : {std::pair{1, 1}, std::pair{1, 3}, std::pair{5, 2}, std::pair{7, 11}}) {
        Rng rng(static_cast<std::uint64_t>(h * 100 + w));
        std::vector<double> v(static_cast<std::size_t>(C) * h * w);
        for (auto& x : v) x = rng.next_real(-1.0, 1.0);
        auto f = make_tensor<double>({1, C, h, w}, std::move(v), false);
        auto out = net.bdb_forward(net.bdbs[0], f);
        CHECK(out->shape == f->shape);
        CHECK(all_finite(out->values));
    }

    SUBCASE("all-zero fuse weights force a zero output") {
        std::fill(net.bdbs[0].horiz_fuse.w->values.begin(), net.bdbs[0].horiz_fuse.w->values.end(), 0.0);
        std::fill(net.bdbs[0].horiz_fuse.b->values.begin(), net.bdbs[0].horiz_fuse.b->values.end(), 0.0);
        Rng rng(9);
        std::vector<double> v(static_cast<std::size_t>(C) * 6 * 6);
        for (auto& x : v) x = rng.next_real(-1.0, 1.0);
        auto f = make_tensor<double>({1, C, 6, 6}, std::move(v), false);
        auto out = net.bdb_forward(net.bdbs[0], f);
        for (double o : out->values) CHECK(o == 0.0);
    }

    SUBCASE("gradient footprint of one output pixel spans 1+8*max_rate per axis") {
        // one 9-tap conv at dilation r reaches (9-1)*r past its center in
        // each direction, so a single bdb covers 1 + 8*max_rate per axis
        const int max_rate = cfg.dilation_rates[3];
        const int expected = 1 + 8 * max_rate;
        const int field = expected + 16;
        Rng rng(13);
        std::vector<double> v(static_cast<std::size_t>(C) * field * field);
        for (auto& x : v) x = rng.next_real(0.1, 1.0);
        auto f = make_tensor<double>({1, C, field, field}, std::move(v), true);
        f->ensure_grad();

        // force every branch to propagate: positive weights keep all relus live
        for (auto& blk : net.bdbs) {
            auto positive = [](ConvLayer<double>& l) {
                for (auto& wv : l.w->values) wv = std::abs(wv) + 0.01;
                if (l.b) for (auto& bv : l.b->values) bv = 0.01;
            };
            for (auto& c : blk.vert) positive(c);
            positive(blk.vert_fuse);
            for (auto& c : blk.horiz) positive(c);
            positive(blk.horiz_fuse);
        }

        auto out = net.bdb_forward(net.bdbs[0], f);
        const int cy = field / 2, cx = field / 2;
        std::vector<double> coeffs(out->values.size(), 0.0);
        coeffs[(static_cast<std::size_t>(0) * field + cy) * field + cx] = 1.0;
        backward(weighted_sum(out, std::move(coeffs)));

        int ymin = field, ymax = -1, xmin = field, xmax = -1;
        for (int c = 0; c < C; ++c) {
            for (int y = 0; y < field; ++y) {
                for (int x = 0; x < field; ++x) {
                    if (f->grad[(static_cast<std::size_t>(c) * field + y) * field + x] != 0.0) {
                        ymin = std::min(ymin, y);
                        ymax = std::max(ymax, y);
                        xmin = std::min(xmin, x);
                        xmax = std::max(xmax, x);
                    }
                }
            }
        }
        CHECK(ymax - ymin + 1 >= expected);
        CHECK(xmax - xmin + 1 >= expected);
    }
}

TEST_CASE("context_encode: zero blocks is the identity, four is the default") {
    NetworkConfig cfg = desk_config();
    cfg.num_bdb = 0;
    cfg.base_width = 1;
    auto net = SegNet<double>::build(cfg, 7, false);
    Rng rng(3);
    std::vector<double> v(static_cast<std::size_t>(net.trunk_channels()) * 4 * 5);
    for (auto& x : v) x = rng.next_real(-1.0, 1.0);
    auto f = make_tensor<double>({1, net.trunk_channels(), 4, 5}, std::move(v), false);
    auto out = net.context_encode(f);
    CHECK(out.get() == f.get());

    CHECK(NetworkConfig{}.num_bdb == 4);
    auto full = SegNet<double>::build(desk_config(Variant::highres, 4), 7, false);
    CHECK(full.bdbs.size() == 4);
    auto x = rand_input(full, 32, 32, 11);
    auto pack = full.encode_image(x);
    auto ctx = full.context_encode(pack.trunk);
    CHECK(ctx->shape == pack.trunk->shape);
    CHECK(all_finite(ctx->values));
}

TEST_CASE("decode: per-level channel counts follow the schema") {
    auto net = SegNet<double>::build(desk_config(Variant::highres, 4), 7, false);
    auto x = rand_input(net, 48, 64, 2);
    auto logits = net.forward(x);
    REQUIRE(logits.size() == 4);
    CHECK(logits[0]->dim(1) == 4);
    CHECK(logits[1]->dim(1) == 4);
    CHECK(logits[2]->dim(1) == 4);
    CHECK(logits[3]->dim(1) == 3);
    for (const auto& l : logits) {
        CHECK(l->dim(2) == 48);
        CHECK(l->dim(3) == 64);
    }

    auto tl = SegNet<double>::build(desk_config(Variant::lowres_tl, 4), 7, false);
    CHECK(tl.input_channels() == 1);
    auto xt = rand_input(tl, 48, 64, 2);
    auto tl_logits = tl.forward(xt);
    REQUIRE(tl_logits.size() == 3);
    CHECK(tl_logits[0]->dim(1) == 4);
    CHECK(tl_logits[1]->dim(1) == 3);
    CHECK(tl_logits[2]->dim(1) == 3);
}

TEST_CASE("forward shape property over random geometries") {
    Rng rng(99);
    for (int trial = 0; trial < 6; ++trial) {
        NetworkConfig cfg = desk_config(rng.next_bool(0.5) ? Variant::highres : Variant::noprior,
                                        static_cast<int>(rng.next_int(1, 4)));
        auto net = SegNet<double>::build(cfg, rng.next_u64(), false);
        const int h = 16 * static_cast<int>(rng.next_int(1, 4));
        const int w = 16 * static_cast<int>(rng.next_int(1, 4));
        auto x = rand_input(net, h, w, rng.next_u64());
        auto logits = net.forward(x);
        REQUIRE(static_cast<int>(logits.size()) == net.schema.level_count());
        for (int l = 0; l < net.schema.level_count(); ++l) {
            CHECK(logits[static_cast<std::size_t>(l)]->shape ==
                  Shape{1, net.schema.class_count(l), h, w});
        }
    }
}

TEST_CASE("zero prior channels are always valid and yield finite outputs") {
    auto net = SegNet<double>::build(desk_config(Variant::highres, 2), 7, false);
    Rng rng(5);
    const int h = 32, w = 48;
    std::vector<double> v(static_cast<std::size_t>(net.input_channels()) * h * w, 0.0);
    // gray channel random, all 15 prior channels zero (first strip of a page)
    for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i) v[i] = rng.next_real(0.0, 1.0);
    auto x = make_tensor<double>({1, net.input_channels(), h, w}, std::move(v), false);
    auto logits = net.forward(x);
    for (const auto& l : logits) CHECK(all_finite(l->values));
}

TEST_CASE("hierarchical_loss: frozen values and finite differences") {
    auto net = SegNet<double>::build(desk_config(Variant::noprior, 1), 7, true);
    const int h = 16, w = 16;

    HierMask gt;
    Rng rng(23);
    for (int l = 0; l < 4; ++l) {
        ClassMap m(1, h, w);
        for (auto& v : m.labels) {
            v = static_cast<std::int32_t>(rng.next_int(0, net.schema.class_count(l) - 1));
        }
        gt.levels.push_back(std::move(m));
    }

    SUBCASE("uniform logits: sum of ln(class counts) = 3 ln 4 + ln 3") {
        HierLogits<double> logits;
        for (int l = 0; l < 4; ++l) {
            logits.push_back(zeros<double>({1, net.schema.class_count(l), h, w}));
        }
        const double expected = 3.0 * std::log(4.0) + std::log(3.0);
        CHECK(net.hierarchical_loss(logits, gt)->item() == doctest::Approx(expected).epsilon(1e-9));
        CHECK(expected == doctest::Approx(5.2575).epsilon(1e-4));
    }

    SUBCASE("perfect one-hot logits at margin 20 drive the loss under 1e-3") {
        HierLogits<double> logits;
        for (int l = 0; l < 4; ++l) {
            auto t = zeros<double>({1, net.schema.class_count(l), h, w});
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const auto cls = gt.levels[static_cast<std::size_t>(l)].at(0, y, x);
                    t->values[(static_cast<std::size_t>(cls) * h + y) * w + x] = 20.0;
                }
            }
            logits.push_back(t);
        }
        CHECK(net.hierarchical_loss(logits, gt)->item() < 1e-3);
    }

    SUBCASE("label outside the level's class set is rejected") {
        HierLogits<double> logits;
        for (int l = 0; l < 4; ++l) {
            logits.push_back(zeros<double>({1, net.schema.class_count(l), h, w}));
        }
        HierMask bad = gt;
        bad.levels[3].at(0, 0, 0) = 3;  // groups level only has 3 classes
        CHECK_THROWS_AS(net.hierarchical_loss(logits, bad), std::invalid_argument);
    }

    SUBCASE("network loss gradient matches finite differences on a toy strip") {
        Rng xr(31);
        std::vector<double> v(static_cast<std::size_t>(net.input_channels()) * h * w);
        for (auto& x : v) x = xr.next_real(0.0, 1.0);
        auto x = make_tensor<double>({1, net.input_channels(), h, w}, std::move(v), false);

        // spot-check a subset of parameters end to end
        std::vector<TensorPtr<double>> probes = {net.enc1.w, net.bdbs[0].vert[2].w,
                                                 net.stages[1].up.w, net.heads[2].w, net.heads[2].b};
        // step 1e-4: small enough that no relu crossing sits within reach
        // of the perturbation, still far above double-precision noise
        for (auto& p : net.params()) p->zero_grad();
        auto report = ssegtest::fd_check(
            [&] { return net.hierarchical_loss(net.forward(x), gt); }, probes, 1e-4);
        CHECK(report.max_rel_err < 1e-4);
    }
}

TEST_CASE("one optimizer step on a frozen toy batch strictly decreases the loss") {
    Rng seed_rng(2024);
    for (int trial = 0; trial < 10; ++trial) {
        const std::uint64_t seed = seed_rng.next_u64();
        auto net = SegNet<double>::build(desk_config(Variant::noprior, 1), seed, true);
        const int h = 16, w = 16;
        Rng rng(seed ^ 0xabcd);
        std::vector<double> v(static_cast<std::size_t>(net.input_channels()) * h * w);
        for (auto& x : v) x = rng.next_real(0.0, 1.0);
        auto x = make_tensor<double>({1, net.input_channels(), h, w}, std::move(v), false);
        HierMask gt;
        for (int l = 0; l < 4; ++l) {
            ClassMap m(1, h, w);
            for (auto& lv : m.labels) {
                lv = static_cast<std::int32_t>(rng.next_int(0, net.schema.class_count(l) - 1));
            }
            gt.levels.push_back(std::move(m));
        }

        auto params = net.params();
        AdaDeltaState<double> opt;
        opt.lr_multiplier = 1e-3;
        opt.attach(params);

        net.zero_grads();
        auto loss0 = net.hierarchical_loss(net.forward(x), gt);
        backward(loss0);
        opt.step(params);
        auto loss1 = net.hierarchical_loss(net.forward(x), gt);
        CHECK(loss1->item() < loss0->item());
    }
}
