#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "sseg/adadelta.hpp"
#include "sseg/ops.hpp"
#include "sseg/rng.hpp"

using namespace sseg;

namespace {

TensorPtr<double> rand_tensor(const Shape& shape, Rng& rng, bool req = true, double lo = -1.0,
                              double hi = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& x : v) x = rng.next_real(lo, hi);
    return make_tensor<double>(shape, std::move(v), req);
}

LayerSpec conv_spec(int in_ch, int out_ch, int kh, int kw, int stride = 1, int dy = 1, int dx = 1,
                    PaddingMode pad = PaddingMode::same) {
    return LayerSpec{LayerKind::conv, kh, kw, in_ch, out_ch, stride, dy, dx, pad};
}

}  // namespace

TEST_CASE("conv2d hand-evaluated examples") {
    // [1,2,4,8] * [1,0,-1] valid -> [1-4, 2-8]
    auto x = make_tensor<double>({1, 1, 1, 4}, {1, 2, 4, 8});
    auto w = make_tensor<double>({1, 1, 1, 3}, {1, 0, -1});
    auto b = zeros<double>({1});
    auto y = conv2d(x, conv_spec(1, 1, 1, 3, 1, 1, 1, PaddingMode::valid), w, b);
    REQUIRE(y->shape == Shape{1, 1, 1, 2});
    CHECK(y->values[0] == doctest::Approx(-3.0));
    CHECK(y->values[1] == doctest::Approx(-6.0));

    // 1x1 identity kernel with same padding leaves any input unchanged
    Rng rng(11);
    auto x2 = rand_tensor({2, 3, 5, 7}, rng, false);
    auto wi = make_tensor<double>({3, 3, 1, 1}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    auto y2 = conv2d(x2, conv_spec(3, 3, 1, 1), wi);
    CHECK(y2->values == x2->values);

    // dilation 2: taps at columns 0,2,4 of [1,1,1,1,1] -> single output 3
    auto x3 = make_tensor<double>({1, 1, 1, 5}, {1, 1, 1, 1, 1});
    auto w3 = make_tensor<double>({1, 1, 1, 3}, {1, 1, 1});
    auto y3 = conv2d(x3, conv_spec(1, 1, 1, 3, 1, 1, 2, PaddingMode::valid), w3);
    REQUIRE(y3->shape == Shape{1, 1, 1, 1});
    CHECK(y3->values[0] == doctest::Approx(3.0));
}

TEST_CASE("conv2d rejects shape mismatches with a dimension report") {
    auto x = zeros<double>({1, 2, 4, 4});
    auto w = zeros<double>({1, 3, 3, 3});
    CHECK_THROWS_WITH_AS(conv2d(x, conv_spec(3, 1, 3, 3), w),
                         doctest::Contains("input channels"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(conv2d(x, conv_spec(2, 4, 3, 3), w),
                         doctest::Contains("weight shape"), std::invalid_argument);
}

TEST_CASE("conv2d same padding preserves H,W at stride 1 for the network's kernels") {
    Rng rng(5);
    struct K {
        int kh, kw, dy, dx;
    };
    const K kernels[] = {{3, 3, 1, 1}, {1, 1, 1, 1}, {9, 1, 1, 1}, {9, 1, 8, 1},
                         {1, 9, 1, 1}, {1, 9, 1, 8}, {3, 3, 4, 4}, {9, 1, 4, 1}};
    for (const auto& k : kernels) {
        auto x = rand_tensor({1, 2, 13, 17}, rng, false);
        auto w = rand_tensor({2, 2, k.kh, k.kw}, rng, false);
        auto y = conv2d(x, conv_spec(2, 2, k.kh, k.kw, 1, k.dy, k.dx), w);
        CHECK(y->shape == Shape{1, 2, 13, 17});
    }
}

TEST_CASE("conv_transpose2d hand-evaluated examples") {
    // single pixel broadcasts the kernel
    auto x = make_tensor<double>({1, 1, 1, 1}, {1});
    auto w = make_tensor<double>({1, 1, 2, 2}, {1, 2, 3, 4});
    LayerSpec spec{LayerKind::conv_transpose, 2, 2, 1, 1, 2, 1, 1, PaddingMode::valid};
    auto y = conv_transpose2d(x, spec, w);
    REQUIRE(y->shape == Shape{1, 1, 2, 2});
    CHECK(y->values == std::vector<double>{1, 2, 3, 4});

    // non-overlapping stride-2 placement
    auto x2 = make_tensor<double>({1, 1, 1, 2}, {1, 1});
    auto w2 = make_tensor<double>({1, 1, 1, 2}, {1, 1});
    LayerSpec spec2{LayerKind::conv_transpose, 1, 2, 1, 1, 2, 1, 1, PaddingMode::valid};
    auto y2 = conv_transpose2d(x2, spec2, w2);
    REQUIRE(y2->shape == Shape{1, 1, 1, 4});
    CHECK(y2->values == std::vector<double>{1, 1, 1, 1});

    // 2x upsampling contract with kernel 2, stride 2
    auto x3 = zeros<double>({1, 3, 5, 7});
    auto w3 = zeros<double>({3, 2, 2, 2});
    LayerSpec spec3{LayerKind::conv_transpose, 2, 2, 3, 2, 2, 1, 1, PaddingMode::valid};
    CHECK(conv_transpose2d(x3, spec3, w3)->shape == Shape{1, 2, 10, 14});

    LayerSpec bad = spec3;
    bad.stride = 3;
    CHECK_THROWS_AS(conv_transpose2d(x3, bad, w3), std::invalid_argument);
}

TEST_CASE("conv_transpose2d: grad of sum(output) w.r.t. input is the kernel sum") {
    Rng rng(21);
    auto x = rand_tensor({1, 2, 3, 4}, rng);
    auto w = rand_tensor({2, 3, 2, 2}, rng);
    LayerSpec spec{LayerKind::conv_transpose, 2, 2, 2, 3, 2, 1, 1, PaddingMode::valid};

    x->ensure_grad();
    auto loss = sum_all(conv_transpose2d(x, spec, w));
    backward(loss);

    // every input pixel contributes through all kernel taps of its channel
    for (int ci = 0; ci < 2; ++ci) {
        double ksum = 0.0;
        for (int co = 0; co < 3; ++co) {
            for (int i = 0; i < 4; ++i) {
                ksum += w->values[static_cast<std::size_t>((ci * 3 + co) * 4 + i)];
            }
        }
        for (int px = 0; px < 12; ++px) {
            CHECK(x->grad[static_cast<std::size_t>(ci * 12 + px)] == doctest::Approx(ksum));
        }
    }

    auto report = ssegtest::fd_check(
        [&] { return sum_all(conv_transpose2d(x, spec, w)); }, {x, w});
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("maxpool2d examples") {
    auto x = make_tensor<double>({1, 1, 2, 2}, {1, 2, 3, 4});
    auto y = maxpool2d(x);
    REQUIRE(y->shape == Shape{1, 1, 1, 1});
    CHECK(y->values[0] == 4.0);

    auto c = full<double>({1, 2, 4, 6}, 3.25);
    auto yc = maxpool2d(c);
    REQUIRE(yc->shape == Shape{1, 2, 2, 3});
    for (double v : yc->values) CHECK(v == 3.25);

    // odd dims: implicit -inf padding on the right/bottom
    auto o = make_tensor<double>({1, 1, 3, 3}, {-1, -2, -3, -4, -5, -6, -7, -8, -9});
    auto yo = maxpool2d(o);
    REQUIRE(yo->shape == Shape{1, 1, 2, 2});
    CHECK(yo->values == std::vector<double>{-1, -3, -7, -9});
}

TEST_CASE("relu forward and subgradient at zero") {
    auto x = make_tensor<double>({1, 1, 1, 3}, {-1, 0, 2}, true);
    x->ensure_grad();
    auto loss = sum_all(relu(x));
    CHECK(relu(x)->values == std::vector<double>{0, 0, 2});
    backward(loss);
    CHECK(x->grad == std::vector<double>{0, 0, 1});
}

TEST_CASE("concat_channels") {
    Rng rng(3);
    auto a = rand_tensor({2, 3, 4, 5}, rng, false);
    auto b = rand_tensor({2, 5, 4, 5}, rng, false);
    auto y = concat_channels<double>({a, b});
    CHECK(y->shape == Shape{2, 8, 4, 5});

    auto single = concat_channels<double>({a});
    CHECK(single->values == a->values);

    auto bad = rand_tensor({2, 5, 3, 5}, rng, false);
    CHECK_THROWS_AS(concat_channels<double>({a, bad}), std::invalid_argument);

    // backward splits the gradient by channel ranges
    auto ga = rand_tensor({1, 2, 3, 3}, rng);
    auto gb = rand_tensor({1, 3, 3, 3}, rng);
    ClassMap labels(1, 3, 3);
    for (auto& v : labels.labels) v = static_cast<std::int32_t>(rng.next_int(0, 4));
    auto report = ssegtest::fd_check(
        [&] {
            auto cat = concat_channels<double>({ga, gb});
            return softmax_ce_map(cat, labels);
        },
        {ga, gb});
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("softmax_ce_map examples") {
    // uniform logits, C=4: loss = ln 4 regardless of labels
    auto logits = zeros<double>({1, 4, 2, 3});
    ClassMap labels(1, 2, 3);
    labels.at(0, 0, 0) = 3;
    labels.at(0, 1, 2) = 1;
    CHECK(softmax_ce_map(logits, labels)->item() == doctest::Approx(std::log(4.0)));

    // one-hot-correct logits: loss decreases monotonically with the margin
    double prev = std::log(4.0);
    for (double margin : {1.0, 5.0, 10.0}) {
        auto l = zeros<double>({1, 4, 2, 3});
        for (int y = 0; y < 2; ++y) {
            for (int x = 0; x < 3; ++x) {
                const int cls = labels.at(0, y, x);
                l->values[(static_cast<std::size_t>(cls) * 2 + y) * 3 + x] = margin;
            }
        }
        const double loss = softmax_ce_map(l, labels)->item();
        CHECK(loss < prev);
        prev = loss;
    }
    CHECK(prev < 1e-3);

    ClassMap bad(1, 2, 3);
    bad.at(0, 0, 0) = 4;
    CHECK_THROWS_WITH_AS(softmax_ce_map(logits, bad), doctest::Contains("out of range"),
                         std::invalid_argument);

    Rng rng(17);
    auto g = rand_tensor({1, 3, 2, 2}, rng);
    ClassMap lm(1, 2, 2);
    for (auto& v : lm.labels) v = static_cast<std::int32_t>(rng.next_int(0, 2));
    auto report = ssegtest::fd_check([&] { return softmax_ce_map(g, lm); }, {g});
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("backward basics") {
    Rng rng(9);
    auto x = rand_tensor({1, 2, 3, 3}, rng);
    x->ensure_grad();
    auto loss = sum_all(x);
    backward(loss);
    for (double g : x->grad) CHECK(g == 1.0);

    // two uses of one tensor accumulate
    x->zero_grad();
    auto loss2 = sum_all(add(x, x));
    backward(loss2);
    for (double g : x->grad) CHECK(g == 2.0);
}

TEST_CASE("backward through conv-relu-pool matches finite differences") {
    Rng rng(33);
    auto x = rand_tensor({1, 1, 4, 4}, rng);
    auto w = rand_tensor({2, 1, 3, 3}, rng, true, -0.6, 0.6);
    auto b = rand_tensor({2}, rng);
    const auto spec = conv_spec(1, 2, 3, 3);
    auto report = ssegtest::fd_check(
        [&] {
            auto y = maxpool2d(relu(conv2d(x, spec, w, b)));
            return sum_all(y);
        },
        {x, w, b});
    CHECK(report.max_rel_err < 1e-4);
    CHECK(report.checked == 16 + 18 + 2);
}

TEST_CASE("gradient suite: smooth chains through conv, transpose and concat") {
    Rng rng(1234);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int C = static_cast<int>(rng.next_int(1, 3));
        const int H = static_cast<int>(rng.next_int(4, 7));
        const int W = static_cast<int>(rng.next_int(4, 7));
        auto x = rand_tensor({1, C, H, W}, rng);
        auto w = rand_tensor({2, C, 3, 3}, rng);
        auto b = rand_tensor({2}, rng);
        auto wt = rand_tensor({2, C, 2, 2}, rng);
        ClassMap labels(1, 2 * H, 2 * W);
        for (auto& v : labels.labels) v = static_cast<std::int32_t>(rng.next_int(0, C - 1));

        const auto cspec = conv_spec(C, 2, 3, 3, 1, 2, 2);
        LayerSpec tspec{LayerKind::conv_transpose, 2, 2, 2, C, 2, 1, 1, PaddingMode::valid};

        // cross-entropy is smooth in the logits, so the whole chain has no
        // kink and the central differences are trustworthy everywhere
        auto report = ssegtest::fd_check(
            [&] {
                auto y = conv2d(x, cspec, w, b);
                auto up = conv_transpose2d(y, tspec, wt);
                auto cat = concat_channels<double>({up, up});
                return softmax_ce_map(cat, labels);
            },
            {x, w, b, wt});
        worst = std::max(worst, report.max_rel_err);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("gradient suite: relu and maxpool away from their kinks") {
    Rng rng(4321);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int C = static_cast<int>(rng.next_int(2, 3));
        const int H = 4, W = 4;
        // relu inputs bounded away from 0 by construction
        auto x = zeros<double>({1, C, H, W}, true);
        for (auto& v : x->values) {
            const double mag = rng.next_real(0.05, 1.0);
            v = rng.next_bool(0.5) ? mag : -mag;
        }
        // pool inputs with distinct window elements: base grid plus jitter
        auto p = zeros<double>({1, C, H, W}, true);
        for (std::size_t i = 0; i < p->values.size(); ++i) {
            p->values[i] = 0.1 * static_cast<double>((i * 7) % 23) + rng.next_real(0.0, 0.02);
        }
        ClassMap lab_full(1, H, W);
        for (auto& v : lab_full.labels) v = static_cast<std::int32_t>(rng.next_int(0, C - 1));
        ClassMap lab_half(1, H / 2, W / 2);
        for (auto& v : lab_half.labels) v = static_cast<std::int32_t>(rng.next_int(0, C - 1));

        auto report = ssegtest::fd_check(
            [&] {
                auto a = softmax_ce_map(relu(x), lab_full);
                auto b = softmax_ce_map(maxpool2d(p), lab_half);
                return add(a, b);
            },
            {x, p});
        worst = std::max(worst, report.max_rel_err);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("forward passes are deterministic within a build") {
    Rng rng(77);
    auto x = rand_tensor({1, 4, 16, 16}, rng, false);
    auto w = rand_tensor({8, 4, 3, 3}, rng, false);
    auto b = rand_tensor({8}, rng, false);
    const auto spec = conv_spec(4, 8, 3, 3);
    auto y1 = conv2d(x, spec, w, b);
    auto y2 = conv2d(x, spec, w, b);
    CHECK(y1->values == y2->values);
}

TEST_CASE("adadelta first-step update matches the hand evaluation") {
    auto p = make_tensor<double>({1}, {0.5}, true);
    p->ensure_grad();
    p->grad[0] = 1.0;

    AdaDeltaState<double> opt;
    opt.rho = 0.95;
    opt.epsilon = 1e-6;
    opt.lr_multiplier = 0.1;
    opt.attach({p});
    opt.step({p});

    // E[g2] = 0.05; dx = -sqrt(1e-6)/sqrt(0.05+1e-6); param += 0.1*dx
    const double expected_dx = -std::sqrt(1e-6) / std::sqrt(0.05 + 1e-6);
    CHECK(p->values[0] == doctest::Approx(0.5 + 0.1 * expected_dx).epsilon(1e-12));
    CHECK(0.1 * expected_dx == doctest::Approx(-4.472e-4).epsilon(1e-3));
}

TEST_CASE("adadelta with zero gradients is a fixed point") {
    auto p = make_tensor<double>({4}, {1, 2, 3, 4}, true);
    p->ensure_grad();
    AdaDeltaState<double> opt;
    opt.attach({p});
    for (int i = 0; i < 3; ++i) opt.step({p});
    CHECK(p->values == std::vector<double>{1, 2, 3, 4});
    for (double v : opt.avg_sq_grad[0]) CHECK(v == 0.0);
    for (double v : opt.avg_sq_update[0]) CHECK(v == 0.0);
}

TEST_CASE("adadelta lr decay sequence 0.1 -> 0.01 -> 0.001") {
    auto p = make_tensor<double>({1}, {0.0}, true);
    p->ensure_grad();
    AdaDeltaState<double> opt;
    opt.lr_multiplier = 0.1;
    opt.decay_factor = 0.1;
    opt.decay_interval = 5;
    opt.attach({p});
    std::vector<double> seen;
    for (int s = 0; s < 15; ++s) {
        seen.push_back(opt.lr_multiplier);
        opt.step({p});
    }
    CHECK(seen[0] == doctest::Approx(0.1));
    CHECK(seen[4] == doctest::Approx(0.1));
    CHECK(seen[5] == doctest::Approx(0.01));
    CHECK(seen[9] == doctest::Approx(0.01));
    CHECK(seen[10] == doctest::Approx(0.001));
    CHECK(seen[14] == doctest::Approx(0.001));
}

TEST_CASE("tensor invariants") {
    CHECK_THROWS_AS(make_tensor<double>({2, 3}, {1, 2, 3}), std::invalid_argument);
    CHECK_THROWS_AS(make_tensor<double>({0}, {}), std::invalid_argument);
    CHECK_THROWS_AS(make_tensor<double>({1, 1, 1, 1, 1}, {1}), std::invalid_argument);

    auto x = make_tensor<double>({1, 1, 1, 2}, {1, 2}, false);
    auto loss = sum_all(x);
    CHECK_THROWS_AS(backward(loss), std::runtime_error);
}
