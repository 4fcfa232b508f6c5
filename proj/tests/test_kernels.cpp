#include <gtest/gtest.h>

#include "lrad/kernels.hpp"
#include "test_util.hpp"

using namespace lrad;
using lrad::test::max_abs_diff;
using lrad::test::pick;
using lrad::test::random_tensor;

namespace {

// Direct nested-loop cross-correlation.
Tensor<double> conv2d_loops(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b, ConvGeometry g) {
    const long n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3), o = w.dim(0), k = w.dim(2);
    const long s = g.stride, p = g.pad;
    const long oh = (h + 2 * p - k) / s + 1, ow = (wd + 2 * p - k) / s + 1;
    Tensor<double> y({size_t(n), size_t(o), size_t(oh), size_t(ow)});
    for (long bi = 0; bi < n; ++bi)
        for (long oi = 0; oi < o; ++oi)
            for (long r = 0; r < oh; ++r)
                for (long q = 0; q < ow; ++q) {
                    double acc = b[oi];
                    for (long ci = 0; ci < c; ++ci)
                        for (long u = 0; u < k; ++u)
                            for (long v = 0; v < k; ++v) {
                                const long ir = r * s - p + u, iq = q * s - p + v;
                                if (ir < 0 || iq < 0 || ir >= h || iq >= wd) continue;
                                acc += x.at({size_t(bi), size_t(ci), size_t(ir), size_t(iq)}) *
                                       w.at({size_t(oi), size_t(ci), size_t(u), size_t(v)});
                            }
                    y.at({size_t(bi), size_t(oi), size_t(r), size_t(q)}) = acc;
                }
    return y;
}

// Transposed convolution as zero-stuffing + full padding + flipped-kernel conv.
Tensor<double> conv_transpose2d_stuffed(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                                        ConvGeometry g) {
    const size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3), cout = w.dim(1), k = w.dim(2);
    const size_t sh = (h - 1) * g.stride + 1, sw = (wd - 1) * g.stride + 1;
    const size_t full = k - 1;
    Tensor<double> stuffed({n, cin, sh + 2 * full, sw + 2 * full});
    for (size_t bi = 0; bi < n; ++bi)
        for (size_t ci = 0; ci < cin; ++ci)
            for (size_t r = 0; r < h; ++r)
                for (size_t q = 0; q < wd; ++q)
                    stuffed.at({bi, ci, full + r * g.stride, full + q * g.stride}) = x.at({bi, ci, r, q});
    Tensor<double> flipped({cout, cin, k, k});
    for (size_t co = 0; co < cout; ++co)
        for (size_t ci = 0; ci < cin; ++ci)
            for (size_t u = 0; u < k; ++u)
                for (size_t v = 0; v < k; ++v) flipped.at({co, ci, u, v}) = w.at({ci, co, k - 1 - u, k - 1 - v});
    const auto y_full = conv2d_loops(stuffed, flipped, b, {1, 0});
    const size_t oh = y_full.dim(2) - 2 * g.pad, ow = y_full.dim(3) - 2 * g.pad;
    Tensor<double> y({n, cout, oh, ow});
    for (size_t bi = 0; bi < n; ++bi)
        for (size_t co = 0; co < cout; ++co)
            for (size_t r = 0; r < oh; ++r)
                for (size_t q = 0; q < ow; ++q) y.at({bi, co, r, q}) = y_full.at({bi, co, r + g.pad, q + g.pad});
    return y;
}

}  // namespace

TEST(Conv2d, HandWorkedExample) {
    // 1x1x3x3 input, 2x2 kernel of ones, stride 1: sums of 2x2 windows.
    Tensor<double> x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    Tensor<double> w({1, 1, 2, 2}, 1.0);
    Tensor<double> b({1}, 0.5);
    const auto y = conv2d(x, w, b, {1, 0});
    EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
    EXPECT_EQ(y.values(), (std::vector<double>{12.5, 16.5, 24.5, 28.5}));
}

TEST(Conv2d, MatchesNestedLoopsOnRandomShapes) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 30; ++trial) {
        const size_t k = pick(rng, 1, 4);
        ConvGeometry g{pick(rng, 1, 2), pick(rng, 0, k - 1)};
        const size_t h = pick(rng, k, 9), wd = pick(rng, k, 9);
        const auto x = random_tensor({pick(rng, 1, 3), pick(rng, 1, 3), h, wd}, rng);
        const auto w = random_tensor({pick(rng, 1, 4), x.dim(1), k, k}, rng);
        const auto b = random_tensor({w.dim(0)}, rng);
        const auto y = conv2d(x, w, b, g);
        const auto ref = conv2d_loops(x, w, b, g);
        ASSERT_EQ(y.shape(), ref.shape());
        EXPECT_LT(max_abs_diff(y, ref), 1e-12) << "trial " << trial;
    }
}

TEST(ConvTranspose2d, DcganUpsamplingShapes) {
    std::mt19937_64 rng(2);
    const auto x = random_tensor({2, 8, 4, 4}, rng);
    const auto w = random_tensor({8, 3, 4, 4}, rng);
    const auto y = conv_transpose2d(x, w, Tensor<double>({3}), {2, 1});
    EXPECT_EQ(y.shape(), (Shape{2, 3, 8, 8}));
    const auto head = conv_transpose2d(random_tensor({2, 5, 1, 1}, rng), random_tensor({5, 6, 4, 4}, rng),
                                       Tensor<double>({6}), {1, 0});
    EXPECT_EQ(head.shape(), (Shape{2, 6, 4, 4}));
}

TEST(ConvTranspose2d, MatchesZeroStuffingOracle) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const size_t k = pick(rng, 1, 4);
        ConvGeometry g{pick(rng, 1, 3), pick(rng, 0, k - 1)};
        const size_t h = pick(rng, 1, 5), wd = pick(rng, 1, 5);
        if ((h - 1) * g.stride + k <= 2 * g.pad || (wd - 1) * g.stride + k <= 2 * g.pad) continue;
        const auto x = random_tensor({pick(rng, 1, 3), pick(rng, 1, 3), h, wd}, rng);
        const auto w = random_tensor({x.dim(1), pick(rng, 1, 3), k, k}, rng);
        const auto b = random_tensor({w.dim(1)}, rng);
        const auto y = conv_transpose2d(x, w, b, g);
        const auto ref = conv_transpose2d_stuffed(x, w, b, g);
        ASSERT_EQ(y.shape(), ref.shape());
        EXPECT_LT(max_abs_diff(y, ref), 1e-12) << "trial " << trial;
    }
}

TEST(ConvTranspose2d, IsAdjointOfConv2d) {
    // <conv(x), y> == <x, convT(y)> with the same weight and zero bias.
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const size_t k = pick(rng, 1, 4);
        ConvGeometry g{pick(rng, 1, 2), pick(rng, 0, k - 1)};
        const auto x = random_tensor({2, pick(rng, 1, 3), pick(rng, k, 8), pick(rng, k, 8)}, rng);
        const auto w = random_tensor({pick(rng, 1, 3), x.dim(1), k, k}, rng);
        const auto cx = conv2d(x, w, Tensor<double>({w.dim(0)}), g);
        const auto y = random_tensor(cx.shape(), rng);
        // conv_transpose2d weight layout is (Cin_of_transpose, Cout, K, K) = (O, C, K, K).
        auto ty = conv_transpose2d(y, w, Tensor<double>({w.dim(1)}), g);
        if (ty.shape() != x.shape()) continue;  // stride remainder rows are dropped by conv2d
        EXPECT_NEAR(dot(cx, y), dot(x, ty), 1e-10 * (1.0 + std::abs(dot(cx, y))));
    }
}

TEST(Conv2d, ShapeErrorsNameTheMismatch) {
    Tensor<float> x({1, 2, 4, 4}), w({3, 5, 3, 3}), b({3});
    try {
        conv2d(x, w, b, {1, 0});
        FAIL();
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("2 channels"), std::string::npos);
    }
    EXPECT_THROW(conv2d(x, Tensor<float>({3, 2, 5, 5}), b, {1, 0}), ShapeError);
    EXPECT_THROW(conv2d(x, Tensor<float>({3, 2, 3, 3}), Tensor<float>({2}), {1, 0}), ShapeError);
}

TEST(BatchNorm, TrainModeNormalizesPerChannel) {
    std::mt19937_64 rng(5);
    const auto x = random_tensor({4, 3, 5, 5}, rng, -2.0, 7.0);
    Tensor<double> gamma({3}, 1.0), beta({3}, 0.0);
    const auto y = batchnorm2d<double>(x, gamma, beta, Mode::train, nullptr, 0.1, 1e-5);
    for (size_t c = 0; c < 3; ++c) {
        double m = 0, v = 0;
        for (size_t b = 0; b < 4; ++b)
            for (size_t i = 0; i < 25; ++i) m += y[(b * 3 + c) * 25 + i];
        m /= 100;
        for (size_t b = 0; b < 4; ++b)
            for (size_t i = 0; i < 25; ++i) v += std::pow(y[(b * 3 + c) * 25 + i] - m, 2);
        v /= 100;
        EXPECT_NEAR(m, 0.0, 1e-12);
        EXPECT_NEAR(v, 1.0, 1e-4);
    }
}

TEST(BatchNorm, RunningStatisticsUseMomentumAndUnbiasedVariance) {
    Tensor<double> x({2, 1, 1, 2}, {1, 3, 5, 7});  // mean 4, biased var 5, unbiased 20/3
    Tensor<double> gamma({1}, 2.0), beta({1}, 1.0);
    BatchNormStats<double> run{Tensor<double>({1}, 0.0), Tensor<double>({1}, 1.0)};
    batchnorm2d<double>(x, gamma, beta, Mode::train, &run, 0.1, 1e-5);
    EXPECT_NEAR(run.mean[0], 0.4, 1e-15);
    EXPECT_NEAR(run.var[0], 0.9 + 0.1 * 20.0 / 3.0, 1e-15);

    const auto y = batchnorm2d<double>(x, gamma, beta, Mode::eval, &run, 0.1, 1e-5);
    const double inv = 1.0 / std::sqrt(run.var[0] + 1e-5);
    EXPECT_NEAR(y[0], 2.0 * (1.0 - 0.4) * inv + 1.0, 1e-12);
    EXPECT_NEAR(y[3], 2.0 * (7.0 - 0.4) * inv + 1.0, 1e-12);
}

TEST(BatchNorm, RejectsSingletonTrainBatchAndMissingRunningStats) {
    Tensor<double> x({1, 2, 3, 3}), g({2}, 1.0), b({2});
    EXPECT_THROW(batchnorm2d<double>(x, g, b, Mode::train, nullptr, 0.1, 1e-5), ShapeError);
    EXPECT_THROW(batchnorm2d<double>(Tensor<double>({2, 2, 3, 3}), g, b, Mode::eval, nullptr, 0.1, 1e-5), ShapeError);
}

TEST(Activations, PointValues) {
    Tensor<double> x({4}, {-2.0, -0.5, 0.0, 1.5});
    EXPECT_EQ(activate(x, Activation::relu).values(), (std::vector<double>{0, 0, 0, 1.5}));
    EXPECT_EQ(activate(x, Activation::leaky_relu).values(), (std::vector<double>{-0.4, -0.1, 0, 1.5}));
    const auto t = activate(x, Activation::tanh);
    EXPECT_NEAR(t[3], 0.9051482536448664, 1e-15);
    const auto s = activate(x, Activation::sigmoid);
    EXPECT_NEAR(s[0], 0.11920292202211755, 1e-15);
    EXPECT_EQ(s[2], 0.5);
}

TEST(Linear, MatchesLoops) {
    std::mt19937_64 rng(6);
    const auto x = random_tensor({3, 5}, rng), w = random_tensor({4, 5}, rng), b = random_tensor({4}, rng);
    const auto y = linear(x, w, b);
    for (size_t r = 0; r < 3; ++r)
        for (size_t j = 0; j < 4; ++j) {
            double acc = b[j];
            for (size_t i = 0; i < 5; ++i) acc += x[r * 5 + i] * w[j * 5 + i];
            EXPECT_NEAR(y[r * 4 + j], acc, 1e-14);
        }
    EXPECT_THROW(linear(x, random_tensor({4, 6}, rng), b), ShapeError);
}

TEST(Conv2d, FloatAgreesWithDouble) {
    std::mt19937_64 rng(7);
    const auto x = random_tensor({2, 3, 8, 8}, rng), w = random_tensor({4, 3, 4, 4}, rng), b = random_tensor({4}, rng);
    const auto yd = conv2d(x, w, b, {2, 1});
    const auto yf = conv2d(x.cast<float>(), w.cast<float>(), b.cast<float>(), {2, 1});
    EXPECT_LT(max_abs_diff(yf.cast<double>(), yd), 1e-5);
}
