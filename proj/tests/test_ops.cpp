#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "mmtk/ops.hpp"

using namespace mmtk;

namespace {

Tensor randn(Shape shape, Rng& rng, bool requires_grad = true) {
    std::size_t n = shape_numel(shape);
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return Tensor::from_data(std::move(shape), std::move(v), requires_grad);
}

// Central-difference audit of d(f)/d(leaf) for every entry of every leaf.
double fd_max_rel_err(std::vector<Tensor>& leaves, const std::function<Tensor()>& f) {
    for (Tensor& t : leaves) t.zero_grad();
    backward(f());
    double worst = 0.0;
    for (Tensor& t : leaves) {
        for (std::size_t i = 0; i < t.numel(); ++i) {
            double& w = t.ptr()[i];
            const double saved = w;
            const double h = 1e-5 * std::max(1.0, std::abs(saved));
            w = saved + h;
            const double lp = f().item();
            w = saved - h;
            const double lm = f().item();
            w = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            const double analytic = t.has_grad() ? t.raw().grad[i] : 0.0;
            const double rel = std::abs(analytic - numeric) /
                               std::max({1.0, std::abs(analytic), std::abs(numeric)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace

TEST(Softmax, UniformPairs) {
    Tensor p = softmax(Tensor::from_data({2}, {0.0, 0.0}));
    EXPECT_DOUBLE_EQ(p.ptr()[0], 0.5);
    EXPECT_DOUBLE_EQ(p.ptr()[1], 0.5);
}

TEST(Softmax, StabilizedAgainstLargeInputs) {
    Tensor p = softmax(Tensor::from_data({3}, {1000.0, 1000.0, 1000.0}));
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(p.ptr()[i], 1.0 / 3.0, 1e-15);
}

TEST(Softmax, HandValue) {
    Tensor p = softmax(Tensor::from_data({2}, {0.0, std::log(3.0)}));
    EXPECT_NEAR(p.ptr()[0], 0.25, 1e-12);
    EXPECT_NEAR(p.ptr()[1], 0.75, 1e-12);
}

TEST(Softmax, SimplexForAnyFiniteInput) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(7);
        for (double& x : v) x = rng.normal() * std::pow(10.0, rng.below_int(7) - 3);
        Tensor p = softmax(Tensor::from_data({7}, v));
        double sum = 0.0;
        for (int i = 0; i < 7; ++i) {
            EXPECT_GE(p.ptr()[i], 0.0);
            sum += p.ptr()[i];
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Softmax, OrderPreserving) {
    Tensor p = softmax(Tensor::from_data({3}, {0.3, -1.0, 2.0}));
    EXPECT_GT(p.ptr()[2], p.ptr()[0]);
    EXPECT_GT(p.ptr()[0], p.ptr()[1]);
}

TEST(LayerNorm, ConstantInputGoesToZero) {
    Tensor g = Tensor::from_data({3}, {1, 1, 1});
    Tensor b = Tensor::from_data({3}, {0, 0, 0});
    Tensor y = layer_norm(Tensor::from_data({3}, {4.2, 4.2, 4.2}), g, b, 1e-8);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(y.ptr()[i], 0.0, 1e-9);
}

TEST(LayerNorm, UnitVarianceInputPassesThrough) {
    Tensor g = Tensor::from_data({2}, {1, 1});
    Tensor b = Tensor::from_data({2}, {0, 0});
    Tensor y = layer_norm(Tensor::from_data({2}, {-1.0, 1.0}), g, b, 1e-14);
    EXPECT_NEAR(y.ptr()[0], -1.0, 1e-6);
    EXPECT_NEAR(y.ptr()[1], 1.0, 1e-6);
}

TEST(LayerNorm, BetaShiftPassthrough) {
    Tensor g = Tensor::from_data({2}, {1, 1});
    Tensor b = Tensor::from_data({2}, {5, 5});
    Tensor y = layer_norm(Tensor::from_data({2}, {3.3, 3.3}), g, b, 1e-8);
    EXPECT_NEAR(y.ptr()[0], 5.0, 1e-9);
    EXPECT_NEAR(y.ptr()[1], 5.0, 1e-9);
}

TEST(LayerNorm, NormalizesMeanAndVariance) {
    Rng rng(11);
    Tensor g = Tensor::from_data({16}, std::vector<double>(16, 1.0));
    Tensor b = Tensor::from_data({16}, std::vector<double>(16, 0.0));
    Tensor x = randn({16}, rng, false);
    Tensor y = layer_norm(x, g, b, 1e-12);
    double mean = 0.0, var = 0.0;
    for (int i = 0; i < 16; ++i) mean += y.ptr()[i] / 16.0;
    for (int i = 0; i < 16; ++i) var += (y.ptr()[i] - mean) * (y.ptr()[i] - mean) / 16.0;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-6);
}

TEST(LayerNorm, LengthMismatchRejected) {
    Tensor g = Tensor::from_data({2}, {1, 1});
    Tensor b = Tensor::from_data({3}, {0, 0, 0});
    EXPECT_THROW(layer_norm(Tensor::from_data({2}, {1, 2}), g, b, 1e-8), Error);
}

TEST(Attention, SingleKeyCopiesValueRow) {
    Rng rng(2);
    Tensor q = randn({4, 3}, rng, false);
    Tensor k = randn({1, 3}, rng, false);
    Tensor v = Tensor::from_data({1, 2}, {7.0, -3.0});
    Tensor out = attention(q, k, v);
    ASSERT_EQ(out.dim(0), 4);
    for (int i = 0; i < 4; ++i) {
        EXPECT_DOUBLE_EQ(out.ptr()[i * 2 + 0], 7.0);
        EXPECT_DOUBLE_EQ(out.ptr()[i * 2 + 1], -3.0);
    }
}

TEST(Attention, CausalRowZeroSeesOnlyKeyZero) {
    Rng rng(3);
    Tensor q = randn({3, 4}, rng, false);
    Tensor k = randn({3, 4}, rng, false);
    Tensor v = randn({3, 5}, rng, false);
    BoolMask mask = causal_mask(3);
    Tensor out = attention(q, k, v, &mask);
    for (int j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(out.ptr()[j], v.ptr()[j]);
}

TEST(Attention, SaturatedSoftmaxSelectsMatchingRow) {
    // orthonormal Q=K scaled up: each query saturates on its own key
    const double s = 60.0;
    Tensor q = Tensor::from_data({2, 2}, {s, 0, 0, s});
    Tensor k = Tensor::from_data({2, 2}, {s, 0, 0, s});
    Tensor v = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor out = attention(q, k, v);
    for (int j = 0; j < 3; ++j) {
        EXPECT_NEAR(out.ptr()[j], v.ptr()[j], 1e-9);
        EXPECT_NEAR(out.ptr()[3 + j], v.ptr()[3 + j], 1e-9);
    }
}

TEST(Attention, AllTrueMaskBitwiseEqualsNoMask) {
    Rng rng(4);
    Tensor q = randn({5, 4}, rng, false);
    Tensor k = randn({6, 4}, rng, false);
    Tensor v = randn({6, 3}, rng, false);
    BoolMask mask(30, 1);
    Tensor a = attention(q, k, v);
    Tensor b = attention(q, k, v, &mask);
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a.ptr()[i], b.ptr()[i]);
}

TEST(Attention, FullyMaskedRowRejected) {
    Rng rng(5);
    Tensor q = randn({2, 3}, rng, false);
    Tensor k = randn({2, 3}, rng, false);
    Tensor v = randn({2, 3}, rng, false);
    BoolMask mask{1, 1, 0, 0};
    EXPECT_THROW(attention(q, k, v, &mask), Error);
}

TEST(CrossEntropy, UniformLogits) {
    Tensor logits = Tensor::from_data({4}, {0.7, 0.7, 0.7, 0.7});
    for (int t = 0; t < 4; ++t) EXPECT_NEAR(cross_entropy(logits, t).item(), std::log(4.0), 1e-12);
}

TEST(CrossEntropy, ConfidentHandValues) {
    Tensor logits = Tensor::from_data({2}, {10.0, -10.0});
    // -log sigma(20) and -log sigma(-20)
    EXPECT_NEAR(cross_entropy(logits, 0).item(), 2.061153618190204e-9, 1e-15);
    EXPECT_NEAR(cross_entropy(logits, 1).item(), 20.000000002061153, 1e-9);
}

TEST(CrossEntropy, TargetOutOfRangeRejected) {
    Tensor logits = Tensor::from_data({3}, {1, 2, 3});
    EXPECT_THROW(cross_entropy(logits, 3), Error);
    EXPECT_THROW(cross_entropy(logits, -1), Error);
}

TEST(CrossEntropy, NonNegative) {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor logits = randn({5}, rng, false);
        for (int t = 0; t < 5; ++t) EXPECT_GE(cross_entropy(logits, t).item(), 0.0);
    }
}

TEST(Ops, NonFiniteForwardSurfaced) {
    Tensor big = Tensor::from_data({1, 1}, {1e308});
    EXPECT_THROW(matmul(scale(big, 1e8), big), Error);
}

TEST(Ops, ShapeMismatchesRejected) {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({2, 3});
    EXPECT_THROW(matmul(a, b), Error);
    EXPECT_THROW(add(a, Tensor::zeros({3, 2})), Error);
    EXPECT_THROW(concat_cols({a, Tensor::zeros({3, 1})}), Error);
    EXPECT_THROW(slice_rows(a, 1, 1), Error);
    EXPECT_THROW(slice_cols(a, 2, 5), Error);
}

TEST(GradFD, MatmulChain) {
    Rng rng(21);
    std::vector<Tensor> leaves{randn({3, 4}, rng), randn({4, 5}, rng)};
    auto f = [&]() { return sum_all(matmul(leaves[0], leaves[1])); };
    EXPECT_LE(fd_max_rel_err(leaves, f), 1e-8);
}

TEST(GradFD, MatmulNtRectangular) {
    Rng rng(22);
    std::vector<Tensor> leaves{randn({3, 4}, rng), randn({6, 4}, rng)};
    auto f = [&]() { return sum_all(mul(matmul_nt(leaves[0], leaves[1]),
                                        matmul_nt(leaves[0], leaves[1]))); };
    EXPECT_LE(fd_max_rel_err(leaves, f), 1e-7);
}

TEST(GradFD, ElementwiseActivations) {
    Rng rng(23);
    std::vector<Tensor> leaves{randn({4, 3}, rng)};
    auto f = [&]() {
        Tensor x = leaves[0];
        return sum_all(add(relu(x), add(gelu(x), sigmoid(x))));
    };
    EXPECT_LE(fd_max_rel_err(leaves, f), 1e-6);
}

TEST(GradFD, SoftmaxRowsMasked) {
    Rng rng(24);
    std::vector<Tensor> leaves{randn({3, 4}, rng)};
    BoolMask mask{1, 1, 0, 1, 0, 1, 1, 1, 1, 1, 1, 0};
    Tensor w = randn({3, 4}, rng, false);
    auto f = [&]() { return sum_all(mul(softmax_rows(leaves[0], &mask), w)); };
    EXPECT_LE(fd_max_rel_err(leaves, f), 1e-7);
}

TEST(GradFD, LayerNormMatrixRows) {
    Rng rng(25);
    std::vector<Tensor> leaves{randn({3, 6}, rng), randn({6}, rng), randn({6}, rng)};
    Tensor w = randn({3, 6}, rng, false);
    auto f = [&]() {
        return sum_all(mul(layer_norm(leaves[0], leaves[1], leaves[2], 1e-8), w));
    };
    EXPECT_LE(fd_max_rel_err(leaves, f), 1e-6);
}

TEST(GradFD, AttentionMasked) {
    Rng rng(26);
    std::vector<Tensor> leaves{randn({3, 4}, rng), randn({5, 4}, rng), randn({5, 2}, rng)};
    BoolMask mask(15, 1);
    mask[2] = 0;
    mask[9] = 0;
    Tensor w = randn({3, 2}, rng, false);
    auto f = [&]() {
        return sum_all(mul(attention(leaves[0], leaves[1], leaves[2], &mask), w));
    };
    EXPECT_LE(fd_max_rel_err(leaves, f), 1e-6);
}

TEST(GradFD, ConcatSliceEmbedding) {
    Rng rng(27);
    std::vector<Tensor> leaves{randn({4, 3}, rng), randn({2, 3}, rng), randn({5, 6}, rng)};
    std::vector<int> ids{4, 0, 4, 2};
    auto f = [&]() {
        Tensor joined = concat_rows({leaves[0], leaves[1]});
        Tensor left = slice_rows(joined, 1, 5);
        Tensor emb = embedding_rows(leaves[2], ids);
        Tensor wide = concat_cols({left, slice_cols(emb, 0, 3), slice_cols(emb, 3, 6)});
        return sum_all(mul(wide, wide));
    };
    EXPECT_LE(fd_max_rel_err(leaves, f), 1e-7);
}

TEST(GradFD, CrossEntropyRowsAndPooling) {
    Rng rng(28);
    std::vector<Tensor> leaves{randn({4, 7}, rng), randn({7}, rng)};
    std::vector<int> targets{2, 0, 6, 3};
    auto f = [&]() {
        Tensor logits = add_rowvec(leaves[0], leaves[1]);
        return add(cross_entropy_rows(logits, targets), sum_all(mean_rows(logits)));
    };
    EXPECT_LE(fd_max_rel_err(leaves, f), 1e-7);
}

TEST(Mask, CausalShape) {
    const BoolMask want{1, 0, 0, 1, 1, 0, 1, 1, 1};
    EXPECT_EQ(causal_mask(3), want);
}
