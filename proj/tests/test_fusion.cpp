#include <gtest/gtest.h>

#include "mmtk/fusion.hpp"

using namespace mmtk;

namespace {

Tensor randmat(int r, int c, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(static_cast<std::size_t>(r) * c);
    for (double& x : v) x = rng.normal() * 0.5;
    return Tensor::from_data({r, c}, std::move(v));
}

ParamStore toy_fusion(int channels = 12, int d = 8) {
    ParamStore ps;
    add_fusion_params(ps, channels, d, 1, 2, 21);
    return ps;
}

}  // namespace

TEST(ReduceChannels, ZeroInputZeroBiasGivesZero) {
    ParamStore ps = toy_fusion();
    Tensor out = reduce_channels(ps, "fuse.red_v", Tensor::zeros({5, 12}));
    // bias starts at zero
    for (std::size_t i = 0; i < out.numel(); ++i) EXPECT_DOUBLE_EQ(out.ptr()[i], 0.0);
    EXPECT_EQ(out.dim(0), 5);
    EXPECT_EQ(out.dim(1), 8);
}

TEST(ReduceChannels, IdentityWeightsPassThrough) {
    ParamStore ps;
    add_fusion_params(ps, 4, 4, 1, 2, 22);
    Tensor w = ps.at("fuse.red_l.w");
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) w.ptr()[i * 4 + j] = i == j ? 1.0 : 0.0;
    Tensor in = randmat(3, 4, 1);
    Tensor out = reduce_channels(ps, "fuse.red_l", in);
    for (std::size_t i = 0; i < in.numel(); ++i) EXPECT_DOUBLE_EQ(out.ptr()[i], in.ptr()[i]);
}

TEST(ReduceChannels, SeparateStreamsSeparateParams) {
    ParamStore ps = toy_fusion();
    Tensor wv = ps.at("fuse.red_v.w"), wl = ps.at("fuse.red_l.w");
    bool differs = false;
    for (std::size_t i = 0; i < wv.numel(); ++i) differs = differs || wv.ptr()[i] != wl.ptr()[i];
    EXPECT_TRUE(differs);
    Tensor in = randmat(2, 12, 2);
    Tensor a = reduce_channels(ps, "fuse.red_v", in);
    Tensor b = reduce_channels(ps, "fuse.red_l", in);
    bool out_differs = false;
    for (std::size_t i = 0; i < a.numel(); ++i) out_differs = out_differs || a.ptr()[i] != b.ptr()[i];
    EXPECT_TRUE(out_differs);
}

TEST(ReduceChannels, WidthMismatchRejected) {
    ParamStore ps = toy_fusion();
    EXPECT_THROW(reduce_channels(ps, "fuse.red_v", Tensor::zeros({2, 9})), Error);
}

TEST(FuseVl, OutputShapeIsRowConcat) {
    ParamStore ps = toy_fusion();
    Tensor fv = randmat(80, 8, 3), fl = randmat(5, 8, 4);
    Tensor out = fuse_vl(ps, fv, fl, 1, 2);
    EXPECT_EQ(out.dim(0), 85);
    EXPECT_EQ(out.dim(1), 8);
}

TEST(FuseVl, ZeroFeaturesGiveZeroOutput) {
    ParamStore ps = toy_fusion();
    Tensor out = fuse_vl(ps, Tensor::zeros({4, 8}), Tensor::zeros({2, 8}), 1, 2);
    for (std::size_t i = 0; i < out.numel(); ++i) EXPECT_DOUBLE_EQ(out.ptr()[i], 0.0);
}

TEST(FuseVl, ForcedGatePassesConcatThroughExactly) {
    ParamStore ps = toy_fusion();
    Tensor fv = randmat(6, 8, 5), fl = randmat(3, 8, 6);
    Tensor out = fuse_vl(ps, fv, fl, 1, 2, true);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 8; ++c) EXPECT_EQ(out.ptr()[r * 8 + c], fv.ptr()[r * 8 + c]);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 8; ++c) EXPECT_EQ(out.ptr()[(6 + r) * 8 + c], fl.ptr()[r * 8 + c]);
}

TEST(FuseVl, GateBoundsOutputByConcat) {
    // |gated| < |concat| elementwise since the gate lies in (0,1)
    ParamStore ps = toy_fusion();
    Tensor fv = randmat(4, 8, 7), fl = randmat(2, 8, 8);
    Tensor gated = fuse_vl(ps, fv, fl, 1, 2);
    Tensor concat = fuse_vl(ps, fv, fl, 1, 2, true);
    for (std::size_t i = 0; i < gated.numel(); ++i) {
        if (concat.ptr()[i] == 0.0) {
            EXPECT_EQ(gated.ptr()[i], 0.0);
        } else {
            EXPECT_LT(std::abs(gated.ptr()[i]), std::abs(concat.ptr()[i]));
            // same sign: multiplying by a positive gate
            EXPECT_GT(gated.ptr()[i] * concat.ptr()[i], 0.0);
        }
    }
}

TEST(FuseVl, VisualRowsDependOnText) {
    ParamStore ps = toy_fusion();
    Tensor fv = randmat(4, 8, 9);
    Tensor fl1 = randmat(2, 8, 10), fl2 = randmat(2, 8, 11);
    Tensor a = fuse_vl(ps, fv, fl1, 1, 2);
    Tensor b = fuse_vl(ps, fv, fl2, 1, 2);
    bool visual_changed = false;
    for (int r = 0; r < 4 && !visual_changed; ++r)
        for (int c = 0; c < 8; ++c)
            if (a.ptr()[r * 8 + c] != b.ptr()[r * 8 + c]) {
                visual_changed = true;
                break;
            }
    EXPECT_TRUE(visual_changed);
}

TEST(FuseVl, WidthMismatchRejected) {
    ParamStore ps = toy_fusion();
    EXPECT_THROW(fuse_vl(ps, Tensor::zeros({4, 8}), Tensor::zeros({2, 6}), 1, 2), Error);
}
