// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "lsr/blocks.hpp"
#include "lsr/error.hpp"
#include "model_oracles.hpp"

using namespace lsr;
using lsr::testing::apply;
using lsr::testing::block_oracle;
using lsr::testing::concat64;
using lsr::testing::esa_oracle;
using lsr::testing::max_diff;
using lsr::testing::random_tensor;
using lsr::testing::randomize;
using lsr::testing::randomize_bn;
using lsr::testing::randomize_generators;
using lsr::testing::rdu_oracle;

namespace {

RduConfig rdu_config(RduArch arch, int c, int latent, RepStyle style = RepStyle::DBB) {
    RduConfig cfg;
    cfg.arch = arch;
    cfg.channels = c;
    cfg.latent = latent;
    cfg.rep_style = style;
    return cfg;
}

DcdConv<float>& unit(Rdu<float>& r, int i) {
    return dynamic_cast<DcdConv<float>&>(*r.units()[i]);
}

void randomize_rdu(Rdu<float>& r, std::uint64_t seed) {
    for (std::size_t i = 0; i < r.units().size(); ++i) {
        auto& u = unit(r, static_cast<int>(i));
        randomize_bn(u.graph(), seed + 100 * i);
        if (u.latent() > 0) {
            randomize_generators(u, seed + 100 * i + 50);
        }
    }
}

void randomize_block(RepDfdb<float>& b, std::uint64_t seed) {
    for (auto& r : b.rdus()) {
        randomize_rdu(*r, seed);
        seed += 1000;
    }
}

Tensor eval(const Var<float>& v) {
    return v.value();
}

void set_plain(PlainConv<float>& conv, float weight, float bias) {
    conv.weight.mutable_value() = Tensor(conv.weight.shape(), weight);
    conv.bias.mutable_value() = Tensor(conv.bias.shape(), bias);
}

/// Static single-conv graph whose kernel is the Dirac identity with zero bias.
void make_identity_kernel(DcdConv<float>& d) {
    auto& node = d.graph().branches()[0].nodes[0];
    Tensor w(node.weight.shape());
    const int k = w.h();
    for (int c = 0; c < w.n(); ++c) {
        w.at(c, c, k / 2, k / 2) = 1.0f;
    }
    node.weight.mutable_value() = w;
    node.bias.mutable_value() = Tensor(node.bias.shape());
}

}  // namespace

TEST(Rdu, ResidualBlockWithZeroOuterConvIsPureSkip) {
    Initializer init(1);
    Rdu<float> r(rdu_config(RduArch::RB, 8, 2, RepStyle::Static), init);
    auto& outer = unit(r, 1).graph().branches()[0].nodes[0];
    outer.weight.mutable_value() = Tensor(outer.weight.shape());
    outer.bias.mutable_value() = Tensor(outer.bias.shape());
    const Tensor x = random_tensor<float>(Shape{2, 8, 6, 6}, 2);
    NoGradGuard guard;
    const auto out = r.forward(ad::constant(x), Mode::Eval);
    EXPECT_EQ(max_diff(eval(out.static_out), x), 0.0);
    const Tensor& bias = r.fusion().bias.value();
    const Tensor dyn = eval(out.dynamic);
    for (int n = 0; n < 2; ++n) {
        for (int c = 0; c < 8; ++c) {
            for (std::size_t i = 0; i < 36; ++i) {
                EXPECT_FLOAT_EQ(dyn.plane(n, c)[i], bias[c]);
            }
        }
    }
}

TEST(Rdu, SkipBlockWithIdentityKernelIsActivationPlusInput) {
    Initializer init(3);
    RduConfig cfg = rdu_config(RduArch::SRB, 6, 2, RepStyle::Static);
    Rdu<float> r(cfg, init);
    make_identity_kernel(unit(r, 0));
    const Tensor x = random_tensor<float>(Shape{1, 6, 5, 5}, 4);
    NoGradGuard guard;
    const Tensor y = eval(r.forward(ad::constant(x), Mode::Eval).static_out);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        EXPECT_NEAR(y[i], lsr::testing::leaky(x[i], cfg.slope) + x[i], 1e-6);
    }
}

class RduRandom : public ::testing::TestWithParam<std::tuple<RduArch, int>> {};

TEST_P(RduRandom, MatchesCompositionOracleAndFusedForm) {
    const auto [arch, seed] = GetParam();
    Initializer init(seed);
    Rdu<float> r(rdu_config(arch, 8, 2), init);
    randomize_rdu(r, seed * 10);
    const Tensor x = random_tensor<float>(Shape{2, 8, 8, 8}, seed + 1);
    NoGradGuard guard;
    const auto out = r.forward(ad::constant(x), Mode::Eval);
    const auto oracle = rdu_oracle(r, x.cast<double>());
    EXPECT_LE(max_diff(eval(out.static_out), oracle.static_out), 1e-4);
    EXPECT_LE(max_diff(eval(out.dynamic), oracle.dynamic), 1e-4);
    r.fuse();
    const auto fused = r.forward(ad::constant(x), Mode::Eval);
    EXPECT_LE(max_diff(eval(fused.static_out), eval(out.static_out)), 1e-4);
    EXPECT_LE(max_diff(eval(fused.dynamic), eval(out.dynamic)), 1e-4);
    EXPECT_THROW(r.forward(ad::constant(Tensor(Shape{1, 4, 8, 8})), Mode::Eval), DimensionError);
}

INSTANTIATE_TEST_SUITE_P(Archs, RduRandom,
                         ::testing::Values(std::make_tuple(RduArch::Base, 10), std::make_tuple(RduArch::SRB, 11),
                                           std::make_tuple(RduArch::SCB, 12), std::make_tuple(RduArch::RB, 13)));

TEST(ShallowFusion, SingleResidualPassesThroughOrIdentityConv) {
    Initializer init(20);
    const Var<float> r = ad::constant(random_tensor<float>(Shape{1, 4, 5, 5}, 21));
    const std::array<Var<float>, 1> one{r};
    EXPECT_EQ(max_diff(eval(shallow_fusion<float>(one, nullptr)), r.value()), 0.0);
    auto conv = PlainConv<float>::make(init, 4, 4, 1);
    Tensor w(conv.weight.shape());
    for (int c = 0; c < 4; ++c) {
        w.at(c, c, 0, 0) = 1.0f;
    }
    conv.weight.mutable_value() = w;
    conv.bias.mutable_value() = Tensor(conv.bias.shape());
    EXPECT_LE(max_diff(eval(shallow_fusion<float>(one, &conv)), r.value()), 1e-7);
    EXPECT_THROW(shallow_fusion<float>(std::span<const Var<float>>{}, &conv), ContractError);
}

TEST(ShallowFusion, ZeroResidualsGiveBiasAndRandomMatchesConcatOracle) {
    Initializer init(22);
    auto conv = PlainConv<float>::make(init, 8, 4, 1);
    randomize(conv.bias, 23);
    const std::array<Var<float>, 2> zeros{ad::constant(Tensor(Shape{1, 4, 3, 3})), ad::constant(Tensor(Shape{1, 4, 3, 3}))};
    const Tensor z = eval(shallow_fusion<float>(zeros, &conv));
    for (int c = 0; c < 4; ++c) {
        for (std::size_t i = 0; i < 9; ++i) {
            EXPECT_FLOAT_EQ(z.plane(0, c)[i], conv.bias.value()[c]);
        }
    }
    const Tensor a = random_tensor<float>(Shape{2, 4, 6, 6}, 24);
    const Tensor b = random_tensor<float>(Shape{2, 4, 6, 6}, 25);
    const std::array<Var<float>, 2> two{ad::constant(a), ad::constant(b)};
    EXPECT_LE(max_diff(eval(shallow_fusion<float>(two, &conv)), apply(conv, concat64({a.cast<double>(), b.cast<double>()}))),
              1e-6);
    EXPECT_THROW(shallow_fusion<float>(two, nullptr), ContractError);
}

TEST(Sdf, SelectorZeroAndRandom) {
    Initializer init(30);
    auto conv = PlainConv<float>::make(init, 16, 4, 1);
    std::array<Var<float>, 4> parts;
    std::vector<Tensor64> parts64;
    for (int i = 0; i < 4; ++i) {
        const Tensor t = random_tensor<float>(Shape{2, 4, 5, 5}, 31 + i);
        parts[i] = ad::constant(t);
        parts64.push_back(t.cast<double>());
    }
    EXPECT_LE(max_diff(eval(sdf<float>(parts, conv)), apply(conv, concat64(parts64))), 1e-6);

    Tensor w(conv.weight.shape());
    for (int c = 0; c < 4; ++c) {
        w.at(c, c, 0, 0) = 1.0f;
    }
    conv.weight.mutable_value() = w;
    conv.bias.mutable_value() = Tensor(conv.bias.shape());
    EXPECT_LE(max_diff(eval(sdf<float>(parts, conv)), parts[0].value()), 1e-7);

    set_plain(conv, 0.0f, 0.25f);
    const auto values1 = eval(sdf<float>(parts, conv));
    for (float v : values1.data()) {
        EXPECT_EQ(v, 0.25f);
    }
    EXPECT_THROW(sdf<float>(std::span<const Var<float>>(parts.data(), 3), conv), ContractError);
}

TEST(Ddf, SaturatedGatesAndRandomTranscription) {
    Initializer init(40);
    auto pa = PlainConv<float>::make(init, 4, 4, 1);
    auto fuse = PlainConv<float>::make(init, 16, 4, 1);
    std::array<Var<float>, 4> dyn;
    std::vector<Tensor64> dyn64;
    for (int i = 0; i < 4; ++i) {
        const Tensor t = random_tensor<float>(Shape{2, 4, 5, 5}, 41 + i);
        dyn[i] = ad::constant(t);
        dyn64.push_back(t.cast<double>());
    }
    const Tensor f_sdf = random_tensor<float>(Shape{2, 4, 5, 5}, 46);

    const Tensor64 gate = apply(pa, f_sdf.cast<double>());
    const Tensor64 mixed = apply(fuse, concat64(dyn64));
    Tensor64 expect(mixed.shape());
    for (std::size_t i = 0; i < expect.numel(); ++i) {
        expect[i] = lsr::testing::sigmoid(gate[i]) * mixed[i];
    }
    EXPECT_LE(max_diff(eval(ddf<float>(dyn, ad::constant(f_sdf), pa, fuse)), expect), 1e-5);

    set_plain(pa, 0.0f, -60.0f);
    const auto values2 = eval(ddf<float>(dyn, ad::constant(f_sdf), pa, fuse));
    for (float v : values2.data()) {
        EXPECT_LE(std::abs(v), 1e-20f);
    }

    set_plain(pa, 0.0f, 60.0f);
    Tensor w(fuse.weight.shape());
    for (int c = 0; c < 4; ++c) {
        w.at(c, 4 + c, 0, 0) = 1.0f;  // selects the second dynamic tensor
    }
    fuse.weight.mutable_value() = w;
    fuse.bias.mutable_value() = Tensor(fuse.bias.shape());
    EXPECT_LE(max_diff(eval(ddf<float>(dyn, ad::constant(f_sdf), pa, fuse)), dyn[1].value()), 1e-7);
}

TEST(Esa, SaturatedGateGivesInputOrZero) {
    Initializer init(50);
    Esa<float> e(8, init);
    const Tensor x = random_tensor<float>(Shape{1, 8, 16, 16}, 51);
    set_plain(e.expand, 0.0f, 60.0f);
    EXPECT_LE(max_diff(eval(e.forward(ad::constant(x))), x), 1e-7);
    set_plain(e.expand, 0.0f, -60.0f);
    const auto values3 = eval(e.forward(ad::constant(x)));
    for (float v : values3.data()) {
        EXPECT_LE(std::abs(v), 1e-20f);
    }
}

TEST(Esa, RandomWeightsBoundedByInputAndMatchOracle) {
    for (std::uint64_t seed : {52u, 53u, 54u}) {
        Initializer init(seed);
        Esa<float> e(8, init);
        randomize(e.expand.weight, seed + 10, -2.0, 2.0);
        const Tensor x = random_tensor<float>(Shape{2, 8, 17, 20}, seed + 20, -3.0, 3.0);
        const Tensor y = eval(e.forward(ad::constant(x)));
        for (std::size_t i = 0; i < x.numel(); ++i) {
            EXPECT_LE(std::abs(y[i]), std::abs(x[i]));
            EXPECT_GE(y[i] * x[i], 0.0f);
        }
        EXPECT_LE(max_diff(y, esa_oracle(e, x.cast<double>())), 1e-5);
    }
}

TEST(Esa, RejectsSmallInputsAndNarrowChannels) {
    Initializer init(55);
    Esa<float> e(8, init);
    try {
        e.forward(ad::constant(Tensor(Shape{1, 8, 14, 32})));
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& err) {
        EXPECT_NE(std::string(err.what()).find(std::to_string(kEsaMinExtent)), std::string::npos);
    }
    EXPECT_NO_THROW(e.forward(ad::constant(Tensor(Shape{1, 8, kEsaMinExtent, kEsaMinExtent}))));
    EXPECT_THROW(Esa<float>(3, init), ConfigError);
}

namespace {

RepDfdbConfig block_config(RduArch arch, int c, int latent, bool ddf) {
    RepDfdbConfig cfg;
    cfg.rdu = rdu_config(arch, c, latent);
    cfg.distilled_channels = c / 2;
    cfg.ddf = ddf;
    return cfg;
}

}  // namespace

TEST(RepDfdb, ClosedAttentionGateLeavesSkipOnly) {
    Initializer init(60);
    RepDfdb<float> b(block_config(RduArch::Base, 8, 2, true), init);
    set_plain(b.esa().expand, 0.0f, -60.0f);
    const Tensor x = random_tensor<float>(Shape{1, 8, 16, 16}, 61);
    NoGradGuard guard;
    EXPECT_LE(max_diff(eval(b.forward(ad::constant(x), Mode::Eval).f), x), 1e-7);
}

TEST(RepDfdb, WithoutDynamicFusionTheDynamicTermIsZero) {
    Initializer init(62);
    RepDfdb<float> b(block_config(RduArch::Base, 8, 2, false), init);
    EXPECT_FALSE(b.has_ddf());
    const Tensor x = random_tensor<float>(Shape{1, 8, 16, 16}, 63);
    NoGradGuard guard;
    const auto out = b.forward(ad::constant(x), Mode::Eval);
    const auto values4 = eval(out.f_ddf);
    for (float v : values4.data()) {
        EXPECT_EQ(v, 0.0f);
    }
    const Tensor expect = add(eval(b.esa().forward(out.f_sdf)), x);
    EXPECT_EQ(max_diff(eval(out.f), expect), 0.0);
}

class RepDfdbRandom : public ::testing::TestWithParam<std::tuple<RduArch, bool, int>> {};

TEST_P(RepDfdbRandom, MatchesTranscriptionOracleAndFusedForm) {
    const auto [arch, ddf_on, seed] = GetParam();
    Initializer init(seed);
    RepDfdb<float> b(block_config(arch, 8, 2, ddf_on), init);
    EXPECT_EQ(b.has_ddf(), ddf_on);
    randomize_block(b, seed * 10);
    randomize(b.esa().expand.weight, seed + 5, -2.0, 2.0);
    const Tensor x = random_tensor<float>(Shape{2, 8, 16, 16}, seed + 1);
    NoGradGuard guard;
    const auto out = b.forward(ad::constant(x), Mode::Eval);
    const auto oracle = block_oracle(b, x.cast<double>());
    EXPECT_LE(max_diff(eval(out.f_sdf), oracle.f_sdf), 1e-4);
    EXPECT_LE(max_diff(eval(out.f_ddf), oracle.f_ddf), 1e-4);
    EXPECT_LE(max_diff(eval(out.f), oracle.f), 1e-4);

    for (const auto& d : out.distilled) {
        EXPECT_EQ(d.shape(), (Shape{2, 4, 16, 16}));
    }
    for (const auto& d : out.dynamics) {
        EXPECT_EQ(d.shape(), x.shape());
    }
    EXPECT_EQ(max_diff(out.dynamics[3].value(), x), 0.0);

    b.fuse();
    EXPECT_LE(max_diff(eval(b.forward(ad::constant(x), Mode::Eval).f), eval(out.f)), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Configs, RepDfdbRandom,
                         ::testing::Values(std::make_tuple(RduArch::Base, true, 70),
                                           std::make_tuple(RduArch::RB, true, 71),
                                           std::make_tuple(RduArch::SCB, false, 72)));

TEST(RepDfdb, DynamicFusionNeedsLatentAndDcd) {
    EXPECT_TRUE(block_has_ddf(block_config(RduArch::Base, 8, 2, true)));
    EXPECT_FALSE(block_has_ddf(block_config(RduArch::Base, 8, 0, true)));
    auto cfg = block_config(RduArch::Base, 8, 2, true);
    cfg.rdu.conv_type = ConvType::DYConv;
    EXPECT_FALSE(block_has_ddf(cfg));
}

TEST(RepDfdb, LatentZeroWithoutFusionIsPurelyStatic) {
    Initializer init(80);
    RepDfdb<float> b(block_config(RduArch::Base, 8, 0, false), init);
    b.visit("", [](const std::string& name, Var<float>&, TensorRole) {
        EXPECT_EQ(name.find("q_t"), std::string::npos) << name;
        EXPECT_EQ(name.find("fc"), std::string::npos) << name;
        EXPECT_EQ(name.find("ddf"), std::string::npos) << name;
    });
    const Tensor x = random_tensor<float>(Shape{1, 8, 16, 16}, 81);
    NoGradGuard guard;
    const auto out = b.forward(ad::constant(x), Mode::Eval);
    for (int i = 0; i < 3; ++i) {
        const auto values5 = eval(out.dynamics[i]);
        for (float v : values5.data()) {
            EXPECT_EQ(v, 0.0f);
        }
    }
}
