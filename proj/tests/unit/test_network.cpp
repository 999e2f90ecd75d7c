// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "lsr/error.hpp"
#include "lsr/network.hpp"
#include "model_oracles.hpp"

using namespace lsr;
using lsr::testing::max_diff;
using lsr::testing::model_oracle;
using lsr::testing::random_tensor;
using lsr::testing::randomize_model;

namespace {

ModelConfig tiny(bool full, int scale) {
    ModelConfig cfg = full ? ModelConfig::full(scale) : ModelConfig::small(scale);
    cfg.channels = 8;
    cfg.blocks = 2;
    cfg.latent = 2;
    return cfg;
}

std::vector<float> flatten(Model<float>& m) {
    std::vector<float> out;
    m.visit([&](const std::string&, Var<float>& v, TensorRole) {
        out.insert(out.end(), v.value().data().begin(), v.value().data().end());
    });
    return out;
}

}  // namespace

TEST(ModelConfig, PresetsFollowVariantRules) {
    const auto full = ModelConfig::full(4);
    EXPECT_EQ(full.channels, 56);
    EXPECT_EQ(full.blocks, 4);
    EXPECT_EQ(full.latent, 16);
    EXPECT_EQ(full.arch, RduArch::Base);
    EXPECT_TRUE(full.ddf);
    const auto small = ModelConfig::small(2);
    EXPECT_EQ(small.arch, RduArch::SCB);
    EXPECT_EQ(small.latent, 8);
    EXPECT_FALSE(small.ddf);
    EXPECT_EQ(full.effective_distilled(), 28);
}

TEST(ModelConfig, ValidationRejectsBadValues) {
    auto cfg = ModelConfig::full(4);
    cfg.scale = 5;
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_THROW(Model<float>(cfg, 1), ConfigError);
    cfg = ModelConfig::full(4);
    cfg.latent = 29;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = ModelConfig::small(2);
    cfg.ddf = true;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = ModelConfig::full(3);
    cfg.arch = RduArch::RB;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(ModelConfig, JsonRoundTripAndUnknownKeys) {
    auto cfg = ModelConfig::small(3);
    cfg.channels = 24;
    cfg.rep_style = RepStyle::RepVGG;
    cfg.slope = 0.1;
    EXPECT_EQ(model_config_from_json(model_config_to_json(cfg)), cfg);
    EXPECT_EQ(model_config_from_json("{\"scale\": 2, \"variant\": \"small\"}"), ModelConfig::small(2));
    EXPECT_EQ(model_config_from_json("{}"), ModelConfig::full(4));
    EXPECT_THROW(model_config_from_json("{\"scael\": 2}"), ConfigError);
    EXPECT_THROW(model_config_from_json("{\"scale\": \"two\"}"), ConfigError);
    EXPECT_THROW(model_config_from_json("[1, 2]"), ConfigError);
    EXPECT_THROW(model_config_from_json("{not json"), ConfigError);
    EXPECT_THROW(model_config_from_json("{\"scale\": 8}"), ConfigError);
}

class ModelShapes : public ::testing::TestWithParam<std::tuple<bool, int>> {};

TEST_P(ModelShapes, OutputIsScaledAndFinite) {
    const auto [full, scale] = GetParam();
    Model<float> m(tiny(full, scale), 3);
    const Tensor lr = random_tensor<float>(Shape{2, 3, 16, 19}, 4, 0.0, 1.0);
    const Tensor sr = super_resolve(m, lr);
    EXPECT_EQ(sr.shape(), (Shape{2, 3, 16 * scale, 19 * scale}));
    for (float v : sr.data()) {
        ASSERT_TRUE(std::isfinite(v));
    }
}

TEST_P(ModelShapes, MatchesTranscriptionOracleAndFusedForm) {
    const auto [full, scale] = GetParam();
    Model<float> m(tiny(full, scale), 5);
    randomize_model(m, 50);
    const Tensor lr = random_tensor<float>(Shape{1, 3, 16, 16}, 6, 0.0, 1.0);
    const Tensor unfused = super_resolve(m, lr);
    EXPECT_LE(max_diff(unfused, model_oracle(m, lr.cast<double>())), 1e-4);
    EXPECT_EQ(fuse_model(m), FuseStatus::Fused);
    EXPECT_TRUE(m.is_fused());
    EXPECT_LE(max_diff(super_resolve(m, lr), unfused), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(VariantsAndScales, ModelShapes,
                         ::testing::Combine(::testing::Bool(), ::testing::Values(2, 3, 4)));

TEST(Model, FullSizeFusedMatchesUnfused) {
    for (bool full : {true, false}) {
        Model<float> m(full ? ModelConfig::full(4) : ModelConfig::small(2), 7);
        randomize_model(m, 70);
        const Tensor lr = random_tensor<float>(Shape{1, 3, 16, 16}, 8, 0.0, 1.0);
        const Tensor before = super_resolve(m, lr);
        fuse_model(m);
        EXPECT_LE(max_diff(super_resolve(m, lr), before), 1e-4) << (full ? "full" : "small");
    }
}

TEST(Model, SameSeedSameParametersDifferentSeedDiffers) {
    Model<float> a(tiny(true, 2), 11);
    Model<float> b(tiny(true, 2), 11);
    Model<float> c(tiny(true, 2), 12);
    EXPECT_EQ(flatten(a), flatten(b));
    EXPECT_NE(flatten(a), flatten(c));
}

TEST(Model, GeneratorsStartNeutral) {
    Model<float> m(tiny(true, 2), 13);
    int seen = 0;
    m.visit([&](const std::string& name, Var<float>& v, TensorRole) {
        if (name.find("fc2.") != std::string::npos || name.find("fc_phi.") != std::string::npos) {
            ++seen;
            for (float x : v.value().data()) {
                EXPECT_EQ(x, 0.0f) << name;
            }
        }
    });
    EXPECT_GT(seen, 0);
}

TEST(Model, ZeroWeightsGiveTheRefineBias) {
    Model<float> m(tiny(true, 3), 14);
    m.visit([](const std::string&, Var<float>& v, TensorRole role) {
        if (role == TensorRole::Parameter) {
            v.mutable_value() = Tensor(v.shape());
        }
    });
    m.refine().bias.mutable_value() = Tensor(Shape{1, 3, 1, 1}, std::vector<float>{0.1f, -0.2f, 0.3f});
    const Tensor sr = super_resolve(m, random_tensor<float>(Shape{1, 3, 16, 16}, 15));
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < sr.shape().plane(); ++i) {
            ASSERT_EQ(sr.plane(0, c)[i], m.refine().bias.value()[c]);
        }
    }
}

TEST(Model, FuseTwiceIsIdentity) {
    Model<float> m(tiny(true, 2), 16);
    randomize_model(m, 160);
    EXPECT_EQ(fuse_model(m), FuseStatus::Fused);
    const auto once = flatten(m);
    EXPECT_EQ(fuse_model(m), FuseStatus::AlreadyFused);
    EXPECT_EQ(flatten(m), once);
    m.visit_graphs([](const std::string& name, BranchGraph<float>& g) { EXPECT_TRUE(g.is_fused()) << name; });
}

TEST(Model, RejectsUndersizedOrWrongChannelInput) {
    Model<float> m(tiny(true, 2), 17);
    EXPECT_THROW(super_resolve(m, Tensor(Shape{1, 3, kMinInputExtent - 1, 32})), DimensionError);
    EXPECT_THROW(super_resolve(m, Tensor(Shape{1, 1, 32, 32})), DimensionError);
    EXPECT_NO_THROW(super_resolve(m, Tensor(Shape{1, 3, kMinInputExtent, kMinInputExtent})));
}

TEST(Model, GlobalFusionConsumesEveryBlock) {
    Model<float> m(tiny(true, 2), 18);
    EXPECT_EQ(m.blocks().size(), 2u);
    EXPECT_EQ(m.global_sdf().weight.shape().c, 2 * 8);
    EXPECT_TRUE(m.has_global_ddf());
    EXPECT_EQ(m.global_ddf().weight.shape().c, 2 * 8);
    Model<float> s(tiny(false, 2), 18);
    EXPECT_FALSE(s.has_global_ddf());
}

TEST(Model, DescribeListsTensorsAndStructure) {
    Model<float> m(tiny(true, 2), 19);
    const std::string text = describe_model(m);
    EXPECT_NE(text.find("head.weight"), std::string::npos);
    EXPECT_NE(text.find("dbb"), std::string::npos);
    EXPECT_NE(text.find("training structure"), std::string::npos);
    fuse_model(m);
    EXPECT_NE(describe_model(m).find("fused"), std::string::npos);
}
