// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <numeric>

#include "lsr/error.hpp"
#include "lsr/profile.hpp"

using namespace lsr;

namespace {

std::int64_t visited_parameters(Model<float>& m) {
    std::int64_t n = 0;
    m.visit([&](const std::string&, Var<float>& v, TensorRole role) {
        if (role == TensorRole::Parameter) {
            n += static_cast<std::int64_t>(v.value().numel());
        }
    });
    return n;
}

ModelConfig with_style(ModelConfig cfg, RepStyle style) {
    cfg.rep_style = style;
    return cfg;
}

}  // namespace

TEST(ConvCost, ClosedFormExamples) {
    EXPECT_EQ(conv_param_count(3, 56, 3, 1, true), 3 * 56 * 9 + 56);
    EXPECT_EQ(conv_param_count(3, 56, 3, 1, true), 1568);
    EXPECT_EQ(conv_madds(56, 56, 3, 1, 10, 10), 2822400);
    EXPECT_EQ(conv_madds(56, 56, 3, 56, 10, 10), 9 * 56 * 100);

    Initializer init(1);
    const auto conv = PlainConv<float>::make(init, 56, 56, 3);
    CostSink sink;
    const auto [oh, ow] = conv.cost("c", 10, 10, sink);
    EXPECT_EQ(oh, 10);
    EXPECT_EQ(ow, 10);
    ASSERT_EQ(sink.rows.size(), 1u);
    EXPECT_EQ(sink.rows[0].madds, 2822400);
    const auto strided = PlainConv<float>::make(init, 4, 4, 3, 2, 0);
    CostSink s2;
    EXPECT_EQ(strided.cost("s", 15, 20, s2), (std::pair<int, int>{7, 9}));
}

TEST(Profile, HeadRowIsTheClosedFormConv) {
    Model<float> m(ModelConfig::full(4), 2);
    const auto report = profile_model(m, CostMode::Inference, 64, 64);
    ASSERT_FALSE(report.rows.empty());
    EXPECT_EQ(report.rows.front().name, "head");
    EXPECT_EQ(report.rows.front().params, 1568);
    EXPECT_EQ(report.rows.front().madds, conv_madds(3, 56, 3, 1, 16, 16));
    EXPECT_EQ(report.rows.front().out_h, 16);
}

TEST(Profile, TotalsAreRowSumsAndExportsCarryThem) {
    Model<float> m(ModelConfig::full(2), 3);
    for (CostMode mode : {CostMode::Training, CostMode::Inference}) {
        const auto r = profile_model(m, mode, 64, 48);
        const auto params = std::accumulate(r.rows.begin(), r.rows.end(), std::int64_t{0},
                                            [](std::int64_t a, const CostRow& row) { return a + row.params; });
        const auto madds = std::accumulate(r.rows.begin(), r.rows.end(), std::int64_t{0},
                                           [](std::int64_t a, const CostRow& row) { return a + row.madds; });
        EXPECT_EQ(r.total_params(), params);
        EXPECT_EQ(r.total_madds(), madds);
        const std::string csv = r.to_csv();
        EXPECT_EQ(csv.rfind("name,params,madds,out_h,out_w\n", 0), 0u);
        EXPECT_NE(csv.find("total," + std::to_string(params) + "," + std::to_string(madds)), std::string::npos);
        EXPECT_NE(r.to_table().find(std::to_string(params)), std::string::npos);
    }
}

TEST(Profile, CountsMatchTheTensorsTheModelHolds) {
    for (const auto& cfg : {ModelConfig::full(4), ModelConfig::small(2)}) {
        Model<float> m(cfg, 4);
        EXPECT_EQ(count_params(m, CostMode::Training), visited_parameters(m));
        fuse_model(m);
        EXPECT_EQ(count_params(m, CostMode::Inference), visited_parameters(m));
    }
}

TEST(Profile, InferenceNeverExceedsTrainingAndEqualsForStatic) {
    for (RepStyle style : {RepStyle::DBB, RepStyle::RepVGG, RepStyle::Static}) {
        Model<float> m(with_style(ModelConfig::full(4), style), 5);
        const auto train = count_params(m, CostMode::Training);
        const auto infer = count_params(m, CostMode::Inference);
        const auto train_madds = count_madds(m, 256, 256, CostMode::Training);
        const auto infer_madds = count_madds(m, 256, 256, CostMode::Inference);
        if (style == RepStyle::Static) {
            EXPECT_EQ(train, infer);
            EXPECT_EQ(train_madds, infer_madds);
        } else {
            EXPECT_LT(infer, train);
            EXPECT_LT(infer_madds, train_madds);
        }
    }
}

TEST(Profile, RepKernelsCostLikePlainConvsAtInference) {
    Model<float> dbb(ModelConfig::full(4), 6);
    Model<float> plain(with_style(ModelConfig::full(4), RepStyle::Static), 6);
    EXPECT_EQ(count_params(dbb, CostMode::Inference), count_params(plain, CostMode::Inference));
    EXPECT_EQ(count_madds(dbb, 1280, 720), count_madds(plain, 1280, 720));
    fuse_model(dbb);
    EXPECT_EQ(count_madds(dbb, 1280, 720, CostMode::Training), count_madds(plain, 1280, 720));
}

TEST(Profile, MonotoneInLatentWidth) {
    std::int64_t last_params = -1;
    std::int64_t last_madds = -1;
    for (int latent : {0, 8, 16, 24}) {
        ModelConfig cfg = ModelConfig::full(4);
        cfg.latent = latent;
        Model<float> m(cfg, 7);
        const auto params = count_params(m, CostMode::Inference);
        const auto madds = count_madds(m, 1280, 720);
        EXPECT_GT(params, last_params) << "L=" << latent;
        EXPECT_GT(madds, last_madds) << "L=" << latent;
        last_params = params;
        last_madds = madds;
    }
}

TEST(Profile, MaddsScaleWithOutputArea) {
    ModelConfig cfg = ModelConfig::full(2);
    Model<float> m(cfg, 8);
    const auto r1 = profile_model(m, CostMode::Inference, 128, 128);
    const auto r2 = profile_model(m, CostMode::Inference, 256, 256);
    ASSERT_EQ(r1.rows.size(), r2.rows.size());
    for (std::size_t i = 0; i < r1.rows.size(); ++i) {
        EXPECT_EQ(r1.rows[i].params, r2.rows[i].params);
        const bool per_sample = r1.rows[i].out_h == 1 && r1.rows[i].out_w == 1;
        const bool pooled = r1.rows[i].name.find("esa") != std::string::npos;
        if (!per_sample && !pooled) {
            EXPECT_EQ(r2.rows[i].madds, 4 * r1.rows[i].madds) << r1.rows[i].name;
        }
    }
}

TEST(Profile, ModeParsingAndBadSizes) {
    EXPECT_EQ(parse_cost_mode("training"), CostMode::Training);
    EXPECT_EQ(parse_cost_mode("inference"), CostMode::Inference);
    EXPECT_THROW(parse_cost_mode("deploy"), ConfigError);
    Model<float> m(ModelConfig::small(2), 9);
    EXPECT_THROW(profile_model(m, CostMode::Inference, 0, 10), ConfigError);
}
