// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "lsr/degrade.hpp"
#include "lsr/error.hpp"
#include "lsr/image.hpp"
#include "oracles.hpp"

using namespace lsr;
using lsr::testing::bicubic_oracle;
using lsr::testing::max_diff;
using lsr::testing::random_tensor;

namespace {

Tensor crop(const Tensor& t, int y0, int x0, int h, int w) {
    Tensor out(Shape{t.n(), t.c(), h, w});
    for (int c = 0; c < t.c(); ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                out.at(0, c, y, x) = t.at(0, c, y0 + y, x0 + x);
            }
        }
    }
    return out;
}

}  // namespace

TEST(Bicubic, KeysWeightsPartitionUnity) {
    EXPECT_DOUBLE_EQ(keys_cubic(0.0), 1.0);
    EXPECT_DOUBLE_EQ(keys_cubic(1.0), 0.0);
    EXPECT_DOUBLE_EQ(keys_cubic(2.0), 0.0);
    EXPECT_DOUBLE_EQ(keys_cubic(0.5), lsr::testing::keys(0.5));
    EXPECT_DOUBLE_EQ(keys_cubic(1.5), lsr::testing::keys(1.5));
    for (int i = 0; i <= 100; ++i) {
        const double f = i / 100.0;
        const double sum = keys_cubic(f + 1) + keys_cubic(f) + keys_cubic(1 - f) + keys_cubic(2 - f);
        EXPECT_NEAR(sum, 1.0, 1e-9) << f;
    }
}

TEST(Bicubic, ConstantPreservedAtEveryFactor) {
    const Tensor c(Shape{1, 3, 24, 36}, 0.37f);
    for (int f = 1; f <= 4; ++f) {
        const std::vector<std::pair<int, int>> factors{{1, f}, {f, 1}};
        for (auto [up, down] : factors) {
            const Tensor r = bicubic_resize(c, up, down);
            EXPECT_EQ(r.h(), 24 * up / down);
            for (float v : r.data()) {
                ASSERT_NEAR(v, 0.37f, 1e-6);
            }
        }
    }
    const Tensor x = random_tensor<float>(Shape{1, 3, 6, 6}, 1);
    EXPECT_EQ(max_diff(bicubic_resize(x, 1, 1), x), 0.0);
}

TEST(Bicubic, RampDownscaleMatchesKernelSummationOracle) {
    Tensor ramp(Shape{1, 1, 8, 8});
    std::vector<double> src(64);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            ramp.at(0, 0, y, x) = static_cast<float>((x + 8 * y) / 63.0);
            src[y * 8 + x] = ramp.at(0, 0, y, x);
        }
    }
    const Tensor out = bicubic_resize(ramp, 1, 2);
    const auto expect = bicubic_oracle(src, 8, 8, 4, 4);
    for (int i = 0; i < 16; ++i) {
        EXPECT_NEAR(out[i], expect[i], 1e-6);
    }
}

TEST(Bicubic, RandomResizesMatchOracle) {
    const Tensor x = random_tensor<float>(Shape{1, 2, 12, 9}, 2);
    for (auto [up, down] : std::vector<std::pair<int, int>>{{1, 3}, {3, 1}, {2, 1}, {4, 1}}) {
        const Tensor y = bicubic_resize(x, up, down);
        for (int c = 0; c < 2; ++c) {
            std::vector<double> src(x.plane(0, c), x.plane(0, c) + 108);
            const auto expect = bicubic_oracle(src, 12, 9, y.h(), y.w());
            for (std::size_t i = 0; i < expect.size(); ++i) {
                ASSERT_NEAR(y.plane(0, c)[i], expect[i], 1e-5) << up << "/" << down;
            }
        }
    }
}

TEST(Bicubic, RejectsUnsupportedFactorsAndRaggedSizes) {
    const Tensor x(Shape{1, 3, 12, 12});
    EXPECT_THROW(bicubic_resize(x, 1, 5), ConfigError);
    EXPECT_THROW(bicubic_resize(x, 2, 3), ConfigError);
    EXPECT_THROW(bicubic_resize(Tensor(Shape{1, 3, 10, 12}), 1, 4), DimensionError);
}

TEST(Bicubic, CommutesWithRotationAndFlip) {
    const Tensor x = random_tensor<float>(Shape{1, 3, 12, 16}, 3, 0.0, 1.0);
    for (int turns = 0; turns < 4; ++turns) {
        for (bool flip : {false, true}) {
            EXPECT_LE(max_diff(bicubic_resize(rotate_flip(x, turns, flip), 1, 2),
                               rotate_flip(bicubic_resize(x, 1, 2), turns, flip)),
                      1e-6);
        }
    }
}

TEST(Gaussian, TapsMatchClosedFormAndSumToOne) {
    const auto taps = gaussian_taps(kBlurSize, kBlurSigma);
    double norm = 0.0;
    for (int d = -3; d <= 3; ++d) {
        norm += std::exp(-d * d / (2 * 1.6 * 1.6));
    }
    double sum = 0.0;
    for (int d = -3; d <= 3; ++d) {
        EXPECT_NEAR(taps[d + 3], std::exp(-d * d / (2 * 1.6 * 1.6)) / norm, 1e-12);
        sum += taps[d + 3];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    EXPECT_THROW(gaussian_taps(6, 1.0), ConfigError);
    EXPECT_THROW(gaussian_taps(7, 0.0), ConfigError);
}

TEST(Gaussian, CenteredImpulseGivesOuterProductOfTaps) {
    Tensor impulse(Shape{1, 1, 15, 15});
    impulse.at(0, 0, 7, 7) = 1.0f;
    const Tensor b = gaussian_blur(impulse);
    const auto taps = gaussian_taps(kBlurSize, kBlurSigma);
    for (int y = 0; y < 15; ++y) {
        for (int x = 0; x < 15; ++x) {
            const int dy = y - 7;
            const int dx = x - 7;
            const double expect = (std::abs(dy) <= 3 && std::abs(dx) <= 3) ? taps[dy + 3] * taps[dx + 3] : 0.0;
            EXPECT_NEAR(b.at(0, 0, y, x), expect, 1e-7);
        }
    }
}

TEST(Degrade, ConstantImagesSurviveEveryPipeline) {
    const Tensor c(Shape{1, 3, 30, 33}, 0.6f);
    for (Degradation d : {Degradation::BI, Degradation::BD}) {
        const Tensor lr = degrade(c, d, 3, 0);
        EXPECT_EQ(lr.shape(), (Shape{1, 3, 10, 11}));
        for (float v : lr.data()) {
            ASSERT_NEAR(v, 0.6f, 1e-6);
        }
    }
    const Tensor cropped = degrade(Tensor(Shape{1, 3, 31, 35}, 0.2f), Degradation::BI, 4, 0);
    EXPECT_EQ(cropped.shape(), (Shape{1, 3, 7, 8}));
    EXPECT_THROW(crop_to_multiple(Tensor(Shape{1, 3, 2, 9}), 3), DataError);
}

TEST(Degrade, BlurredDownscaleComposition) {
    const Tensor x = random_tensor<float>(Shape{1, 3, 18, 12}, 4, 0.0, 1.0);
    EXPECT_EQ(max_diff(degrade_bd(x), bicubic_resize(gaussian_blur(x), 1, 3)), 0.0);
}

TEST(Degrade, NoiseIsSeededAndHasTheStatedSpread) {
    const Tensor gray(Shape{1, 3, 300, 300}, 0.5f);
    const Tensor a = degrade_dn(gray, 42);
    EXPECT_EQ(max_diff(a, degrade_dn(gray, 42)), 0.0);
    EXPECT_GT(max_diff(a, degrade_dn(gray, 43)), 0.0);
    double sum = 0.0;
    double sq = 0.0;
    for (float v : a.data()) {
        sum += v - 0.5;
        sq += (v - 0.5) * (v - 0.5);
    }
    const double n = static_cast<double>(a.numel());
    const double mean = sum / n;
    const double std = std::sqrt(sq / n - mean * mean);
    EXPECT_NEAR(mean, 0.0, 0.01);
    EXPECT_NEAR(std, kNoiseSigma, 0.05 * kNoiseSigma);
    const Tensor x = random_tensor<float>(Shape{1, 3, 9, 9}, 5, 0.0, 1.0);
    EXPECT_LE(max_diff(degrade_dn(x, 1, 3, 0.0), degrade_bi(x, 3)), 0.0);
    const Tensor bright = degrade_dn(Tensor(Shape{1, 3, 30, 30}, 0.99f), 7);
    for (float v : bright.data()) {
        ASSERT_GE(v, 0.0f);
        ASSERT_LE(v, 1.0f);
    }
}

TEST(Degrade, ModeNames) {
    for (Degradation d : {Degradation::BI, Degradation::BD, Degradation::DN}) {
        EXPECT_EQ(parse_degradation(to_string(d)), d);
    }
    EXPECT_THROW(parse_degradation("jpeg"), ConfigError);
}

TEST(RotateFlip, HandWrittenExampleAndGroupLaws) {
    // [[1 2 3]    one counter-clockwise turn   [[3 6]
    //  [4 5 6]]                                 [2 5]
    //                                           [1 4]]
    const Tensor x(Shape{1, 1, 2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
    const Tensor r = rotate_flip(x, 1, false);
    EXPECT_EQ(max_diff(r, Tensor(Shape{1, 1, 3, 2}, std::vector<float>{3, 6, 2, 5, 1, 4})), 0.0);
    EXPECT_EQ(max_diff(rotate_flip(x, 0, true), Tensor(Shape{1, 1, 2, 3}, std::vector<float>{3, 2, 1, 6, 5, 4})), 0.0);
    const Tensor y = random_tensor<float>(Shape{1, 3, 5, 7}, 6);
    EXPECT_EQ(max_diff(rotate_flip(y, 4, false), y), 0.0);
    EXPECT_EQ(max_diff(rotate_flip(rotate_flip(y, 0, true), 0, true), y), 0.0);
    EXPECT_EQ(max_diff(rotate_flip(rotate_flip(y, 1, false), 3, false), y), 0.0);
}

TEST(Patches, CountZeroAndErrors) {
    const Tensor hr(Shape{1, 3, 64, 64});
    const Tensor lr(Shape{1, 3, 32, 32});
    EXPECT_TRUE(extract_patches(hr, lr, 2, 16, 0, 1, true).empty());
    EXPECT_THROW(extract_patches(hr, lr, 2, 33, 1, 1, false), DataError);
    EXPECT_THROW(extract_patches(hr, Tensor(Shape{1, 3, 31, 32}), 2, 16, 1, 1, false), DataError);
    EXPECT_THROW(extract_patches(hr, lr, 2, 16, -1, 1, false), ConfigError);
}

TEST(Patches, AlignedDeterministicAndAugmentedConsistently) {
    const Tensor hr = random_tensor<float>(Shape{1, 3, 60, 48}, 8, 0.0, 1.0);
    const Tensor lr = degrade_bi(hr, 3);
    const auto plain = extract_patches(hr, lr, 3, 8, 12, 9, false);
    ASSERT_EQ(plain.size(), 12u);
    for (const auto& p : plain) {
        EXPECT_EQ(p.lr.shape(), (Shape{1, 3, 8, 8}));
        EXPECT_EQ(p.hr.shape(), (Shape{1, 3, 24, 24}));
        EXPECT_EQ(p.hr.at(0, 1, 0, 0), hr.at(0, 1, 3 * p.lr_y, 3 * p.lr_x));
        EXPECT_EQ(max_diff(p.lr, crop(lr, p.lr_y, p.lr_x, 8, 8)), 0.0);
        EXPECT_EQ(max_diff(p.hr, crop(hr, 3 * p.lr_y, 3 * p.lr_x, 24, 24)), 0.0);
    }
    const auto again = extract_patches(hr, lr, 3, 8, 12, 9, false);
    for (std::size_t i = 0; i < plain.size(); ++i) {
        EXPECT_EQ(plain[i].lr_y, again[i].lr_y);
        EXPECT_EQ(plain[i].lr_x, again[i].lr_x);
    }

    const auto aug = extract_patches(hr, lr, 3, 8, 40, 10, true);
    bool any_turned = false;
    for (const auto& p : aug) {
        any_turned = any_turned || p.quarter_turns != 0 || p.flip;
        const Tensor hr_crop = crop(hr, 3 * p.lr_y, 3 * p.lr_x, 24, 24);
        const Tensor lr_crop = crop(lr, p.lr_y, p.lr_x, 8, 8);
        EXPECT_EQ(max_diff(p.hr, rotate_flip(hr_crop, p.quarter_turns, p.flip)), 0.0);
        EXPECT_EQ(max_diff(p.lr, rotate_flip(lr_crop, p.quarter_turns, p.flip)), 0.0);
        // Undoing the transform recovers the original crops.
        const Tensor undo = rotate_flip(rotate_flip(p.hr, 0, p.flip), 4 - p.quarter_turns, false);
        EXPECT_EQ(max_diff(undo, hr_crop), 0.0);
    }
    EXPECT_TRUE(any_turned);
}

TEST(ImageIo, EightBitConversionAndPngRoundTrip) {
    EXPECT_EQ(to_8bit(0.0f), 0);
    EXPECT_EQ(to_8bit(1.0f), 255);
    EXPECT_EQ(to_8bit(1.7f), 255);
    EXPECT_EQ(to_8bit(-0.3f), 0);
    EXPECT_EQ(to_8bit(0.5f), 128);
    EXPECT_EQ(to_8bit(100.4f / 255.0f), 100);

    Tensor img(Shape{1, 3, 5, 7});
    for (std::size_t i = 0; i < img.numel(); ++i) {
        img[i] = static_cast<float>((i * 37) % 256) / 255.0f;
    }
    const auto path = (std::filesystem::temp_directory_path() / "lsr_degrade_test.png").string();
    write_png(path, img);
    const Tensor back = read_png(path);
    EXPECT_EQ(back.shape(), img.shape());
    EXPECT_LE(max_diff(back, img), 1e-7);
    EXPECT_THROW(read_png(path + ".missing"), DataError);
}
