// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "lsr/error.hpp"
#include "lsr/metrics.hpp"
#include "oracles.hpp"

using namespace lsr;
using lsr::testing::random_tensor;

namespace {

Tensor64 luma(int h, int w, double v) {
    return Tensor64(Shape{1, 1, h, w}, v);
}

Tensor64 random_luma(int h, int w, std::uint64_t seed) {
    return random_tensor<double>(Shape{1, 1, h, w}, seed, 0.0, 255.0);
}

/// Direct windowed sums at every valid position with the 2-D Gaussian.
double ssim_oracle(const Tensor64& a, const Tensor64& b) {
    const int win = 11;
    double g[11][11];
    double norm = 0.0;
    for (int i = 0; i < win; ++i) {
        for (int j = 0; j < win; ++j) {
            const double di = i - 5;
            const double dj = j - 5;
            g[i][j] = std::exp(-(di * di + dj * dj) / (2 * 1.5 * 1.5));
            norm += g[i][j];
        }
    }
    const double c1 = (0.01 * 255) * (0.01 * 255);
    const double c2 = (0.03 * 255) * (0.03 * 255);
    double total = 0.0;
    int count = 0;
    for (int y = 0; y + win <= a.h(); ++y) {
        for (int x = 0; x + win <= a.w(); ++x) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (int i = 0; i < win; ++i) {
                for (int j = 0; j < win; ++j) {
                    const double wgt = g[i][j] / norm;
                    const double va = a.at(0, 0, y + i, x + j);
                    const double vb = b.at(0, 0, y + i, x + j);
                    ma += wgt * va;
                    mb += wgt * vb;
                    saa += wgt * va * va;
                    sbb += wgt * vb * vb;
                    sab += wgt * va * vb;
                }
            }
            const double va = saa - ma * ma;
            const double vb = sbb - mb * mb;
            const double cov = sab - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    }
    return total / count;
}

}  // namespace

TEST(Luma, FormulaValues) {
    const Tensor rgb(Shape{1, 3, 1, 3}, std::vector<float>{0, 1, 0, 0, 1, 1, 0, 1, 0});
    const Tensor64 y = rgb_to_y(rgb);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 3}));
    EXPECT_NEAR(y[0], 16.0, 1e-9);
    EXPECT_NEAR(y[1], 235.0, 1e-5);
    EXPECT_NEAR(y[2], 144.553, 1e-5);
    EXPECT_THROW(rgb_to_y(Tensor(Shape{1, 1, 4, 4})), DimensionError);
}

TEST(Psnr, SentinelZeroDbAndUnitError) {
    const Tensor64 a = random_luma(8, 8, 1);
    EXPECT_EQ(psnr(a, a), kPsnrIdentical);
    EXPECT_TRUE(std::isinf(psnr(a, a)));
    EXPECT_NEAR(psnr(luma(1, 1, 0.0), luma(1, 1, 255.0)), 0.0, 1e-12);
    Tensor64 b = a;
    for (auto& v : b.data()) {
        v += 1.0;
    }
    EXPECT_NEAR(psnr(a, b), 48.1308, 1e-4);
    EXPECT_NEAR(psnr(a, b), 20.0 * std::log10(255.0), 1e-9);
}

TEST(Psnr, SymmetricAndStrictlyDecreasingInError) {
    const Tensor64 a = random_luma(12, 10, 2);
    const Tensor64 b = random_luma(12, 10, 3);
    EXPECT_DOUBLE_EQ(psnr(a, b), psnr(b, a));
    double last = kPsnrIdentical;
    for (double e : {0.5, 1.0, 2.0, 4.0, 16.0}) {
        Tensor64 c = a;
        for (auto& v : c.data()) {
            v += e;
        }
        const double p = psnr(a, c);
        EXPECT_LT(p, last);
        last = p;
    }
    EXPECT_THROW(psnr(a, random_luma(12, 11, 4)), DimensionError);
}

TEST(Ssim, IdenticalIsExactlyOne) {
    for (std::uint64_t seed : {5u, 6u, 7u}) {
        const Tensor64 a = random_luma(20, 17, seed);
        EXPECT_EQ(ssim(a, a), 1.0);
    }
    EXPECT_EQ(ssim(luma(11, 11, 3.0), luma(11, 11, 3.0)), 1.0);
}

TEST(Ssim, ConstantImagesMatchClosedForm) {
    const double c1 = (0.01 * 255) * (0.01 * 255);
    for (auto [m1, m2] : std::vector<std::pair<double, double>>{{100, 110}, {0, 255}, {30, 31}}) {
        const double expect = (2 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1);
        EXPECT_NEAR(ssim(luma(16, 16, m1), luma(16, 16, m2)), expect, 1e-12);
    }
}

TEST(Ssim, MatchesDirectWindowOracle) {
    for (std::uint64_t seed : {8u, 9u}) {
        const Tensor64 a = random_luma(19, 23, seed);
        Tensor64 b = a;
        const Tensor64 noise = random_tensor<double>(a.shape(), seed + 100, -40.0, 40.0);
        for (std::size_t i = 0; i < b.numel(); ++i) {
            b[i] += noise[i];
        }
        EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-6);
        EXPECT_DOUBLE_EQ(ssim(a, b), ssim(b, a));
    }
}

TEST(Ssim, NegatedPatternIsNegative) {
    Tensor64 a(Shape{1, 1, 16, 16});
    Tensor64 b(Shape{1, 1, 16, 16});
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            const double p = ((x + y) % 2 == 0 ? 100.0 : -100.0);
            a.at(0, 0, y, x) = 127.5 + p;
            b.at(0, 0, y, x) = 127.5 - p;
        }
    }
    const double s = ssim(a, b);
    EXPECT_LT(s, 0.0);
    EXPECT_NEAR(s, ssim_oracle(a, b), 1e-9);
    EXPECT_THROW(ssim(luma(10, 30, 1.0), luma(10, 30, 1.0)), DimensionError);
}

TEST(Shave, BorderCorruptionInsideShaveIsIgnored) {
    const Tensor64 a = random_luma(30, 30, 10);
    Tensor64 b = random_luma(30, 30, 11);
    for (std::size_t i = 0; i < b.numel(); ++i) {
        b[i] = 0.5 * (a[i] + b[i]);
    }
    Tensor64 corrupted = b;
    for (int y = 0; y < 30; ++y) {
        for (int x = 0; x < 30; ++x) {
            if (y < 2 || x < 2 || y >= 28 || x >= 28) {
                corrupted.at(0, 0, y, x) = 255.0 - corrupted.at(0, 0, y, x);
            }
        }
    }
    const MetricConfig cfg = MetricConfig::for_scale(3);
    EXPECT_EQ(cfg.shave, 3);
    EXPECT_EQ(psnr(a, b, cfg), psnr(a, corrupted, cfg));
    EXPECT_EQ(ssim(a, b, cfg), ssim(a, corrupted, cfg));
    EXPECT_NE(psnr(a, b), psnr(a, corrupted));
    EXPECT_EQ(shave_border(a, 3).shape(), (Shape{1, 1, 24, 24}));
    EXPECT_THROW(shave_border(a, 15), DimensionError);
}

TEST(EvaluatePair, UsesLumaAndFormatsCsv) {
    const Tensor hr = random_tensor<float>(Shape{1, 3, 24, 24}, 12, 0.0, 1.0);
    Tensor sr = hr;
    for (auto& v : sr.data()) {
        v = std::min(1.0f, v + 1.0f / 255.0f);
    }
    const auto same = evaluate_pair(hr, hr, MetricConfig::for_scale(2), "same.png");
    EXPECT_TRUE(std::isinf(same.psnr_db));
    EXPECT_EQ(same.ssim, 1.0);
    const auto row = evaluate_pair(sr, hr, MetricConfig::for_scale(2), "a.png");
    EXPECT_NEAR(row.psnr_db, psnr(rgb_to_y(sr), rgb_to_y(hr), MetricConfig::for_scale(2)), 1e-12);
    const std::string csv = metrics_csv({same, MetricRow{"b.png", 31.25, 0.5}});
    EXPECT_EQ(csv, "file,psnr_db,ssim\nsame.png,inf,1.000000\nb.png,31.2500,0.500000\n");
}
