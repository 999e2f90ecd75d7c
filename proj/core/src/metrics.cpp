// SPDX-License-Identifier: Apache-2.0
#include "lsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "lsr/degrade.hpp"
#include "lsr/error.hpp"

namespace lsr {

Tensor64 rgb_to_y(const Tensor& rgb) {
    const Shape& s = rgb.shape();
    if (s.c != 3) {
        throw DimensionError("luma conversion needs 3 channels, got " + std::to_string(s.c));
    }
    Tensor64 y(Shape{s.n, 1, s.h, s.w});
    for (int n = 0; n < s.n; ++n) {
        const float* r = rgb.plane(n, 0);
        const float* g = rgb.plane(n, 1);
        const float* b = rgb.plane(n, 2);
        double* dst = y.plane(n, 0);
        for (std::size_t i = 0; i < s.plane(); ++i) {
            dst[i] = kLumaOffset + kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i];
        }
    }
    return y;
}

Tensor64 shave_border(const Tensor64& image, int shave) {
    const Shape& s = image.shape();
    if (shave < 0 || 2 * shave >= std::min(s.h, s.w)) {
        throw DimensionError("shave " + std::to_string(shave) + " leaves nothing of a " + std::to_string(s.h) + "x" +
                             std::to_string(s.w) + " image");
    }
    if (shave == 0) {
        return image;
    }
    const int h = s.h - 2 * shave;
    const int w = s.w - 2 * shave;
    Tensor64 out(Shape{s.n, s.c, h, w});
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    out.at(n, c, y, x) = image.at(n, c, y + shave, x + shave);
                }
            }
        }
    }
    return out;
}

namespace {

void check_same(const Tensor64& a, const Tensor64& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("metric inputs differ in shape: " + a.shape().str() + " vs " + b.shape().str());
    }
}

/// Valid-region separable filtering with the outer product of `taps`.
Tensor64 filter_valid(const Tensor64& x, const std::vector<double>& taps) {
    const Shape& s = x.shape();
    const int k = static_cast<int>(taps.size());
    const int oh = s.h - k + 1;
    const int ow = s.w - k + 1;
    Tensor64 out(Shape{s.n, s.c, oh, ow});
    std::vector<double> rows(static_cast<std::size_t>(s.h) * ow);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const double* src = x.plane(n, c);
            for (int y = 0; y < s.h; ++y) {
                for (int xo = 0; xo < ow; ++xo) {
                    double acc = 0.0;
                    for (int t = 0; t < k; ++t) {
                        acc += taps[t] * src[static_cast<std::size_t>(y) * s.w + xo + t];
                    }
                    rows[static_cast<std::size_t>(y) * ow + xo] = acc;
                }
            }
            double* dst = out.plane(n, c);
            for (int y = 0; y < oh; ++y) {
                for (int xo = 0; xo < ow; ++xo) {
                    double acc = 0.0;
                    for (int t = 0; t < k; ++t) {
                        acc += taps[t] * rows[static_cast<std::size_t>(y + t) * ow + xo];
                    }
                    dst[static_cast<std::size_t>(y) * ow + xo] = acc;
                }
            }
        }
    }
    return out;
}

Tensor64 product(const Tensor64& a, const Tensor64& b) {
    Tensor64 out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) {
        out[i] = a[i] * b[i];
    }
    return out;
}

}  // namespace

double psnr(const Tensor64& a, const Tensor64& b, const MetricConfig& cfg) {
    check_same(a, b);
    const Tensor64 sa = shave_border(a, cfg.shave);
    const Tensor64 sb = shave_border(b, cfg.shave);
    double sse = 0.0;
    for (std::size_t i = 0; i < sa.numel(); ++i) {
        const double d = sa[i] - sb[i];
        sse += d * d;
    }
    if (sse == 0.0) {
        return kPsnrIdentical;
    }
    const double mse = sse / static_cast<double>(sa.numel());
    return 10.0 * std::log10(cfg.peak * cfg.peak / mse);
}

double ssim(const Tensor64& a, const Tensor64& b, const MetricConfig& cfg) {
    check_same(a, b);
    const Tensor64 x = shave_border(a, cfg.shave);
    const Tensor64 y = shave_border(b, cfg.shave);
    if (x.h() < cfg.window || x.w() < cfg.window) {
        throw DimensionError("SSIM needs at least " + std::to_string(cfg.window) + " pixels per side after shaving, got " +
                             std::to_string(x.h()) + "x" + std::to_string(x.w()));
    }
    const auto taps = gaussian_taps(cfg.window, cfg.sigma);
    const double c1 = (cfg.k1 * cfg.peak) * (cfg.k1 * cfg.peak);
    const double c2 = (cfg.k2 * cfg.peak) * (cfg.k2 * cfg.peak);

    const Tensor64 mu_x = filter_valid(x, taps);
    const Tensor64 mu_y = filter_valid(y, taps);
    const Tensor64 exx = filter_valid(product(x, x), taps);
    const Tensor64 eyy = filter_valid(product(y, y), taps);
    const Tensor64 exy = filter_valid(product(x, y), taps);

    double total = 0.0;
    for (std::size_t i = 0; i < mu_x.numel(); ++i) {
        const double mx = mu_x[i];
        const double my = mu_y[i];
        const double vx = exx[i] - mx * mx;
        const double vy = eyy[i] - my * my;
        const double cov = exy[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mu_x.numel());
}

MetricRow evaluate_pair(const Tensor& sr, const Tensor& hr, const MetricConfig& cfg, std::string file) {
    if (sr.shape() != hr.shape()) {
        throw DimensionError("SR " + sr.shape().str() + " and HR " + hr.shape().str() + " differ in shape");
    }
    const Tensor64 ys = rgb_to_y(sr);
    const Tensor64 yh = rgb_to_y(hr);
    return {std::move(file), psnr(ys, yh, cfg), ssim(ys, yh, cfg)};
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
    std::ostringstream out;
    out << "file,psnr_db,ssim\n";
    for (const auto& r : rows) {
        out << r.file << ",";
        if (std::isinf(r.psnr_db)) {
            out << "inf";
        } else {
            out << std::fixed << std::setprecision(4) << r.psnr_db;
        }
        out << "," << std::fixed << std::setprecision(6) << r.ssim << "\n";
        out.unsetf(std::ios::floatfield);
    }
    return out.str();
}

}  // namespace lsr
