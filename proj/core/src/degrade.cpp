// SPDX-License-Identifier: Apache-2.0
#include "lsr/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lsr/error.hpp"

namespace lsr {

const char* to_string(Degradation d) {
    switch (d) {
        case Degradation::BI:
            return "bi";
        case Degradation::BD:
            return "bd";
        case Degradation::DN:
            return "dn";
    }
    return "?";
}

Degradation parse_degradation(const std::string& text) {
    if (text == "bi") {
        return Degradation::BI;
    }
    if (text == "bd") {
        return Degradation::BD;
    }
    if (text == "dn") {
        return Degradation::DN;
    }
    throw ConfigError("unknown degradation '" + text + "' (expected bi, bd or dn)");
}

double keys_cubic(double x, double a) {
    const double t = std::abs(x);
    if (t <= 1.0) {
        return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    }
    if (t < 2.0) {
        return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    }
    return 0.0;
}

namespace {

struct Taps {
    int index[4];
    double weight[4];
};

std::vector<Taps> bicubic_taps(int in, int out, double ratio) {
    std::vector<Taps> taps(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
        const double src = (o + 0.5) / ratio - 0.5;
        const int base = static_cast<int>(std::floor(src));
        for (int t = 0; t < 4; ++t) {
            const int j = base - 1 + t;
            taps[o].index[t] = std::clamp(j, 0, in - 1);
            taps[o].weight[t] = keys_cubic(src - j);
        }
    }
    return taps;
}

void check_factor(int up, int down) {
    const bool ok = (up == 1 && down >= 1 && down <= 4) || (down == 1 && up >= 1 && up <= 4);
    if (!ok) {
        throw ConfigError("unsupported resize factor " + std::to_string(up) + "/" + std::to_string(down));
    }
}

Tensor clamped(Tensor t) {
    for (auto& v : t.data()) {
        v = std::clamp(v, 0.0f, 1.0f);
    }
    return t;
}

}  // namespace

Tensor bicubic_resize(const Tensor& image, int up, int down) {
    check_factor(up, down);
    const Shape& s = image.shape();
    if (s.h % down != 0 || s.w % down != 0) {
        throw DimensionError("image " + std::to_string(s.h) + "x" + std::to_string(s.w) + " not divisible by " +
                             std::to_string(down));
    }
    if (up == 1 && down == 1) {
        return image;
    }
    const int oh = s.h * up / down;
    const int ow = s.w * up / down;
    const double ratio = static_cast<double>(up) / static_cast<double>(down);
    const auto tx = bicubic_taps(s.w, ow, ratio);
    const auto ty = bicubic_taps(s.h, oh, ratio);

    Tensor out(Shape{s.n, s.c, oh, ow});
    std::vector<double> rows(static_cast<std::size_t>(s.h) * ow);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const float* src = image.plane(n, c);
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < ow; ++x) {
                    double acc = 0.0;
                    for (int t = 0; t < 4; ++t) {
                        acc += tx[x].weight[t] * src[static_cast<std::size_t>(y) * s.w + tx[x].index[t]];
                    }
                    rows[static_cast<std::size_t>(y) * ow + x] = acc;
                }
            }
            float* dst = out.plane(n, c);
            for (int y = 0; y < oh; ++y) {
                for (int x = 0; x < ow; ++x) {
                    double acc = 0.0;
                    for (int t = 0; t < 4; ++t) {
                        acc += ty[y].weight[t] * rows[static_cast<std::size_t>(ty[y].index[t]) * ow + x];
                    }
                    dst[static_cast<std::size_t>(y) * ow + x] = static_cast<float>(acc);
                }
            }
        }
    }
    return out;
}

std::vector<double> gaussian_taps(int size, double sigma) {
    if (size < 1 || size % 2 == 0 || !(sigma > 0.0)) {
        throw ConfigError("Gaussian kernel needs an odd size and positive sigma");
    }
    std::vector<double> taps(static_cast<std::size_t>(size));
    const int half = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - half;
        taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += taps[i];
    }
    for (auto& t : taps) {
        t /= sum;
    }
    return taps;
}

Tensor gaussian_blur(const Tensor& image, int size, double sigma) {
    const auto taps = gaussian_taps(size, sigma);
    const int half = size / 2;
    const Shape& s = image.shape();
    Tensor out(s);
    std::vector<double> rows(s.plane());
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const float* src = image.plane(n, c);
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x) {
                    double acc = 0.0;
                    for (int t = 0; t < size; ++t) {
                        const int xx = std::clamp(x + t - half, 0, s.w - 1);
                        acc += taps[t] * src[static_cast<std::size_t>(y) * s.w + xx];
                    }
                    rows[static_cast<std::size_t>(y) * s.w + x] = acc;
                }
            }
            float* dst = out.plane(n, c);
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x) {
                    double acc = 0.0;
                    for (int t = 0; t < size; ++t) {
                        const int yy = std::clamp(y + t - half, 0, s.h - 1);
                        acc += taps[t] * rows[static_cast<std::size_t>(yy) * s.w + x];
                    }
                    dst[static_cast<std::size_t>(y) * s.w + x] = static_cast<float>(acc);
                }
            }
        }
    }
    return out;
}

Tensor crop_to_multiple(const Tensor& image, int multiple) {
    const Shape& s = image.shape();
    const int h = s.h - s.h % multiple;
    const int w = s.w - s.w % multiple;
    if (h == s.h && w == s.w) {
        return image;
    }
    if (h == 0 || w == 0) {
        throw DataError("image smaller than the scale factor");
    }
    Tensor out(Shape{s.n, s.c, h, w});
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < h; ++y) {
                std::copy_n(image.plane(n, c) + static_cast<std::size_t>(y) * s.w, w,
                            out.plane(n, c) + static_cast<std::size_t>(y) * w);
            }
        }
    }
    return out;
}

Tensor degrade_bi(const Tensor& hr, int scale) {
    return clamped(bicubic_resize(hr, 1, scale));
}

Tensor degrade_bd(const Tensor& hr, int scale) {
    return clamped(bicubic_resize(gaussian_blur(hr), 1, scale));
}

Tensor degrade_dn(const Tensor& hr, std::uint64_t seed, int scale, double sigma) {
    Tensor lr = bicubic_resize(hr, 1, scale);
    if (sigma > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, sigma);
        for (auto& v : lr.data()) {
            v = static_cast<float>(v + noise(rng));
        }
    }
    return clamped(std::move(lr));
}

Tensor degrade(const Tensor& hr, Degradation mode, int scale, std::uint64_t seed) {
    const Tensor cropped = crop_to_multiple(hr, scale);
    switch (mode) {
        case Degradation::BI:
            return degrade_bi(cropped, scale);
        case Degradation::BD:
            return degrade_bd(cropped, scale);
        case Degradation::DN:
            return degrade_dn(cropped, seed, scale);
    }
    throw ConfigError("unknown degradation");
}

Tensor rotate_flip(const Tensor& image, int quarter_turns, bool flip) {
    Tensor cur = image;
    for (int t = 0; t < ((quarter_turns % 4) + 4) % 4; ++t) {
        const Shape& s = cur.shape();
        Tensor next(Shape{s.n, s.c, s.w, s.h});
        for (int n = 0; n < s.n; ++n) {
            for (int c = 0; c < s.c; ++c) {
                for (int y = 0; y < s.w; ++y) {
                    for (int x = 0; x < s.h; ++x) {
                        next.at(n, c, y, x) = cur.at(n, c, x, s.w - 1 - y);
                    }
                }
            }
        }
        cur = std::move(next);
    }
    if (flip) {
        const Shape& s = cur.shape();
        Tensor next(s);
        for (int n = 0; n < s.n; ++n) {
            for (int c = 0; c < s.c; ++c) {
                for (int y = 0; y < s.h; ++y) {
                    for (int x = 0; x < s.w; ++x) {
                        next.at(n, c, y, x) = cur.at(n, c, y, s.w - 1 - x);
                    }
                }
            }
        }
        cur = std::move(next);
    }
    return cur;
}

namespace {

Tensor crop(const Tensor& image, int y0, int x0, int h, int w) {
    const Shape& s = image.shape();
    Tensor out(Shape{s.n, s.c, h, w});
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < h; ++y) {
                std::copy_n(image.plane(n, c) + static_cast<std::size_t>(y0 + y) * s.w + x0, w,
                            out.plane(n, c) + static_cast<std::size_t>(y) * w);
            }
        }
    }
    return out;
}

}  // namespace

std::vector<PatchPair> extract_patches(const Tensor& hr, const Tensor& lr, int scale, int lr_size, int count,
                                       std::uint64_t seed, bool augment) {
    const Shape& hs = hr.shape();
    const Shape& ls = lr.shape();
    if (hs.h != ls.h * scale || hs.w != ls.w * scale || hs.c != ls.c || hs.n != ls.n) {
        throw DataError("LR " + ls.str() + " is not HR " + hs.str() + " downscaled by " + std::to_string(scale));
    }
    if (count < 0 || lr_size < 1) {
        throw ConfigError("patch count must be non-negative and patch size positive");
    }
    std::vector<PatchPair> out;
    if (count == 0) {
        return out;
    }
    if (ls.h < lr_size || ls.w < lr_size) {
        throw DataError("LR image " + std::to_string(ls.h) + "x" + std::to_string(ls.w) + " smaller than patch " +
                        std::to_string(lr_size));
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick_y(0, ls.h - lr_size);
    std::uniform_int_distribution<int> pick_x(0, ls.w - lr_size);
    std::uniform_int_distribution<int> pick_turn(0, 3);
    std::uniform_int_distribution<int> pick_flip(0, 1);
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        PatchPair p;
        p.lr_y = pick_y(rng);
        p.lr_x = pick_x(rng);
        if (augment) {
            p.quarter_turns = pick_turn(rng);
            p.flip = pick_flip(rng) == 1;
        }
        p.lr = rotate_flip(crop(lr, p.lr_y, p.lr_x, lr_size, lr_size), p.quarter_turns, p.flip);
        p.hr = rotate_flip(crop(hr, p.lr_y * scale, p.lr_x * scale, lr_size * scale, lr_size * scale),
                           p.quarter_turns, p.flip);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace lsr
