// SPDX-License-Identifier: Apache-2.0
#include "lsr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lsr/error.hpp"

namespace lsr {

std::string Shape::str() const {
    std::ostringstream os;
    os << '(' << n << ", " << c << ", " << h << ", " << w << ')';
    return os.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(shape) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
        throw DimensionError("negative extent in shape " + shape.str());
    }
    data_.assign(shape.numel(), fill);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape.numel()) {
        throw DimensionError("data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape.str());
    }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
    if (shape.numel() != numel()) {
        throw DimensionError("cannot reshape " + shape_.str() + " to " + shape.str());
    }
    return BasicTensor(shape, data_);
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void ConvParams<T>::validate() const {
    const Shape& ws = weight.shape();
    if (ws.h != ws.w) {
        throw DimensionError("conv kernel must be square, got " + ws.str());
    }
    if (ws.h % 2 == 0) {
        throw DimensionError("conv kernel size must be odd, got " + std::to_string(ws.h));
    }
    if (geometry.groups < 1 || ws.n % geometry.groups != 0) {
        throw DimensionError("output channels " + std::to_string(ws.n) +
                             " not divisible by groups " + std::to_string(geometry.groups));
    }
    if (bias.numel() != static_cast<std::size_t>(ws.n)) {
        throw DimensionError("bias length " + std::to_string(bias.numel()) +
                             " does not match output channels " + std::to_string(ws.n));
    }
    if (geometry.stride < 1 || geometry.padding < 0) {
        throw DimensionError("invalid stride/padding");
    }
}

int conv_output_extent(int in, int kernel, int stride, int padding) {
    const int span = in + 2 * padding - kernel;
    if (span < 0) {
        return 0;
    }
    return span / stride + 1;
}

namespace {

// Output columns ox whose input column ox * stride + tap - padding is inside [0, in_w).
struct ColumnRange {
    int lo;
    int hi;  // inclusive
};

ColumnRange valid_columns(int in_w, int out_w, int tap, int stride, int padding) {
    const int lo_num = padding - tap;
    const int lo = lo_num <= 0 ? 0 : (lo_num + stride - 1) / stride;
    const int hi_num = in_w - 1 + padding - tap;
    const int hi = hi_num < 0 ? -1 : std::min(out_w - 1, hi_num / stride);
    return {lo, hi};
}

template <typename T>
void check_conv_shapes(const Shape& xs, const Shape& ws, ConvGeometry g) {
    if (g.groups < 1 || g.stride < 1 || g.padding < 0) {
        throw DimensionError("invalid convolution geometry");
    }
    if (xs.c != ws.c * g.groups) {
        throw DimensionError("channel axis: input has " + std::to_string(xs.c) +
                             " channels, kernel expects " + std::to_string(ws.c * g.groups));
    }
    if (ws.n % g.groups != 0) {
        throw DimensionError("output channel axis: " + std::to_string(ws.n) +
                             " not divisible by groups " + std::to_string(g.groups));
    }
    if (ws.h != ws.w) {
        throw DimensionError("kernel axes: non-square kernel " + ws.str());
    }
    if (conv_output_extent(xs.h, ws.h, g.stride, g.padding) < 1) {
        throw DimensionError("height axis: input height " + std::to_string(xs.h) +
                             " too small for kernel " + std::to_string(ws.h));
    }
    if (conv_output_extent(xs.w, ws.w, g.stride, g.padding) < 1) {
        throw DimensionError("width axis: input width " + std::to_string(xs.w) +
                             " too small for kernel " + std::to_string(ws.w));
    }
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const ConvParams<T>& p) {
    p.validate();
    return conv2d(x, p.weight, &p.bias, p.geometry);
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                      const std::type_identity_t<BasicTensor<T>>* bias, ConvGeometry g) {
    const Shape& xs = x.shape();
    const Shape& ws = weight.shape();
    check_conv_shapes<T>(xs, ws, g);
    if (bias != nullptr && bias->numel() != static_cast<std::size_t>(ws.n)) {
        throw DimensionError("bias length does not match output channels");
    }
    const int k = ws.h;
    const int s = g.stride;
    const int pad = g.padding;
    const int ho = conv_output_extent(xs.h, k, s, pad);
    const int wo = conv_output_extent(xs.w, k, s, pad);
    const int cin_g = ws.c;
    const int dout_g = ws.n / g.groups;

    BasicTensor<T> out(Shape{xs.n, ws.n, ho, wo});
    std::vector<double> acc(static_cast<std::size_t>(ho) * wo);
    std::vector<ColumnRange> cols(k);
    for (int kj = 0; kj < k; ++kj) {
        cols[kj] = valid_columns(xs.w, wo, kj, s, pad);
    }

    for (int n = 0; n < xs.n; ++n) {
        for (int d = 0; d < ws.n; ++d) {
            const int grp = d / dout_g;
            std::fill(acc.begin(), acc.end(), bias ? static_cast<double>((*bias)[d]) : 0.0);
            for (int cl = 0; cl < cin_g; ++cl) {
                const T* in = x.plane(n, grp * cin_g + cl);
                const T* wk = weight.ptr() + (static_cast<std::size_t>(d) * cin_g + cl) * k * k;
                for (int ki = 0; ki < k; ++ki) {
                    for (int kj = 0; kj < k; ++kj) {
                        const double wv = wk[ki * k + kj];
                        if (wv == 0.0) {
                            continue;
                        }
                        const auto [lo, hi] = cols[kj];
                        for (int oy = 0; oy < ho; ++oy) {
                            const int iy = oy * s + ki - pad;
                            if (iy < 0 || iy >= xs.h) {
                                continue;
                            }
                            const T* row = in + static_cast<std::size_t>(iy) * xs.w;
                            double* arow = acc.data() + static_cast<std::size_t>(oy) * wo;
                            if (s == 1) {
                                const int shift = kj - pad;
                                for (int ox = lo; ox <= hi; ++ox) {
                                    arow[ox] += wv * static_cast<double>(row[ox + shift]);
                                }
                            } else {
                                for (int ox = lo; ox <= hi; ++ox) {
                                    arow[ox] += wv * static_cast<double>(row[ox * s + kj - pad]);
                                }
                            }
                        }
                    }
                }
            }
            T* dst = out.plane(n, d);
            for (std::size_t i = 0; i < acc.size(); ++i) {
                dst[i] = static_cast<T>(acc[i]);
            }
        }
    }
    return out;
}

template <typename T>
BasicTensor<T> conv2d_grad_input(const BasicTensor<T>& dy, const BasicTensor<T>& weight,
                                 ConvGeometry g, Shape input_shape) {
    const Shape& ws = weight.shape();
    const int k = ws.h;
    const int s = g.stride;
    const int pad = g.padding;
    const int ho = dy.h();
    const int wo = dy.w();
    const int cin_g = ws.c;
    const int dout_g = ws.n / g.groups;

    BasicTensor<T> dx(input_shape);
    std::vector<double> acc(input_shape.plane());
    std::vector<ColumnRange> cols(k);
    for (int kj = 0; kj < k; ++kj) {
        cols[kj] = valid_columns(input_shape.w, wo, kj, s, pad);
    }
    for (int n = 0; n < input_shape.n; ++n) {
        for (int c = 0; c < input_shape.c; ++c) {
            const int grp = c / cin_g;
            const int cl = c % cin_g;
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int d = grp * dout_g; d < (grp + 1) * dout_g; ++d) {
                const T* dyp = dy.plane(n, d);
                const T* wk = weight.ptr() + (static_cast<std::size_t>(d) * cin_g + cl) * k * k;
                for (int ki = 0; ki < k; ++ki) {
                    for (int kj = 0; kj < k; ++kj) {
                        const double wv = wk[ki * k + kj];
                        if (wv == 0.0) {
                            continue;
                        }
                        const auto [lo, hi] = cols[kj];
                        for (int oy = 0; oy < ho; ++oy) {
                            const int iy = oy * s + ki - pad;
                            if (iy < 0 || iy >= input_shape.h) {
                                continue;
                            }
                            const T* dyrow = dyp + static_cast<std::size_t>(oy) * wo;
                            double* arow = acc.data() + static_cast<std::size_t>(iy) * input_shape.w;
                            if (s == 1) {
                                const int shift = kj - pad;
                                for (int ox = lo; ox <= hi; ++ox) {
                                    arow[ox + shift] += wv * static_cast<double>(dyrow[ox]);
                                }
                            } else {
                                for (int ox = lo; ox <= hi; ++ox) {
                                    arow[ox * s + kj - pad] += wv * static_cast<double>(dyrow[ox]);
                                }
                            }
                        }
                    }
                }
            }
            T* dst = dx.plane(n, c);
            for (std::size_t i = 0; i < acc.size(); ++i) {
                dst[i] = static_cast<T>(acc[i]);
            }
        }
    }
    return dx;
}

template <typename T>
BasicTensor<T> conv2d_grad_weight(const BasicTensor<T>& dy, const BasicTensor<T>& x,
                                  ConvGeometry g, Shape weight_shape) {
    const int k = weight_shape.h;
    const int s = g.stride;
    const int pad = g.padding;
    const int ho = dy.h();
    const int wo = dy.w();
    const int cin_g = weight_shape.c;
    const int dout_g = weight_shape.n / g.groups;
    const Shape& xs = x.shape();

    BasicTensor<T> dw(weight_shape);
    std::vector<ColumnRange> cols(k);
    for (int kj = 0; kj < k; ++kj) {
        cols[kj] = valid_columns(xs.w, wo, kj, s, pad);
    }
    for (int d = 0; d < weight_shape.n; ++d) {
        const int grp = d / dout_g;
        for (int cl = 0; cl < cin_g; ++cl) {
            const int c = grp * cin_g + cl;
            for (int ki = 0; ki < k; ++ki) {
                for (int kj = 0; kj < k; ++kj) {
                    const auto [lo, hi] = cols[kj];
                    double sum = 0.0;
                    for (int n = 0; n < xs.n; ++n) {
                        const T* dyp = dy.plane(n, d);
                        const T* xp = x.plane(n, c);
                        for (int oy = 0; oy < ho; ++oy) {
                            const int iy = oy * s + ki - pad;
                            if (iy < 0 || iy >= xs.h) {
                                continue;
                            }
                            const T* dyrow = dyp + static_cast<std::size_t>(oy) * wo;
                            const T* xrow = xp + static_cast<std::size_t>(iy) * xs.w;
                            if (s == 1) {
                                const int shift = kj - pad;
                                for (int ox = lo; ox <= hi; ++ox) {
                                    sum += static_cast<double>(dyrow[ox]) * static_cast<double>(xrow[ox + shift]);
                                }
                            } else {
                                for (int ox = lo; ox <= hi; ++ox) {
                                    sum += static_cast<double>(dyrow[ox]) *
                                           static_cast<double>(xrow[ox * s + kj - pad]);
                                }
                            }
                        }
                    }
                    dw.at(d, cl, ki, kj) = static_cast<T>(sum);
                }
            }
        }
    }
    return dw;
}

template <typename T>
BasicTensor<T> kernel_spatial_sum(const BasicTensor<T>& weight) {
    const Shape& ws = weight.shape();
    BasicTensor<T> out(Shape{ws.n, ws.c, 1, 1});
    for (int d = 0; d < ws.n; ++d) {
        for (int c = 0; c < ws.c; ++c) {
            double sum = 0.0;
            const T* p = weight.plane(d, c);
            for (std::size_t i = 0; i < ws.plane(); ++i) {
                sum += p[i];
            }
            out.at(d, c, 0, 0) = static_cast<T>(sum);
        }
    }
    return out;
}

template <typename T>
BasicTensor<T> pixel_shuffle(const BasicTensor<T>& x, int scale) {
    if (scale < 1) {
        throw DimensionError("pixel_shuffle scale must be positive");
    }
    const Shape& xs = x.shape();
    const int s2 = scale * scale;
    if (xs.c % s2 != 0) {
        throw DimensionError("channel axis: " + std::to_string(xs.c) +
                             " not divisible by scale^2 = " + std::to_string(s2));
    }
    const int oc = xs.c / s2;
    BasicTensor<T> out(Shape{xs.n, oc, xs.h * scale, xs.w * scale});
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < oc; ++c) {
            for (int i = 0; i < scale; ++i) {
                for (int j = 0; j < scale; ++j) {
                    const T* src = x.plane(n, c * s2 + i * scale + j);
                    for (int y = 0; y < xs.h; ++y) {
                        for (int xx = 0; xx < xs.w; ++xx) {
                            out.at(n, c, y * scale + i, xx * scale + j) = src[y * xs.w + xx];
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
BasicTensor<T> pixel_unshuffle(const BasicTensor<T>& x, int scale) {
    if (scale < 1) {
        throw DimensionError("pixel_unshuffle scale must be positive");
    }
    const Shape& xs = x.shape();
    if (xs.h % scale != 0 || xs.w % scale != 0) {
        throw DimensionError("spatial axes " + xs.str() + " not divisible by scale " +
                             std::to_string(scale));
    }
    const int s2 = scale * scale;
    const int h = xs.h / scale;
    const int w = xs.w / scale;
    BasicTensor<T> out(Shape{xs.n, xs.c * s2, h, w});
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            for (int i = 0; i < scale; ++i) {
                for (int j = 0; j < scale; ++j) {
                    T* dst = out.plane(n, c * s2 + i * scale + j);
                    for (int y = 0; y < h; ++y) {
                        for (int xx = 0; xx < w; ++xx) {
                            dst[y * w + xx] = x.at(n, c, y * scale + i, xx * scale + j);
                        }
                    }
                }
            }
        }
    }
    return out;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
    auto axis = [&](int x, int y, const char* name) {
        if (x == y || y == 1) {
            return x;
        }
        if (x == 1) {
            return y;
        }
        throw DimensionError(std::string(name) + " axis: cannot broadcast " + a.str() +
                             " with " + b.str());
    };
    const Shape out{axis(a.n, b.n, "batch"), axis(a.c, b.c, "channel"), axis(a.h, b.h, "height"),
                    axis(a.w, b.w, "width")};
    for (const Shape* s : {&a, &b}) {
        const bool spatial_full = s->h == out.h && s->w == out.w;
        const bool spatial_unit = s->h == 1 && s->w == 1;
        if (!spatial_full && !spatial_unit) {
            throw DimensionError("spatial broadcast of " + s->str() + " to " + out.str() +
                                 " is not supported");
        }
    }
    return out;
}

namespace {

struct Strides {
    std::size_t n, c, h, w;
};

Strides broadcast_strides(const Shape& s) {
    const std::size_t sw = 1;
    const std::size_t sh = static_cast<std::size_t>(s.w);
    const std::size_t sc = sh * s.h;
    const std::size_t sn = sc * s.c;
    return Strides{s.n == 1 ? 0 : sn, s.c == 1 ? 0 : sc, s.h == 1 ? 0 : sh, s.w == 1 ? 0 : sw};
}

template <typename T, typename F>
BasicTensor<T> binary(const BasicTensor<T>& a, const BasicTensor<T>& b, F f) {
    if (a.shape() == b.shape()) {
        BasicTensor<T> out(a.shape());
        for (std::size_t i = 0; i < out.numel(); ++i) {
            out[i] = f(a[i], b[i]);
        }
        return out;
    }
    const Shape os = broadcast_shape(a.shape(), b.shape());
    const Strides sa = broadcast_strides(a.shape());
    const Strides sb = broadcast_strides(b.shape());
    BasicTensor<T> out(os);
    T* dst = out.ptr();
    for (int n = 0; n < os.n; ++n) {
        for (int c = 0; c < os.c; ++c) {
            for (int y = 0; y < os.h; ++y) {
                const T* pa = a.ptr() + n * sa.n + c * sa.c + y * sa.h;
                const T* pb = b.ptr() + n * sb.n + c * sb.c + y * sb.h;
                for (int x = 0; x < os.w; ++x) {
                    *dst++ = f(pa[x * sa.w], pb[x * sb.w]);
                }
            }
        }
    }
    return out;
}

template <typename T, typename F>
BasicTensor<T> unary(const BasicTensor<T>& a, F f) {
    BasicTensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = f(a[i]);
    }
    return out;
}

}  // namespace

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return binary(a, b, [](T x, T y) { return x + y; });
}

template <typename T>
BasicTensor<T> subtract(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return binary(a, b, [](T x, T y) { return x - y; });
}

template <typename T>
BasicTensor<T> multiply(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return binary(a, b, [](T x, T y) { return x * y; });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor) {
    return unary(a, [factor](T x) { return x * factor; });
}

template <typename T>
BasicTensor<T> channel_scale(const BasicTensor<T>& x, const BasicTensor<T>& s) {
    const Shape& ss = s.shape();
    if (ss.h != 1 || ss.w != 1 || ss.c != x.c() || (ss.n != 1 && ss.n != x.n())) {
        throw DimensionError("channel_scale expects (n|1, c, 1, 1) scale, got " + ss.str() +
                             " for input " + x.shape().str());
    }
    return multiply(x, s);
}

template <typename T>
BasicTensor<T> reduce_to_shape(const BasicTensor<T>& grad, const Shape& target) {
    if (grad.shape() == target) {
        return grad;
    }
    const Shape& gs = grad.shape();
    if (broadcast_shape(target, gs) != gs) {
        throw DimensionError("cannot reduce " + gs.str() + " to " + target.str());
    }
    const Strides st = broadcast_strides(target);
    std::vector<double> acc(target.numel(), 0.0);
    const T* src = grad.ptr();
    for (int n = 0; n < gs.n; ++n) {
        for (int c = 0; c < gs.c; ++c) {
            for (int y = 0; y < gs.h; ++y) {
                double* dst = acc.data() + n * st.n + c * st.c + y * st.h;
                for (int x = 0; x < gs.w; ++x) {
                    dst[x * st.w] += *src++;
                }
            }
        }
    }
    return BasicTensor<T>(target, std::vector<T>(acc.begin(), acc.end()));
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
    return unary(x, [](T v) {
        if (v >= T(0)) {
            return T(1) / (T(1) + std::exp(-v));
        }
        const T e = std::exp(v);
        return e / (T(1) + e);
    });
}

template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x, T slope) {
    return unary(x, [slope](T v) { return v >= T(0) ? v : v * slope; });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
    return unary(x, [](T v) { return v > T(0) ? v : T(0); });
}

template <typename T>
BasicTensor<T> channel_softmax(const BasicTensor<T>& x) {
    const Shape& xs = x.shape();
    BasicTensor<T> out(xs);
    const std::size_t plane = xs.plane();
    std::vector<double> fiber(xs.c);
    for (int n = 0; n < xs.n; ++n) {
        for (std::size_t p = 0; p < plane; ++p) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < xs.c; ++c) {
                fiber[c] = x.plane(n, c)[p];
                mx = std::max(mx, fiber[c]);
            }
            double sum = 0.0;
            for (int c = 0; c < xs.c; ++c) {
                fiber[c] = std::exp(fiber[c] - mx);
                sum += fiber[c];
            }
            for (int c = 0; c < xs.c; ++c) {
                out.plane(n, c)[p] = static_cast<T>(fiber[c] / sum);
            }
        }
    }
    return out;
}

template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>> parts) {
    if (parts.empty()) {
        throw ContractError("concat_channels needs at least one tensor");
    }
    const Shape& first = parts.front().shape();
    int channels = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.n != first.n || s.h != first.h || s.w != first.w) {
            throw DimensionError("concat: tensor " + s.str() + " incompatible with " + first.str() +
                                 " outside the channel axis");
        }
        channels += s.c;
    }
    BasicTensor<T> out(Shape{first.n, channels, first.h, first.w});
    const std::size_t plane = first.plane();
    for (int n = 0; n < first.n; ++n) {
        T* dst = out.plane(n, 0);
        for (const auto& p : parts) {
            const std::size_t count = plane * p.c();
            std::copy_n(p.plane(n, 0), count, dst);
            dst += count;
        }
    }
    return out;
}

template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, int begin, int count) {
    if (begin < 0 || count < 0 || begin + count > x.c()) {
        throw DimensionError("channel slice [" + std::to_string(begin) + ", " +
                             std::to_string(begin + count) + ") out of range for " +
                             x.shape().str());
    }
    BasicTensor<T> out(Shape{x.n(), count, x.h(), x.w()});
    const std::size_t plane = x.shape().plane();
    for (int n = 0; n < x.n(); ++n) {
        std::copy_n(x.plane(n, begin), plane * count, out.plane(n, 0));
    }
    return out;
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x) {
    const Shape& xs = x.shape();
    if (xs.h * xs.w == 0) {
        throw DimensionError("global_avg_pool: empty spatial extent " + xs.str());
    }
    BasicTensor<T> out(Shape{xs.n, xs.c, 1, 1});
    const std::size_t plane = xs.plane();
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            const T* p = x.plane(n, c);
            double sum = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
                sum += p[i];
            }
            out.at(n, c, 0, 0) = static_cast<T>(sum / static_cast<double>(plane));
        }
    }
    return out;
}

template <typename T>
BasicTensor<T> channel_mean(const BasicTensor<T>& x) {
    const Shape& xs = x.shape();
    const std::size_t count = static_cast<std::size_t>(xs.n) * xs.plane();
    if (count == 0) {
        throw DimensionError("channel_mean: empty tensor " + xs.str());
    }
    BasicTensor<T> out(Shape{1, xs.c, 1, 1});
    for (int c = 0; c < xs.c; ++c) {
        double sum = 0.0;
        for (int n = 0; n < xs.n; ++n) {
            const T* p = x.plane(n, c);
            for (std::size_t i = 0; i < xs.plane(); ++i) {
                sum += p[i];
            }
        }
        out[c] = static_cast<T>(sum / static_cast<double>(count));
    }
    return out;
}

template <typename T>
BasicTensor<T> max_pool2d(const BasicTensor<T>& x, int kernel, int stride,
                          std::vector<std::size_t>* argmax) {
    const Shape& xs = x.shape();
    const int ho = conv_output_extent(xs.h, kernel, stride, 0);
    const int wo = conv_output_extent(xs.w, kernel, stride, 0);
    if (ho < 1 || wo < 1) {
        throw DimensionError("max_pool2d: spatial extent " + xs.str() + " smaller than kernel " +
                             std::to_string(kernel));
    }
    BasicTensor<T> out(Shape{xs.n, xs.c, ho, wo});
    if (argmax) {
        argmax->assign(out.numel(), 0);
    }
    std::size_t o = 0;
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox, ++o) {
                    std::size_t best = x.index(n, c, oy * stride, ox * stride);
                    for (int ky = 0; ky < kernel; ++ky) {
                        for (int kx = 0; kx < kernel; ++kx) {
                            const std::size_t idx = x.index(n, c, oy * stride + ky, ox * stride + kx);
                            if (x[idx] > x[best]) {
                                best = idx;
                            }
                        }
                    }
                    out[o] = x[best];
                    if (argmax) {
                        (*argmax)[o] = best;
                    }
                }
            }
        }
    }
    return out;
}

namespace {

struct LinearTap {
    int i0;
    int i1;
    double w0;
    double w1;
};

std::vector<LinearTap> linear_taps(int in, int out) {
    std::vector<LinearTap> taps(out);
    const double ratio = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) * ratio - 0.5;
        if (src < 0.0) {
            src = 0.0;
        }
        const int i0 = std::min(static_cast<int>(src), in - 1);
        const int i1 = i0 < in - 1 ? i0 + 1 : i0;
        const double l1 = src - i0;
        taps[o] = LinearTap{i0, i1, 1.0 - l1, l1};
    }
    return taps;
}

}  // namespace

template <typename T>
BasicTensor<T> bilinear_resize(const BasicTensor<T>& x, int out_h, int out_w) {
    const Shape& xs = x.shape();
    if (out_h < 1 || out_w < 1 || xs.h < 1 || xs.w < 1) {
        throw DimensionError("bilinear_resize: invalid extents");
    }
    const auto ty = linear_taps(xs.h, out_h);
    const auto tx = linear_taps(xs.w, out_w);
    BasicTensor<T> out(Shape{xs.n, xs.c, out_h, out_w});
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            const T* src = x.plane(n, c);
            T* dst = out.plane(n, c);
            for (int oy = 0; oy < out_h; ++oy) {
                const auto& a = ty[oy];
                for (int ox = 0; ox < out_w; ++ox) {
                    const auto& b = tx[ox];
                    const double v = a.w0 * (b.w0 * src[a.i0 * xs.w + b.i0] + b.w1 * src[a.i0 * xs.w + b.i1]) +
                                     a.w1 * (b.w0 * src[a.i1 * xs.w + b.i0] + b.w1 * src[a.i1 * xs.w + b.i1]);
                    dst[oy * out_w + ox] = static_cast<T>(v);
                }
            }
        }
    }
    return out;
}

template <typename T>
BasicTensor<T> bilinear_resize_grad(const BasicTensor<T>& dy, Shape input_shape) {
    const auto ty = linear_taps(input_shape.h, dy.h());
    const auto tx = linear_taps(input_shape.w, dy.w());
    BasicTensor<T> dx(input_shape);
    std::vector<double> acc(input_shape.plane());
    const int iw = input_shape.w;
    for (int n = 0; n < input_shape.n; ++n) {
        for (int c = 0; c < input_shape.c; ++c) {
            std::fill(acc.begin(), acc.end(), 0.0);
            const T* g = dy.plane(n, c);
            for (int oy = 0; oy < dy.h(); ++oy) {
                const auto& a = ty[oy];
                for (int ox = 0; ox < dy.w(); ++ox) {
                    const auto& b = tx[ox];
                    const double v = g[oy * dy.w() + ox];
                    acc[a.i0 * iw + b.i0] += a.w0 * b.w0 * v;
                    acc[a.i0 * iw + b.i1] += a.w0 * b.w1 * v;
                    acc[a.i1 * iw + b.i0] += a.w1 * b.w0 * v;
                    acc[a.i1 * iw + b.i1] += a.w1 * b.w1 * v;
                }
            }
            T* dst = dx.plane(n, c);
            for (std::size_t i = 0; i < acc.size(); ++i) {
                dst[i] = static_cast<T>(acc[i]);
            }
        }
    }
    return dx;
}

template <typename T>
BasicTensor<T> channel_mix(const BasicTensor<T>& z, const BasicTensor<T>& phi) {
    const Shape& zs = z.shape();
    const int latent = zs.c;
    if (phi.n() != zs.n || phi.c() != latent * latent || phi.h() != 1 || phi.w() != 1) {
        throw DimensionError("channel_mix: phi shape " + phi.shape().str() +
                             " does not match latent input " + zs.str());
    }
    BasicTensor<T> out(zs);
    const std::size_t plane = zs.plane();
    std::vector<double> acc(plane);
    for (int n = 0; n < zs.n; ++n) {
        const T* m = phi.plane(n, 0);
        for (int o = 0; o < latent; ++o) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int i = 0; i < latent; ++i) {
                const double coef = m[o * latent + i];
                const T* src = z.plane(n, i);
                for (std::size_t p = 0; p < plane; ++p) {
                    acc[p] += coef * static_cast<double>(src[p]);
                }
            }
            T* dst = out.plane(n, o);
            for (std::size_t p = 0; p < plane; ++p) {
                dst[p] = static_cast<T>(acc[p]);
            }
        }
    }
    return out;
}

template <typename T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("max_abs_diff: " + a.shape().str() + " vs " + b.shape().str());
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    }
    return m;
}

#define LSR_INSTANTIATE_TENSOR(T)                                                                  \
    template class BasicTensor<T>;                                                                 \
    template struct ConvParams<T>;                                                                 \
    template BasicTensor<T> conv2d(const BasicTensor<T>&, const ConvParams<T>&);                   \
    template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&,                   \
                                   const BasicTensor<T>*, ConvGeometry);                           \
    template BasicTensor<T> conv2d_grad_input(const BasicTensor<T>&, const BasicTensor<T>&,        \
                                              ConvGeometry, Shape);                                \
    template BasicTensor<T> conv2d_grad_weight(const BasicTensor<T>&, const BasicTensor<T>&,       \
                                               ConvGeometry, Shape);                               \
    template BasicTensor<T> kernel_spatial_sum(const BasicTensor<T>&);                             \
    template BasicTensor<T> pixel_shuffle(const BasicTensor<T>&, int);                             \
    template BasicTensor<T> pixel_unshuffle(const BasicTensor<T>&, int);                           \
    template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                     \
    template BasicTensor<T> subtract(const BasicTensor<T>&, const BasicTensor<T>&);                \
    template BasicTensor<T> multiply(const BasicTensor<T>&, const BasicTensor<T>&);                \
    template BasicTensor<T> scale(const BasicTensor<T>&, T);                                       \
    template BasicTensor<T> channel_scale(const BasicTensor<T>&, const BasicTensor<T>&);           \
    template BasicTensor<T> reduce_to_shape(const BasicTensor<T>&, const Shape&);                  \
    template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                        \
    template BasicTensor<T> leaky_relu(const BasicTensor<T>&, T);                                  \
    template BasicTensor<T> relu(const BasicTensor<T>&);                                           \
    template BasicTensor<T> channel_softmax(const BasicTensor<T>&);                                \
    template BasicTensor<T> concat_channels(std::span<const BasicTensor<T>>);                      \
    template BasicTensor<T> slice_channels(const BasicTensor<T>&, int, int);                       \
    template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);                                \
    template BasicTensor<T> channel_mean(const BasicTensor<T>&);                                   \
    template BasicTensor<T> max_pool2d(const BasicTensor<T>&, int, int, std::vector<std::size_t>*); \
    template BasicTensor<T> bilinear_resize(const BasicTensor<T>&, int, int);                      \
    template BasicTensor<T> bilinear_resize_grad(const BasicTensor<T>&, Shape);                    \
    template BasicTensor<T> channel_mix(const BasicTensor<T>&, const BasicTensor<T>&);             \
    template double max_abs_diff(const BasicTensor<T>&, const BasicTensor<T>&);

LSR_INSTANTIATE_TENSOR(float)
LSR_INSTANTIATE_TENSOR(double)

#undef LSR_INSTANTIATE_TENSOR

}  // namespace lsr
