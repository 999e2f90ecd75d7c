// SPDX-License-Identifier: Apache-2.0
//
// Dense NCHW tensors and the numerical kernels the rest of the engine is built
// on. Every kernel is a pure function of its arguments. Templates are
// explicitly instantiated for float (storage/compute) and double (gradient
// checking) in tensor.cpp.
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace lsr {

struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t numel() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    friend bool operator==(const Shape&, const Shape&) = default;
    std::string str() const;
};

template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;
    explicit BasicTensor(Shape shape, T fill = T(0));
    BasicTensor(Shape shape, std::vector<T> data);

    static BasicTensor zeros(Shape shape) { return BasicTensor(shape); }
    static BasicTensor full(Shape shape, T value) { return BasicTensor(shape, value); }

    const Shape& shape() const { return shape_; }
    int n() const { return shape_.n; }
    int c() const { return shape_.c; }
    int h() const { return shape_.h; }
    int w() const { return shape_.w; }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<const T> data() const { return data_; }
    std::span<T> data() { return data_; }
    const T* ptr() const { return data_.data(); }
    T* ptr() { return data_.data(); }

    std::size_t index(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }
    T& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
    T at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    T operator[](std::size_t i) const { return data_[i]; }

    T* plane(int n, int c) { return data_.data() + index(n, c, 0, 0); }
    const T* plane(int n, int c) const { return data_.data() + index(n, c, 0, 0); }

    /// Same data under a new shape with equal element count.
    BasicTensor reshaped(Shape shape) const;

    template <typename U>
    BasicTensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return BasicTensor<U>(shape_, std::move(out));
    }

    bool all_finite() const;

private:
    Shape shape_{};
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

struct ConvGeometry {
    int stride = 1;
    int padding = 0;
    int groups = 1;
    friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

/// A static convolution: weight D x (C/groups) x k x k, bias D, dilation 1.
template <typename T>
struct ConvParams {
    BasicTensor<T> weight;
    BasicTensor<T> bias;  // shape (1, D, 1, 1)
    ConvGeometry geometry{};

    int out_channels() const { return weight.n(); }
    int in_channels() const { return weight.c() * geometry.groups; }
    int kernel() const { return weight.h(); }

    /// Throws DimensionError unless the invariants hold (odd square kernel,
    /// channels divisible by groups, bias of length D).
    void validate() const;

    template <typename U>
    ConvParams<U> cast() const {
        return {weight.template cast<U>(), bias.template cast<U>(), geometry};
    }
};

int conv_output_extent(int in, int kernel, int stride, int padding);

// ---------------------------------------------------------------------------
// Convolution. Cross-correlation with zero padding; reductions accumulate in
// double regardless of T.

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const ConvParams<T>& p);

/// `bias` may be null for a bias-free convolution.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                      const std::type_identity_t<BasicTensor<T>>* bias, ConvGeometry g);

template <typename T>
BasicTensor<T> conv2d_grad_input(const BasicTensor<T>& dy, const BasicTensor<T>& weight,
                                 ConvGeometry g, Shape input_shape);

template <typename T>
BasicTensor<T> conv2d_grad_weight(const BasicTensor<T>& dy, const BasicTensor<T>& x,
                                  ConvGeometry g, Shape weight_shape);

/// Per-output-channel sum over the spatial taps: (D, C/g, k, k) -> (D, C/g, 1, 1).
template <typename T>
BasicTensor<T> kernel_spatial_sum(const BasicTensor<T>& weight);

// ---------------------------------------------------------------------------
// Sub-pixel rearrangement.

template <typename T>
BasicTensor<T> pixel_shuffle(const BasicTensor<T>& x, int scale);

template <typename T>
BasicTensor<T> pixel_unshuffle(const BasicTensor<T>& x, int scale);

// ---------------------------------------------------------------------------
// Elementwise. Binary operations broadcast any axis of size 1 on either side.

inline constexpr double kDefaultLeakySlope = 0.05;

Shape broadcast_shape(const Shape& a, const Shape& b);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> subtract(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> multiply(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor);

/// Multiplies every (n, c) plane by s[n or 0, c]; s has shape (n|1, c, 1, 1).
template <typename T>
BasicTensor<T> channel_scale(const BasicTensor<T>& x, const BasicTensor<T>& s);

/// Sums `grad` over the axes along which `target` was broadcast.
template <typename T>
BasicTensor<T> reduce_to_shape(const BasicTensor<T>& grad, const Shape& target);

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x, T slope = T(kDefaultLeakySlope));
template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);

/// Softmax over the channel axis of every (n, :, h, w) fiber.
template <typename T>
BasicTensor<T> channel_softmax(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>> parts);

/// Channels [begin, begin + count) of x.
template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, int begin, int count);

// ---------------------------------------------------------------------------
// Pooling and resampling.

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x);

/// Mean over (n, h, w) for every channel: shape (1, c, 1, 1).
template <typename T>
BasicTensor<T> channel_mean(const BasicTensor<T>& x);

/// Max pooling without padding. `argmax` (if non-null) receives the flat input
/// index selected for every output element.
template <typename T>
BasicTensor<T> max_pool2d(const BasicTensor<T>& x, int kernel, int stride,
                          std::vector<std::size_t>* argmax = nullptr);

/// Bilinear resize with half-pixel centers (align_corners = false).
template <typename T>
BasicTensor<T> bilinear_resize(const BasicTensor<T>& x, int out_h, int out_w);

template <typename T>
BasicTensor<T> bilinear_resize_grad(const BasicTensor<T>& dy, Shape input_shape);

/// Per-sample latent mixing: out[n, o] = sum_i phi[n, o * L + i] * z[n, i].
/// z is (n, L, h, w), phi is (n, L*L, 1, 1).
template <typename T>
BasicTensor<T> channel_mix(const BasicTensor<T>& z, const BasicTensor<T>& phi);

template <typename T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b);

}  // namespace lsr
