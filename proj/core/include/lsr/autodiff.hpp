// SPDX-License-Identifier: Apache-2.0
//
// Define-by-run reverse-mode differentiation over the tensor kernels.
//
// A Var is a shared handle to a graph node. Operations on Vars compute their
// value eagerly and, when any input requires a gradient and grad mode is on,
// record the inputs and a backward closure. backward() walks the recorded
// graph in reverse topological order.
#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "lsr/tensor.hpp"

namespace lsr {

enum class Mode { Train, Eval };

namespace detail {

template <typename T>
struct Node {
    const char* op = "leaf";
    BasicTensor<T> value;
    BasicTensor<T> grad;  // empty until a gradient reaches this node
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    void accumulate(const BasicTensor<T>& g);
};

}  // namespace detail

template <typename T>
class Var {
public:
    Var() = default;
    explicit Var(BasicTensor<T> value, bool requires_grad = false);

    static Var parameter(BasicTensor<T> value) { return Var(std::move(value), true); }

    bool defined() const { return node_ != nullptr; }
    const BasicTensor<T>& value() const { return node_->value; }
    /// In-place access for leaves (optimizer updates, running statistics).
    BasicTensor<T>& mutable_value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    const char* op() const { return node_->op; }

    bool has_grad() const { return node_ && !node_->grad.empty(); }
    /// Accumulated gradient, or zeros of the value's shape if none arrived.
    BasicTensor<T> grad() const;
    void zero_grad();

    const std::shared_ptr<detail::Node<T>>& node() const { return node_; }
    explicit Var(std::shared_ptr<detail::Node<T>> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node<T>> node_;
};

/// Disables graph recording for the current thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

/// Accumulates d(loss)/d(leaf) into every reachable leaf that requires a
/// gradient. Throws ContractError unless loss holds exactly one element.
template <typename T>
void backward(const Var<T>& loss);

/// Zeroes the gradients of `params`, runs backward and returns one gradient
/// per parameter (zeros for parameters the loss does not depend on).
template <typename T>
std::vector<BasicTensor<T>> gradients(const Var<T>& loss, std::span<Var<T>> params);

namespace ad {

template <typename T>
Var<T> constant(BasicTensor<T> value) {
    return Var<T>(std::move(value), false);
}

/// `bias` may be undefined.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, ConvGeometry g);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& a, T factor);
template <typename T>
Var<T> add_scalar(const Var<T>& a, T value);

template <typename T>
Var<T> sigmoid(const Var<T>& x);
template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope);
template <typename T>
Var<T> relu(const Var<T>& x);
/// (x + eps)^(-1/2)
template <typename T>
Var<T> inv_sqrt(const Var<T>& x, T eps);
template <typename T>
Var<T> channel_softmax(const Var<T>& x);

template <typename T>
Var<T> concat_channels(std::span<const Var<T>> parts);
template <typename T>
Var<T> slice_channels(const Var<T>& x, int begin, int count);
template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape);

template <typename T>
Var<T> global_avg_pool(const Var<T>& x);
template <typename T>
Var<T> channel_mean(const Var<T>& x);
template <typename T>
Var<T> max_pool2d(const Var<T>& x, int kernel, int stride);
template <typename T>
Var<T> bilinear_resize(const Var<T>& x, int out_h, int out_w);
template <typename T>
Var<T> pixel_shuffle(const Var<T>& x, int scale);
template <typename T>
Var<T> channel_mix(const Var<T>& z, const Var<T>& phi);
template <typename T>
Var<T> kernel_spatial_sum(const Var<T>& weight);

template <typename T>
Var<T> sum(const Var<T>& x);
template <typename T>
Var<T> mean(const Var<T>& x);
/// Mean absolute error; the subgradient at a tie is 0.
template <typename T>
Var<T> l1_loss(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mse_loss(const Var<T>& a, const Var<T>& b);

}  // namespace ad
}  // namespace lsr
