// SPDX-License-Identifier: Apache-2.0
#include "lsr/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "lsr/error.hpp"

namespace lsr {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace detail {

template <typename T>
void Node<T>::accumulate(const BasicTensor<T>& g) {
    if (g.shape() != value.shape()) {
        throw DimensionError(std::string("gradient shape ") + g.shape().str() + " does not match " +
                             value.shape().str() + " at op " + op);
    }
    if (grad.empty()) {
        grad = g;
        return;
    }
    for (std::size_t i = 0; i < grad.numel(); ++i) {
        grad[i] += g[i];
    }
}

}  // namespace detail

template <typename T>
Var<T>::Var(BasicTensor<T> value, bool requires_grad)
    : node_(std::make_shared<detail::Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T> Var<T>::grad() const {
    if (!has_grad()) {
        return BasicTensor<T>(node_->value.shape());
    }
    return node_->grad;
}

template <typename T>
void Var<T>::zero_grad() {
    if (node_) {
        node_->grad = BasicTensor<T>();
    }
}

template <typename T>
void backward(const Var<T>& loss) {
    if (!loss.defined() || loss.value().numel() != 1) {
        throw ContractError("backward requires a scalar loss, got shape " +
                            (loss.defined() ? loss.shape().str() : std::string("<undefined>")));
    }
    if (!loss.requires_grad()) {
        return;
    }
    using NodePtr = detail::Node<T>*;
    std::vector<NodePtr> order;
    std::unordered_set<NodePtr> visited;
    std::vector<std::pair<NodePtr, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            NodePtr child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) {
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss.node()->accumulate(BasicTensor<T>(loss.shape(), T(1)));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodePtr node = *it;
        if (node->backward && !node->grad.empty()) {
            node->backward(*node);
        }
    }
}

template <typename T>
std::vector<BasicTensor<T>> gradients(const Var<T>& loss, std::span<Var<T>> params) {
    for (auto& p : params) {
        p.zero_grad();
    }
    backward(loss);
    std::vector<BasicTensor<T>> out;
    out.reserve(params.size());
    for (auto& p : params) {
        out.push_back(p.grad());
    }
    return out;
}

namespace ad {
namespace {

template <typename T>
using NodeT = detail::Node<T>;

// Builds the result node; records inputs and the backward rule only when a
// gradient can flow.
template <typename T>
Var<T> make_result(const char* op, BasicTensor<T> value, std::initializer_list<Var<T>> inputs,
                   std::function<void(NodeT<T>&)> rule) {
    auto node = std::make_shared<NodeT<T>>();
    node->op = op;
    node->value = std::move(value);
    bool needs = false;
    if (grad_enabled()) {
        for (const auto& in : inputs) {
            needs = needs || in.requires_grad();
        }
    }
    if (needs) {
        node->requires_grad = true;
        for (const auto& in : inputs) {
            if (in.defined()) {
                node->inputs.push_back(in.node());
            }
        }
        node->backward = std::move(rule);
    }
    return Var<T>(std::move(node));
}

template <typename T>
void push_grad(const Var<T>& v, const BasicTensor<T>& g) {
    if (v.requires_grad()) {
        v.node()->accumulate(g);
    }
}

template <typename T>
BasicTensor<T> mapped(const BasicTensor<T>& a, const BasicTensor<T>& b, T (*f)(T, T)) {
    BasicTensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = f(a[i], b[i]);
    }
    return out;
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, ConvGeometry g) {
    const BasicTensor<T>* b = bias.defined() ? &bias.value() : nullptr;
    auto y = lsr::conv2d(x.value(), weight.value(), b, g);
    return make_result<T>("conv2d", std::move(y), {x, weight, bias}, [x, weight, bias, g](NodeT<T>& self) {
        if (x.requires_grad()) {
            push_grad(x, conv2d_grad_input(self.grad, weight.value(), g, x.shape()));
        }
        if (weight.requires_grad()) {
            push_grad(weight, conv2d_grad_weight(self.grad, x.value(), g, weight.shape()));
        }
        if (bias.requires_grad()) {
            push_grad(bias, reduce_to_shape(self.grad, bias.shape()));
        }
    });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    return make_result<T>("add", lsr::add(a.value(), b.value()), {a, b}, [a, b](NodeT<T>& self) {
        if (a.requires_grad()) {
            push_grad(a, reduce_to_shape(self.grad, a.shape()));
        }
        if (b.requires_grad()) {
            push_grad(b, reduce_to_shape(self.grad, b.shape()));
        }
    });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    return make_result<T>("sub", lsr::subtract(a.value(), b.value()), {a, b}, [a, b](NodeT<T>& self) {
        if (a.requires_grad()) {
            push_grad(a, reduce_to_shape(self.grad, a.shape()));
        }
        if (b.requires_grad()) {
            push_grad(b, reduce_to_shape(lsr::scale(self.grad, T(-1)), b.shape()));
        }
    });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    return make_result<T>("mul", lsr::multiply(a.value(), b.value()), {a, b}, [a, b](NodeT<T>& self) {
        if (a.requires_grad()) {
            push_grad(a, reduce_to_shape(lsr::multiply(self.grad, b.value()), a.shape()));
        }
        if (b.requires_grad()) {
            push_grad(b, reduce_to_shape(lsr::multiply(self.grad, a.value()), b.shape()));
        }
    });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
    return make_result<T>("scale", lsr::scale(a.value(), factor), {a}, [a, factor](NodeT<T>& self) {
        push_grad(a, lsr::scale(self.grad, factor));
    });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T value) {
    BasicTensor<T> y = a.value();
    for (auto& v : y.data()) {
        v += value;
    }
    return make_result<T>("add_scalar", std::move(y), {a}, [a](NodeT<T>& self) { push_grad(a, self.grad); });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
    auto y = lsr::sigmoid(x.value());
    auto saved = y;
    return make_result<T>("sigmoid", std::move(y), {x}, [x, saved](NodeT<T>& self) {
        push_grad(x, mapped<T>(self.grad, saved, [](T g, T s) { return g * s * (T(1) - s); }));
    });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
    return make_result<T>("leaky_relu", lsr::leaky_relu(x.value(), slope), {x}, [x, slope](NodeT<T>& self) {
        BasicTensor<T> g(self.grad.shape());
        const auto& xv = x.value();
        for (std::size_t i = 0; i < g.numel(); ++i) {
            g[i] = xv[i] >= T(0) ? self.grad[i] : self.grad[i] * slope;
        }
        push_grad(x, g);
    });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
    return make_result<T>("relu", lsr::relu(x.value()), {x}, [x](NodeT<T>& self) {
        push_grad(x, mapped<T>(self.grad, x.value(), [](T g, T v) { return v > T(0) ? g : T(0); }));
    });
}

template <typename T>
Var<T> inv_sqrt(const Var<T>& x, T eps) {
    BasicTensor<T> y(x.shape());
    for (std::size_t i = 0; i < y.numel(); ++i) {
        y[i] = T(1) / std::sqrt(x.value()[i] + eps);
    }
    auto saved = y;
    return make_result<T>("inv_sqrt", std::move(y), {x}, [x, saved](NodeT<T>& self) {
        push_grad(x, mapped<T>(self.grad, saved, [](T g, T s) { return g * T(-0.5) * s * s * s; }));
    });
}

template <typename T>
Var<T> channel_softmax(const Var<T>& x) {
    auto y = lsr::channel_softmax(x.value());
    auto saved = y;
    return make_result<T>("channel_softmax", std::move(y), {x}, [x, saved](NodeT<T>& self) {
        const Shape& s = saved.shape();
        BasicTensor<T> g(s);
        for (int n = 0; n < s.n; ++n) {
            for (std::size_t p = 0; p < s.plane(); ++p) {
                double dot = 0.0;
                for (int c = 0; c < s.c; ++c) {
                    dot += static_cast<double>(saved.plane(n, c)[p]) * self.grad.plane(n, c)[p];
                }
                for (int c = 0; c < s.c; ++c) {
                    g.plane(n, c)[p] =
                        static_cast<T>(saved.plane(n, c)[p] * (self.grad.plane(n, c)[p] - dot));
                }
            }
        }
        push_grad(x, g);
    });
}

template <typename T>
Var<T> concat_channels(std::span<const Var<T>> parts) {
    std::vector<BasicTensor<T>> values;
    values.reserve(parts.size());
    for (const auto& p : parts) {
        values.push_back(p.value());
    }
    auto y = lsr::concat_channels<T>(values);
    std::vector<Var<T>> saved(parts.begin(), parts.end());
    auto node = std::make_shared<NodeT<T>>();
    node->op = "concat";
    node->value = std::move(y);
    bool needs = false;
    if (grad_enabled()) {
        for (const auto& p : parts) {
            needs = needs || p.requires_grad();
        }
    }
    if (needs) {
        node->requires_grad = true;
        for (const auto& p : parts) {
            node->inputs.push_back(p.node());
        }
        node->backward = [saved](NodeT<T>& self) {
            int offset = 0;
            for (const auto& p : saved) {
                if (p.requires_grad()) {
                    push_grad(p, lsr::slice_channels(self.grad, offset, p.shape().c));
                }
                offset += p.shape().c;
            }
        };
    }
    return Var<T>(std::move(node));
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, int begin, int count) {
    return make_result<T>("slice_channels", lsr::slice_channels(x.value(), begin, count), {x},
                          [x, begin, count](NodeT<T>& self) {
                              BasicTensor<T> g(x.shape());
                              const std::size_t plane = x.shape().plane();
                              for (int n = 0; n < x.shape().n; ++n) {
                                  std::copy_n(self.grad.plane(n, 0), plane * count, g.plane(n, begin));
                              }
                              push_grad(x, g);
                          });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
    return make_result<T>("reshape", x.value().reshaped(shape), {x},
                          [x](NodeT<T>& self) { push_grad(x, self.grad.reshaped(x.shape())); });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
    return make_result<T>("global_avg_pool", lsr::global_avg_pool(x.value()), {x}, [x](NodeT<T>& self) {
        const Shape& s = x.shape();
        const T inv = T(1) / static_cast<T>(s.plane());
        BasicTensor<T> g(s);
        for (int n = 0; n < s.n; ++n) {
            for (int c = 0; c < s.c; ++c) {
                std::fill_n(g.plane(n, c), s.plane(), self.grad.at(n, c, 0, 0) * inv);
            }
        }
        push_grad(x, g);
    });
}

template <typename T>
Var<T> channel_mean(const Var<T>& x) {
    return make_result<T>("channel_mean", lsr::channel_mean(x.value()), {x}, [x](NodeT<T>& self) {
        const Shape& s = x.shape();
        const T inv = T(1) / static_cast<T>(static_cast<std::size_t>(s.n) * s.plane());
        BasicTensor<T> g(s);
        for (int n = 0; n < s.n; ++n) {
            for (int c = 0; c < s.c; ++c) {
                std::fill_n(g.plane(n, c), s.plane(), self.grad[c] * inv);
            }
        }
        push_grad(x, g);
    });
}

template <typename T>
Var<T> max_pool2d(const Var<T>& x, int kernel, int stride) {
    std::vector<std::size_t> argmax;
    auto y = lsr::max_pool2d(x.value(), kernel, stride, &argmax);
    return make_result<T>("max_pool2d", std::move(y), {x}, [x, argmax = std::move(argmax)](NodeT<T>& self) {
        BasicTensor<T> g(x.shape());
        for (std::size_t o = 0; o < argmax.size(); ++o) {
            g[argmax[o]] += self.grad[o];
        }
        push_grad(x, g);
    });
}

template <typename T>
Var<T> bilinear_resize(const Var<T>& x, int out_h, int out_w) {
    return make_result<T>("bilinear_resize", lsr::bilinear_resize(x.value(), out_h, out_w), {x},
                          [x](NodeT<T>& self) { push_grad(x, bilinear_resize_grad(self.grad, x.shape())); });
}

template <typename T>
Var<T> pixel_shuffle(const Var<T>& x, int scale) {
    return make_result<T>("pixel_shuffle", lsr::pixel_shuffle(x.value(), scale), {x},
                          [x, scale](NodeT<T>& self) { push_grad(x, pixel_unshuffle(self.grad, scale)); });
}

template <typename T>
Var<T> channel_mix(const Var<T>& z, const Var<T>& phi) {
    return make_result<T>("channel_mix", lsr::channel_mix(z.value(), phi.value()), {z, phi}, [z, phi](NodeT<T>& self) {
        const Shape& zs = z.shape();
        const int latent = zs.c;
        const std::size_t plane = zs.plane();
        if (z.requires_grad()) {
            BasicTensor<T> gz(zs);
            for (int n = 0; n < zs.n; ++n) {
                const T* m = phi.value().plane(n, 0);
                for (int i = 0; i < latent; ++i) {
                    T* dst = gz.plane(n, i);
                    for (int o = 0; o < latent; ++o) {
                        const T coef = m[o * latent + i];
                        const T* g = self.grad.plane(n, o);
                        for (std::size_t p = 0; p < plane; ++p) {
                            dst[p] += coef * g[p];
                        }
                    }
                }
            }
            push_grad(z, gz);
        }
        if (phi.requires_grad()) {
            BasicTensor<T> gphi(phi.shape());
            for (int n = 0; n < zs.n; ++n) {
                for (int o = 0; o < latent; ++o) {
                    const T* g = self.grad.plane(n, o);
                    for (int i = 0; i < latent; ++i) {
                        const T* zi = z.value().plane(n, i);
                        double sum = 0.0;
                        for (std::size_t p = 0; p < plane; ++p) {
                            sum += static_cast<double>(g[p]) * zi[p];
                        }
                        gphi.at(n, o * latent + i, 0, 0) = static_cast<T>(sum);
                    }
                }
            }
            push_grad(phi, gphi);
        }
    });
}

template <typename T>
Var<T> kernel_spatial_sum(const Var<T>& weight) {
    return make_result<T>("kernel_spatial_sum", lsr::kernel_spatial_sum(weight.value()), {weight},
                          [weight](NodeT<T>& self) {
                              const Shape& s = weight.shape();
                              BasicTensor<T> g(s);
                              for (int d = 0; d < s.n; ++d) {
                                  for (int c = 0; c < s.c; ++c) {
                                      std::fill_n(g.plane(d, c), s.plane(), self.grad.at(d, c, 0, 0));
                                  }
                              }
                              push_grad(weight, g);
                          });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
    double total = 0.0;
    for (T v : x.value().data()) {
        total += v;
    }
    BasicTensor<T> y(Shape{1, 1, 1, 1}, static_cast<T>(total));
    return make_result<T>("sum", std::move(y), {x}, [x](NodeT<T>& self) {
        push_grad(x, BasicTensor<T>(x.shape(), self.grad[0]));
    });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
    const auto count = static_cast<T>(x.value().numel());
    return scale(sum(x), T(1) / count);
}

template <typename T>
Var<T> l1_loss(const Var<T>& a, const Var<T>& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("l1_loss: " + a.shape().str() + " vs " + b.shape().str());
    }
    const std::size_t count = a.value().numel();
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        total += std::abs(static_cast<double>(a.value()[i]) - b.value()[i]);
    }
    BasicTensor<T> y(Shape{1, 1, 1, 1}, static_cast<T>(total / count));
    return make_result<T>("l1_loss", std::move(y), {a, b}, [a, b, count](NodeT<T>& self) {
        const T k = self.grad[0] / static_cast<T>(count);
        BasicTensor<T> g(a.shape());
        for (std::size_t i = 0; i < count; ++i) {
            const T d = a.value()[i] - b.value()[i];
            g[i] = d > T(0) ? k : (d < T(0) ? -k : T(0));
        }
        push_grad(a, g);
        if (b.requires_grad()) {
            push_grad(b, lsr::scale(g, T(-1)));
        }
    });
}

template <typename T>
Var<T> mse_loss(const Var<T>& a, const Var<T>& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("mse_loss: " + a.shape().str() + " vs " + b.shape().str());
    }
    const std::size_t count = a.value().numel();
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double d = static_cast<double>(a.value()[i]) - b.value()[i];
        total += d * d;
    }
    BasicTensor<T> y(Shape{1, 1, 1, 1}, static_cast<T>(total / count));
    return make_result<T>("mse_loss", std::move(y), {a, b}, [a, b, count](NodeT<T>& self) {
        const T k = T(2) * self.grad[0] / static_cast<T>(count);
        BasicTensor<T> g(a.shape());
        for (std::size_t i = 0; i < count; ++i) {
            g[i] = k * (a.value()[i] - b.value()[i]);
        }
        push_grad(a, g);
        if (b.requires_grad()) {
            push_grad(b, lsr::scale(g, T(-1)));
        }
    });
}

}  // namespace ad

#define LSR_INSTANTIATE_AD(T)                                                                  \
    template struct detail::Node<T>;                                                           \
    template class Var<T>;                                                                     \
    template void backward(const Var<T>&);                                                     \
    template std::vector<BasicTensor<T>> gradients(const Var<T>&, std::span<Var<T>>);          \
    template Var<T> ad::conv2d(const Var<T>&, const Var<T>&, const Var<T>&, ConvGeometry);     \
    template Var<T> ad::add(const Var<T>&, const Var<T>&);                                     \
    template Var<T> ad::sub(const Var<T>&, const Var<T>&);                                     \
    template Var<T> ad::mul(const Var<T>&, const Var<T>&);                                     \
    template Var<T> ad::scale(const Var<T>&, T);                                               \
    template Var<T> ad::add_scalar(const Var<T>&, T);                                          \
    template Var<T> ad::sigmoid(const Var<T>&);                                                \
    template Var<T> ad::leaky_relu(const Var<T>&, T);                                          \
    template Var<T> ad::relu(const Var<T>&);                                                   \
    template Var<T> ad::inv_sqrt(const Var<T>&, T);                                            \
    template Var<T> ad::channel_softmax(const Var<T>&);                                        \
    template Var<T> ad::concat_channels(std::span<const Var<T>>);                              \
    template Var<T> ad::slice_channels(const Var<T>&, int, int);                               \
    template Var<T> ad::reshape(const Var<T>&, Shape);                                         \
    template Var<T> ad::global_avg_pool(const Var<T>&);                                        \
    template Var<T> ad::channel_mean(const Var<T>&);                                           \
    template Var<T> ad::max_pool2d(const Var<T>&, int, int);                                   \
    template Var<T> ad::bilinear_resize(const Var<T>&, int, int);                              \
    template Var<T> ad::pixel_shuffle(const Var<T>&, int);                                     \
    template Var<T> ad::channel_mix(const Var<T>&, const Var<T>&);                             \
    template Var<T> ad::kernel_spatial_sum(const Var<T>&);                                     \
    template Var<T> ad::sum(const Var<T>&);                                                    \
    template Var<T> ad::mean(const Var<T>&);                                                   \
    template Var<T> ad::l1_loss(const Var<T>&, const Var<T>&);                                 \
    template Var<T> ad::mse_loss(const Var<T>&, const Var<T>&);

LSR_INSTANTIATE_AD(float)
LSR_INSTANTIATE_AD(double)

#undef LSR_INSTANTIATE_AD

}  // namespace lsr
