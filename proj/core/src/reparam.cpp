// SPDX-License-Identifier: Apache-2.0
#include "lsr/reparam.hpp"

#include <cmath>
#include <optional>

#include "lsr/error.hpp"

namespace lsr {

const char* to_string(RepStyle style) {
    switch (style) {
        case RepStyle::Static:
            return "static";
        case RepStyle::RepVGG:
            return "repvgg";
        case RepStyle::DBB:
            return "dbb";
    }
    return "?";
}

RepStyle parse_rep_style(const std::string& text) {
    if (text == "static") {
        return RepStyle::Static;
    }
    if (text == "repvgg") {
        return RepStyle::RepVGG;
    }
    if (text == "dbb") {
        return RepStyle::DBB;
    }
    throw ConfigError("unknown rep style '" + text + "' (expected static, repvgg or dbb)");
}

const char* to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::Conv:
            return "conv";
        case NodeKind::BatchNorm:
            return "bn";
        case NodeKind::AvgPool:
            return "avgpool";
        case NodeKind::Identity:
            return "identity";
        case NodeKind::Scale:
            return "scale";
    }
    return "?";
}

template <typename T>
BatchNorm<T> BatchNorm<T>::fresh(int channels) {
    const Shape s{1, channels, 1, 1};
    BatchNorm bn;
    bn.gamma = Var<T>::parameter(BasicTensor<T>(s, T(1)));
    bn.beta = Var<T>::parameter(BasicTensor<T>(s));
    bn.running_mean = Var<T>(BasicTensor<T>(s));
    bn.running_var = Var<T>(BasicTensor<T>(s, T(1)));
    return bn;
}

template <typename T>
BnParams<T> BatchNorm<T>::params() const {
    return {gamma.value(), beta.value(), running_mean.value(), running_var.value(), eps};
}

template <typename T>
BranchNode<T> BranchNode<T>::make_conv(Var<T> weight, Var<T> bias, ConvGeometry geometry) {
    BranchNode node;
    node.kind = NodeKind::Conv;
    node.weight = std::move(weight);
    node.bias = std::move(bias);
    node.geometry = geometry;
    return node;
}

template <typename T>
BranchNode<T> BranchNode<T>::make_bn(BatchNorm<T> bn) {
    BranchNode node;
    node.kind = NodeKind::BatchNorm;
    node.bn = std::move(bn);
    return node;
}

template <typename T>
BranchNode<T> BranchNode<T>::make_avg_pool(int kernel) {
    BranchNode node;
    node.kind = NodeKind::AvgPool;
    node.pool_kernel = kernel;
    return node;
}

template <typename T>
BranchNode<T> BranchNode<T>::make_identity() {
    return BranchNode{};
}

template <typename T>
BranchNode<T> BranchNode<T>::make_scale(Var<T> scale) {
    BranchNode node;
    node.kind = NodeKind::Scale;
    node.scale = std::move(scale);
    return node;
}

template <typename T>
BranchGraph<T>::BranchGraph(int in_channels, int out_channels, int kernel, int groups, std::string tag)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      groups_(groups),
      tag_(std::move(tag)) {
    if (kernel < 1 || kernel % 2 == 0) {
        throw ConfigError("branch graph kernel must be odd, got " + std::to_string(kernel));
    }
    if (groups < 1 || in_channels % groups != 0 || out_channels % groups != 0) {
        throw ConfigError("branch graph channels must be divisible by groups");
    }
}

namespace {

// A feature travelling through a branch together with its zero response
// (undefined when the zero response is exactly zero).
template <typename T>
struct Flow {
    Var<T> v;
    Var<T> b;
};

template <typename T>
Var<T> add_maybe(const Var<T>& a, const Var<T>& b) {
    if (!a.defined()) {
        return b;
    }
    if (!b.defined()) {
        return a;
    }
    return ad::add(a, b);
}

// Convolution whose padding ring holds in.b instead of zero:
// conv_pad_b(v) = conv_pad_0(v - b) + (sum of taps) * b.
template <typename T>
Flow<T> conv_with_constant_pad(const Flow<T>& in, const Var<T>& weight, const Var<T>& bias, ConvGeometry g) {
    if (!in.b.defined()) {
        return {ad::conv2d(in.v, weight, bias, g), bias};
    }
    const Var<T> shift =
        ad::conv2d(in.b, ad::kernel_spatial_sum(weight), Var<T>(), ConvGeometry{1, 0, g.groups});
    Var<T> y;
    if (g.padding > 0) {
        y = ad::add(ad::conv2d(ad::sub(in.v, in.b), weight, bias, g), shift);
    } else {
        y = ad::conv2d(in.v, weight, bias, g);
    }
    return {y, add_maybe(shift, bias)};
}

template <typename T>
Var<T> avg_pool_weight(int channels, int kernel) {
    const T tap = T(1) / static_cast<T>(kernel * kernel);
    return Var<T>(BasicTensor<T>(Shape{channels, 1, kernel, kernel}, tap));
}

template <typename T>
Flow<T> batch_norm_forward(const Flow<T>& in, BatchNorm<T>& bn, Mode mode) {
    const T eps = static_cast<T>(bn.eps);
    if (mode == Mode::Train) {
        const Var<T> mean = ad::channel_mean(in.v);
        const Var<T> centered = ad::sub(in.v, mean);
        const Var<T> var = ad::channel_mean(ad::mul(centered, centered));
        const Var<T> k = ad::mul(ad::inv_sqrt(var, eps), bn.gamma);
        const Var<T> y = ad::add(ad::mul(centered, k), bn.beta);
        const Var<T> b_centered = in.b.defined() ? ad::sub(in.b, mean) : ad::scale(mean, T(-1));
        const Var<T> b = ad::add(ad::mul(b_centered, k), bn.beta);

        const Shape& s = in.v.shape();
        const double count = static_cast<double>(s.n) * static_cast<double>(s.plane());
        const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
        const double m = bn.momentum;
        auto& rm = bn.running_mean.mutable_value();
        auto& rv = bn.running_var.mutable_value();
        for (int c = 0; c < s.c; ++c) {
            rm[c] = static_cast<T>((1.0 - m) * rm[c] + m * mean.value()[c]);
            rv[c] = static_cast<T>((1.0 - m) * rv[c] + m * var.value()[c] * unbias);
        }
        return {y, b};
    }
    BasicTensor<T> inv(bn.running_var.shape());
    for (std::size_t c = 0; c < inv.numel(); ++c) {
        inv[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(bn.running_var.value()[c]) + bn.eps));
    }
    const Var<T> k = ad::mul(bn.gamma, ad::constant(std::move(inv)));
    const Var<T> mean = ad::constant(bn.running_mean.value());
    const Var<T> y = ad::add(ad::mul(ad::sub(in.v, mean), k), bn.beta);
    const Var<T> b_centered = in.b.defined() ? ad::sub(in.b, mean) : ad::scale(mean, T(-1));
    return {y, ad::add(ad::mul(b_centered, k), bn.beta)};
}

}  // namespace

template <typename T>
AffineOutput<T> BranchGraph<T>::forward(const Var<T>& x, Mode mode) {
    if (x.shape().c != in_channels_) {
        throw DimensionError("branch graph channel axis: expected " + std::to_string(in_channels_) +
                             ", got " + std::to_string(x.shape().c));
    }
    Var<T> y_total;
    Var<T> b_total;
    for (auto& branch : branches_) {
        Flow<T> flow{x, Var<T>()};
        for (auto& node : branch.nodes) {
            switch (node.kind) {
                case NodeKind::Conv:
                    flow = conv_with_constant_pad(flow, node.weight, node.bias, node.geometry);
                    break;
                case NodeKind::BatchNorm:
                    flow = batch_norm_forward(flow, node.bn, mode);
                    break;
                case NodeKind::AvgPool: {
                    const int k = node.pool_kernel;
                    const int c = flow.v.shape().c;
                    Flow<T> pooled = conv_with_constant_pad(flow, avg_pool_weight<T>(c, k), Var<T>(),
                                                            ConvGeometry{1, k / 2, c});
                    flow = {pooled.v, flow.b};
                    break;
                }
                case NodeKind::Identity:
                    break;
                case NodeKind::Scale:
                    flow = {ad::mul(flow.v, node.scale),
                            flow.b.defined() ? ad::mul(flow.b, node.scale) : Var<T>()};
                    break;
            }
        }
        y_total = add_maybe(y_total, flow.v);
        b_total = add_maybe(b_total, flow.b);
    }
    if (!y_total.defined()) {
        throw ContractError("branch graph has no branches");
    }
    if (!b_total.defined()) {
        b_total = ad::constant(BasicTensor<T>(Shape{1, out_channels_, 1, 1}));
    }
    return {y_total, b_total};
}

template <typename T>
void BranchGraph<T>::fuse() {
    if (is_fused()) {
        return;
    }
    *this = from_conv(fuse_branch_graph(*this), "fused");
}

template <typename T>
void BranchGraph<T>::visit(const std::string& prefix, const TensorVisitor<T>& visitor) {
    for (std::size_t b = 0; b < branches_.size(); ++b) {
        auto& nodes = branches_[b].nodes;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            auto& node = nodes[i];
            const std::string base =
                join_name(prefix, "b" + std::to_string(b) + "." + to_string(node.kind) + std::to_string(i));
            switch (node.kind) {
                case NodeKind::Conv:
                    visitor(base + ".weight", node.weight, TensorRole::Parameter);
                    if (node.bias.defined()) {
                        visitor(base + ".bias", node.bias, TensorRole::Parameter);
                    }
                    break;
                case NodeKind::BatchNorm:
                    visitor(base + ".gamma", node.bn.gamma, TensorRole::Parameter);
                    visitor(base + ".beta", node.bn.beta, TensorRole::Parameter);
                    visitor(base + ".running_mean", node.bn.running_mean, TensorRole::Buffer);
                    visitor(base + ".running_var", node.bn.running_var, TensorRole::Buffer);
                    break;
                case NodeKind::Scale:
                    visitor(base + ".scale", node.scale, TensorRole::Parameter);
                    break;
                case NodeKind::AvgPool:
                case NodeKind::Identity:
                    break;
            }
        }
    }
}

template <typename T>
std::int64_t BranchGraph<T>::param_count() const {
    std::int64_t total = 0;
    for (const auto& branch : branches_) {
        for (const auto& node : branch.nodes) {
            switch (node.kind) {
                case NodeKind::Conv:
                    total += static_cast<std::int64_t>(node.weight.value().numel());
                    if (node.bias.defined()) {
                        total += static_cast<std::int64_t>(node.bias.value().numel());
                    }
                    break;
                case NodeKind::BatchNorm:
                    total += 2 * static_cast<std::int64_t>(node.bn.channels());
                    break;
                case NodeKind::Scale:
                    total += static_cast<std::int64_t>(node.scale.value().numel());
                    break;
                case NodeKind::AvgPool:
                case NodeKind::Identity:
                    break;
            }
        }
    }
    return total;
}

template <typename T>
std::int64_t BranchGraph<T>::madds(int h, int w) const {
    std::int64_t total = 0;
    for (const auto& branch : branches_) {
        int ch = h;
        int cw = w;
        for (const auto& node : branch.nodes) {
            if (node.kind != NodeKind::Conv) {
                continue;
            }
            const Shape& ws = node.weight.shape();
            const ConvGeometry& g = node.geometry;
            ch = conv_output_extent(ch, ws.h, g.stride, g.padding);
            cw = conv_output_extent(cw, ws.w, g.stride, g.padding);
            total += conv_madds(ws.c * g.groups, ws.n, ws.h, g.groups, ch, cw);
        }
    }
    return total;
}

template <typename T>
BranchGraph<T> BranchGraph<T>::from_conv(const ConvParams<T>& conv, std::string tag) {
    conv.validate();
    BranchGraph graph(conv.in_channels(), conv.out_channels(), conv.kernel(), conv.geometry.groups,
                      std::move(tag));
    Branch<T> branch;
    branch.nodes.push_back(BranchNode<T>::make_conv(Var<T>::parameter(conv.weight),
                                                    Var<T>::parameter(conv.bias), conv.geometry));
    graph.branches_.push_back(std::move(branch));
    return graph;
}

// ---------------------------------------------------------------------------

template <typename T>
ConvParams<T> conv_params_of(const BranchNode<T>& node) {
    if (node.kind != NodeKind::Conv) {
        throw FusionError(std::string("expected a conv node, got ") + to_string(node.kind));
    }
    ConvParams<T> p;
    p.weight = node.weight.value();
    p.bias = node.bias.defined() ? node.bias.value() : BasicTensor<T>(Shape{1, node.weight.shape().n, 1, 1});
    p.geometry = node.geometry;
    return p;
}

template <typename T>
ConvParams<T> fuse_conv_bn(const ConvParams<T>& conv, const BnParams<T>& bn) {
    const int d = conv.out_channels();
    if (static_cast<int>(bn.gamma.numel()) != d || static_cast<int>(bn.beta.numel()) != d ||
        static_cast<int>(bn.mean.numel()) != d || static_cast<int>(bn.var.numel()) != d) {
        throw FusionError("batch norm has " + std::to_string(bn.gamma.numel()) +
                          " channels but the conv produces " + std::to_string(d));
    }
    ConvParams<T> out = conv;
    const std::size_t per_out = conv.weight.numel() / static_cast<std::size_t>(d);
    for (int o = 0; o < d; ++o) {
        const double denom = static_cast<double>(bn.var[o]) + bn.eps;
        if (!(denom > 0.0)) {
            throw FusionError("batch norm variance + eps must be positive");
        }
        const double t = static_cast<double>(bn.gamma[o]) / std::sqrt(denom);
        T* w = out.weight.ptr() + static_cast<std::size_t>(o) * per_out;
        for (std::size_t i = 0; i < per_out; ++i) {
            w[i] = static_cast<T>(static_cast<double>(w[i]) * t);
        }
        out.bias[o] = static_cast<T>(bn.beta[o] + (static_cast<double>(conv.bias[o]) - bn.mean[o]) * t);
    }
    return out;
}

template <typename T>
ConvParams<T> embed_kernel(const ConvParams<T>& p, int k_target) {
    const int k = p.kernel();
    if (k % 2 == 0 || k_target % 2 == 0) {
        throw FusionError("kernel sizes must be odd");
    }
    if (k > k_target) {
        throw FusionError("cannot embed a " + std::to_string(k) + "x" + std::to_string(k) + " kernel into " +
                          std::to_string(k_target) + "x" + std::to_string(k_target));
    }
    const Shape& ws = p.weight.shape();
    ConvParams<T> out;
    out.weight = BasicTensor<T>(Shape{ws.n, ws.c, k_target, k_target});
    out.bias = p.bias;
    out.geometry = p.geometry;
    out.geometry.padding = k_target / 2;
    const int off = (k_target - k) / 2;
    for (int d = 0; d < ws.n; ++d) {
        for (int c = 0; c < ws.c; ++c) {
            for (int i = 0; i < k; ++i) {
                for (int j = 0; j < k; ++j) {
                    out.weight.at(d, c, i + off, j + off) = p.weight.at(d, c, i, j);
                }
            }
        }
    }
    return out;
}

template <typename T>
ConvParams<T> identity_as_conv(int channels, int groups) {
    return avg_pool_as_conv<T>(channels, 1, groups);
}

template <typename T>
ConvParams<T> avg_pool_as_conv(int channels, int kernel, int groups) {
    if (groups < 1 || channels % groups != 0) {
        throw FusionError("channels must be divisible by groups");
    }
    const int per_group = channels / groups;
    ConvParams<T> p;
    p.weight = BasicTensor<T>(Shape{channels, per_group, kernel, kernel});
    p.bias = BasicTensor<T>(Shape{1, channels, 1, 1});
    p.geometry = ConvGeometry{1, kernel / 2, groups};
    const T tap = T(1) / static_cast<T>(kernel * kernel);
    for (int d = 0; d < channels; ++d) {
        T* plane = p.weight.plane(d, d % per_group);
        std::fill_n(plane, static_cast<std::size_t>(kernel) * kernel, tap);
    }
    return p;
}

template <typename T>
ConvParams<T> fuse_sequential(const ConvParams<T>& first, const ConvParams<T>& second) {
    if (first.kernel() != 1 || first.geometry.stride != 1 || first.geometry.padding != 0) {
        throw FusionError("sequential fusion requires a 1x1, stride-1, unpadded first stage; got " +
                          std::to_string(first.kernel()) + "x" + std::to_string(first.kernel()));
    }
    if (first.geometry.groups != second.geometry.groups) {
        throw FusionError("sequential fusion requires equal groups");
    }
    if (first.out_channels() != second.in_channels()) {
        throw FusionError("sequential fusion channel chain broken: " + std::to_string(first.out_channels()) +
                          " -> " + std::to_string(second.in_channels()));
    }
    const int g = first.geometry.groups;
    const int mid_g = first.out_channels() / g;
    const int in_g = first.weight.c();
    const int d_total = second.out_channels();
    const int d_g = d_total / g;
    const int k = second.kernel();
    const int taps = k * k;

    ConvParams<T> out;
    out.weight = BasicTensor<T>(Shape{d_total, in_g, k, k});
    out.bias = BasicTensor<T>(Shape{1, d_total, 1, 1});
    out.geometry = second.geometry;
    for (int d = 0; d < d_total; ++d) {
        const int grp = d / d_g;
        double bias = second.bias[d];
        for (int j = 0; j < mid_g; ++j) {
            const int m = grp * mid_g + j;
            const T* w2 = second.weight.plane(d, j);
            double tap_sum = 0.0;
            for (int t = 0; t < taps; ++t) {
                tap_sum += w2[t];
            }
            bias += tap_sum * first.bias[m];
            for (int c = 0; c < in_g; ++c) {
                const double w1 = first.weight.at(m, c, 0, 0);
                if (w1 == 0.0) {
                    continue;
                }
                T* dst = out.weight.plane(d, c);
                for (int t = 0; t < taps; ++t) {
                    dst[t] = static_cast<T>(dst[t] + w1 * w2[t]);
                }
            }
        }
        out.bias[d] = static_cast<T>(bias);
    }
    return out;
}

template <typename T>
ConvParams<T> fuse_parallel_sum(std::span<const ConvParams<T>> branches) {
    if (branches.empty()) {
        throw FusionError("parallel sum of zero branches");
    }
    ConvParams<T> out = branches.front();
    for (std::size_t i = 1; i < branches.size(); ++i) {
        const auto& b = branches[i];
        if (b.weight.shape() != out.weight.shape() || b.geometry != out.geometry ||
            b.bias.shape() != out.bias.shape()) {
            throw FusionError("parallel branch " + std::to_string(i) + " geometry " + b.weight.shape().str() +
                              " does not match " + out.weight.shape().str());
        }
        for (std::size_t j = 0; j < out.weight.numel(); ++j) {
            out.weight[j] += b.weight[j];
        }
        for (std::size_t j = 0; j < out.bias.numel(); ++j) {
            out.bias[j] += b.bias[j];
        }
    }
    return out;
}

template <typename T>
ConvParams<T> fuse_branch_graph(const BranchGraph<T>& graph) {
    std::vector<ConvParams<T>> folded;
    const auto& branches = graph.branches();
    for (std::size_t bi = 0; bi < branches.size(); ++bi) {
        std::optional<ConvParams<T>> acc;
        int stages = 0;
        const auto& nodes = branches[bi].nodes;
        for (std::size_t ni = 0; ni < nodes.size(); ++ni) {
            const auto& node = nodes[ni];
            const std::string where =
                "branch " + std::to_string(bi) + " node " + std::to_string(ni) + " (" + to_string(node.kind) + ")";
            if (node.is_stage() && ++stages > kMaxBranchStages) {
                throw FusionError(where + ": more than " + std::to_string(kMaxBranchStages) +
                                  " conv-like stages in one branch");
            }
            const int channels = acc ? acc->out_channels() : graph.in_channels();
            try {
                switch (node.kind) {
                    case NodeKind::Conv: {
                        ConvParams<T> cur = conv_params_of(node);
                        acc = acc ? fuse_sequential(*acc, cur) : cur;
                        break;
                    }
                    case NodeKind::AvgPool: {
                        auto cur = avg_pool_as_conv<T>(channels, node.pool_kernel, graph.groups());
                        acc = acc ? fuse_sequential(*acc, cur) : cur;
                        break;
                    }
                    case NodeKind::Identity: {
                        auto cur = identity_as_conv<T>(channels, graph.groups());
                        acc = acc ? fuse_sequential(*acc, cur) : cur;
                        break;
                    }
                    case NodeKind::BatchNorm:
                        if (!acc) {
                            acc = identity_as_conv<T>(channels, graph.groups());
                        }
                        acc = fuse_conv_bn(*acc, node.bn.params());
                        break;
                    case NodeKind::Scale: {
                        if (!acc) {
                            acc = identity_as_conv<T>(channels, graph.groups());
                        }
                        const BasicTensor<T>& s = node.scale.value();
                        if (static_cast<int>(s.numel()) != acc->out_channels()) {
                            throw FusionError("scale length does not match channels");
                        }
                        const std::size_t per_out = acc->weight.numel() / s.numel();
                        for (std::size_t o = 0; o < s.numel(); ++o) {
                            for (std::size_t i = 0; i < per_out; ++i) {
                                acc->weight[o * per_out + i] *= s[o];
                            }
                            acc->bias[o] *= s[o];
                        }
                        break;
                    }
                }
            } catch (const FusionError& e) {
                throw FusionError(where + ": " + e.what());
            }
        }
        if (!acc) {
            acc = identity_as_conv<T>(graph.in_channels(), graph.groups());
        }
        if (acc->in_channels() != graph.in_channels() || acc->out_channels() != graph.out_channels()) {
            throw FusionError("branch " + std::to_string(bi) + " maps " + std::to_string(acc->in_channels()) +
                              " -> " + std::to_string(acc->out_channels()) + " channels, graph expects " +
                              std::to_string(graph.in_channels()) + " -> " + std::to_string(graph.out_channels()));
        }
        folded.push_back(embed_kernel(*acc, graph.kernel()));
    }
    return fuse_parallel_sum<T>(folded);
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
BranchNode<T> fresh_conv(Initializer& init, int in_c, int out_c, int k, int groups, bool bias) {
    Var<T> w = init.conv_weight<T>(in_c, out_c, k, groups);
    Var<T> b = bias ? init.conv_bias<T>(in_c, out_c, k, groups) : Var<T>();
    return BranchNode<T>::make_conv(std::move(w), std::move(b), ConvGeometry{1, k / 2, groups});
}

template <typename T>
BranchNode<T> fresh_bn(int channels) {
    return BranchNode<T>::make_bn(BatchNorm<T>::fresh(channels));
}

}  // namespace

template <typename T>
BranchGraph<T> make_static_graph(int in_c, int out_c, int kernel, int groups, Initializer& init) {
    BranchGraph<T> g(in_c, out_c, kernel, groups, "static");
    g.branches().push_back({{fresh_conv<T>(init, in_c, out_c, kernel, groups, true)}});
    return g;
}

template <typename T>
BranchGraph<T> make_repvgg_graph(int in_c, int out_c, int kernel, int groups, Initializer& init) {
    BranchGraph<T> g(in_c, out_c, kernel, groups, "repvgg");
    g.branches().push_back({{fresh_conv<T>(init, in_c, out_c, kernel, groups, false), fresh_bn<T>(out_c)}});
    g.branches().push_back({{fresh_conv<T>(init, in_c, out_c, 1, groups, false), fresh_bn<T>(out_c)}});
    if (in_c == out_c) {
        g.branches().push_back({{BranchNode<T>::make_identity(), fresh_bn<T>(out_c)}});
    }
    return g;
}

template <typename T>
BranchGraph<T> make_dbb_graph(int in_c, int out_c, int kernel, int groups, Initializer& init) {
    BranchGraph<T> g(in_c, out_c, kernel, groups, "dbb");
    g.branches().push_back({{fresh_conv<T>(init, in_c, out_c, kernel, groups, false), fresh_bn<T>(out_c)}});
    g.branches().push_back({{fresh_conv<T>(init, in_c, out_c, 1, groups, false), fresh_bn<T>(out_c)}});
    g.branches().push_back({{fresh_conv<T>(init, in_c, out_c, 1, groups, false), fresh_bn<T>(out_c),
                             BranchNode<T>::make_avg_pool(kernel)}});
    g.branches().push_back({{fresh_conv<T>(init, in_c, in_c, 1, groups, false), fresh_bn<T>(in_c),
                             fresh_conv<T>(init, in_c, out_c, kernel, groups, false), fresh_bn<T>(out_c)}});
    return g;
}

template <typename T>
BranchGraph<T> make_graph(RepStyle style, int in_c, int out_c, int kernel, int groups, Initializer& init) {
    switch (style) {
        case RepStyle::Static:
            return make_static_graph<T>(in_c, out_c, kernel, groups, init);
        case RepStyle::RepVGG:
            return make_repvgg_graph<T>(in_c, out_c, kernel, groups, init);
        case RepStyle::DBB:
            return make_dbb_graph<T>(in_c, out_c, kernel, groups, init);
    }
    throw ConfigError("unknown rep style");
}

#define LSR_INSTANTIATE_REPARAM(T)                                                                  \
    template struct BatchNorm<T>;                                                                   \
    template struct BranchNode<T>;                                                                  \
    template class BranchGraph<T>;                                                                  \
    template ConvParams<T> conv_params_of(const BranchNode<T>&);                                    \
    template ConvParams<T> fuse_conv_bn(const ConvParams<T>&, const BnParams<T>&);                  \
    template ConvParams<T> embed_kernel(const ConvParams<T>&, int);                                 \
    template ConvParams<T> identity_as_conv(int, int);                                              \
    template ConvParams<T> avg_pool_as_conv(int, int, int);                                         \
    template ConvParams<T> fuse_sequential(const ConvParams<T>&, const ConvParams<T>&);             \
    template ConvParams<T> fuse_parallel_sum(std::span<const ConvParams<T>>);                       \
    template ConvParams<T> fuse_branch_graph(const BranchGraph<T>&);                                \
    template BranchGraph<T> make_static_graph(int, int, int, int, Initializer&);                    \
    template BranchGraph<T> make_repvgg_graph(int, int, int, int, Initializer&);                    \
    template BranchGraph<T> make_dbb_graph(int, int, int, int, Initializer&);                       \
    template BranchGraph<T> make_graph(RepStyle, int, int, int, int, Initializer&);

LSR_INSTANTIATE_REPARAM(float)
LSR_INSTANTIATE_REPARAM(double)

#undef LSR_INSTANTIATE_REPARAM

}  // namespace lsr
