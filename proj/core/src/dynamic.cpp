// SPDX-License-Identifier: Apache-2.0
#include "lsr/dynamic.hpp"

#include <algorithm>

#include "lsr/error.hpp"

namespace lsr {

const char* to_string(ConvType type) {
    switch (type) {
        case ConvType::Static:
            return "static";
        case ConvType::DYConv:
            return "dyconv";
        case ConvType::DCD:
            return "dcd";
    }
    return "?";
}

ConvType parse_conv_type(const std::string& text) {
    if (text == "static") {
        return ConvType::Static;
    }
    if (text == "dyconv") {
        return ConvType::DYConv;
    }
    if (text == "dcd") {
        return ConvType::DCD;
    }
    throw ConfigError("unknown conv type '" + text + "' (expected static, dyconv or dcd)");
}

namespace {

void check_spec(const DynamicConvSpec& spec) {
    if (spec.in_channels < 1 || spec.out_channels < 1) {
        throw ConfigError("dynamic conv needs positive channel counts");
    }
    if (spec.latent < 0) {
        throw ConfigError("latent width must be non-negative");
    }
    const int cap = std::min(spec.in_channels, spec.out_channels) / 2;
    if (spec.latent > cap) {
        throw ConfigError("latent width " + std::to_string(spec.latent) + " exceeds half the channel count (" +
                          std::to_string(cap) + ")");
    }
}

template <typename T>
Var<T> zeros_like_output(const Var<T>& x, int channels) {
    const Shape& s = x.shape();
    return ad::constant(BasicTensor<T>(Shape{s.n, channels, s.h, s.w}));
}

template <typename T>
Var<T> pointwise(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    return ad::conv2d(x, w, b, ConvGeometry{});
}

// Rows for a static kernel source in the requested mode.
template <typename T>
void graph_cost(const BranchGraph<T>& graph, const std::string& name, int h, int w, CostSink& sink) {
    if (sink.mode == CostMode::Training) {
        sink.add(name, graph.param_count(), graph.madds(h, w), h, w);
        return;
    }
    const int in_c = graph.in_channels();
    const int out_c = graph.out_channels();
    const int k = graph.kernel();
    sink.add(name, conv_param_count(in_c, out_c, k, graph.groups(), true),
             conv_madds(in_c, out_c, k, graph.groups(), h, w), h, w);
}

}  // namespace

template <typename T>
DcdConv<T>::DcdConv(const DynamicConvSpec& spec, Initializer& init) : spec_(spec) {
    check_spec(spec_);
    graph_ = make_graph<T>(spec_.rep_style, spec_.in_channels, spec_.out_channels, spec_.kernel, spec_.groups, init);
    init_dynamic(init);
}

template <typename T>
DcdConv<T>::DcdConv(const DynamicConvSpec& spec, BranchGraph<T> graph, Initializer& init)
    : spec_(spec), graph_(std::move(graph)) {
    check_spec(spec_);
    if (graph_.in_channels() != spec_.in_channels || graph_.out_channels() != spec_.out_channels) {
        throw ConfigError("branch graph channels do not match the dynamic conv spec");
    }
    init_dynamic(init);
}

template <typename T>
void DcdConv<T>::init_dynamic(Initializer& init) {
    const int l = spec_.latent;
    if (l == 0) {
        return;
    }
    const int c_in = spec_.in_channels;
    const int c_out = spec_.out_channels;
    const int sq = squeeze_width(c_in);
    p_ = init.conv_weight<T>(l, c_out, 1, 1);
    q_t_ = init.conv_weight<T>(c_in, l, 1, 1);
    fc1_w_ = init.conv_weight<T>(c_in, sq, 1, 1);
    fc1_b_ = init.conv_bias<T>(c_in, sq, 1, 1);
    fc2_w_ = zero_parameter<T>(Shape{c_out, sq, 1, 1});
    fc2_b_ = zero_parameter<T>(Shape{1, c_out, 1, 1});
    phi_w_ = zero_parameter<T>(Shape{l * l, sq, 1, 1});
    phi_b_ = zero_parameter<T>(Shape{1, l * l, 1, 1});
}

template <typename T>
DcdAttention<T> DcdConv<T>::attention(const Var<T>& x) const {
    if (spec_.latent < 1) {
        throw ContractError("attention requires a latent width of at least 1");
    }
    const Var<T> squeezed = ad::relu(pointwise(ad::global_avg_pool(x), fc1_w_, fc1_b_));
    const Var<T> lambda = ad::scale(ad::sigmoid(pointwise(squeezed, fc2_w_, fc2_b_)), T(2));
    const Var<T> phi = pointwise(squeezed, phi_w_, phi_b_);
    return {lambda, phi};
}

template <typename T>
Var<T> DcdConv<T>::dynamic_residual(const Var<T>& x, const DcdAttention<T>& att) const {
    const Var<T> z = ad::conv2d(x, q_t_, Var<T>(), ConvGeometry{});
    return ad::conv2d(ad::channel_mix(z, att.phi), p_, Var<T>(), ConvGeometry{});
}

template <typename T>
DynamicOutput<T> DcdConv<T>::forward(const Var<T>& x, Mode mode) {
    AffineOutput<T> base = graph_.forward(x, mode);
    if (spec_.latent == 0) {
        return {base.y, zeros_like_output(base.y, spec_.out_channels)};
    }
    const DcdAttention<T> att = attention(x);
    const Var<T> dyn = dynamic_residual(x, att);
    const Var<T> gated = ad::mul(ad::sub(base.y, base.zero_response), att.lambda);
    return {ad::add(ad::add(gated, dyn), base.zero_response), dyn};
}

template <typename T>
void DcdConv<T>::visit(const std::string& prefix, const TensorVisitor<T>& visitor) {
    graph_.visit(join_name(prefix, "kernel"), visitor);
    if (spec_.latent == 0) {
        return;
    }
    visitor(join_name(prefix, "p"), p_, TensorRole::Parameter);
    visitor(join_name(prefix, "q_t"), q_t_, TensorRole::Parameter);
    visitor(join_name(prefix, "fc1.weight"), fc1_w_, TensorRole::Parameter);
    visitor(join_name(prefix, "fc1.bias"), fc1_b_, TensorRole::Parameter);
    visitor(join_name(prefix, "fc2.weight"), fc2_w_, TensorRole::Parameter);
    visitor(join_name(prefix, "fc2.bias"), fc2_b_, TensorRole::Parameter);
    visitor(join_name(prefix, "fc_phi.weight"), phi_w_, TensorRole::Parameter);
    visitor(join_name(prefix, "fc_phi.bias"), phi_b_, TensorRole::Parameter);
}

template <typename T>
void DcdConv<T>::visit_graphs(const std::string& prefix, const GraphVisitor<T>& visitor) {
    visitor(join_name(prefix, "kernel"), graph_);
}

template <typename T>
void DcdConv<T>::cost(const std::string& name, int h, int w, CostSink& sink) const {
    graph_cost(graph_, join_name(name, "kernel"), h, w, sink);
    const std::int64_t l = spec_.latent;
    if (l == 0) {
        return;
    }
    const std::int64_t c_in = spec_.in_channels;
    const std::int64_t c_out = spec_.out_channels;
    const std::int64_t sq = squeeze_width(spec_.in_channels);
    const std::int64_t pixels = static_cast<std::int64_t>(h) * w;
    sink.add(join_name(name, "pq"), c_out * l + c_in * l, (c_in * l + l * l + l * c_out) * pixels, h, w);
    const std::int64_t gen_params = (c_in * sq + sq) + (sq * c_out + c_out) + (sq * l * l + l * l);
    const std::int64_t gen_madds = c_in * sq + sq * c_out + sq * l * l;
    sink.add(join_name(name, "generators"), gen_params, gen_madds, 1, 1);
}

// ---------------------------------------------------------------------------

template <typename T>
DyConv<T>::DyConv(const DynamicConvSpec& spec, Initializer& init) : spec_(spec) {
    check_spec(spec_);
    if (spec_.experts < 1) {
        throw ConfigError("DYConv needs at least one expert");
    }
    for (int k = 0; k < spec_.experts; ++k) {
        experts_.push_back(
            make_graph<T>(spec_.rep_style, spec_.in_channels, spec_.out_channels, spec_.kernel, spec_.groups, init));
    }
    router_w_ = init.conv_weight<T>(spec_.in_channels, spec_.experts, 1, 1);
    router_b_ = init.conv_bias<T>(spec_.in_channels, spec_.experts, 1, 1);
}

template <typename T>
Var<T> DyConv<T>::routing(const Var<T>& x) const {
    return ad::channel_softmax(pointwise(ad::global_avg_pool(x), router_w_, router_b_));
}

template <typename T>
DynamicOutput<T> DyConv<T>::forward(const Var<T>& x, Mode mode) {
    const Var<T> pi = routing(x);
    Var<T> total;
    for (std::size_t k = 0; k < experts_.size(); ++k) {
        const Var<T> y = experts_[k].forward(x, mode).y;
        const Var<T> term = ad::mul(y, ad::slice_channels(pi, static_cast<int>(k), 1));
        total = total.defined() ? ad::add(total, term) : term;
    }
    return {total, zeros_like_output(total, spec_.out_channels)};
}

template <typename T>
void DyConv<T>::fuse() {
    for (auto& e : experts_) {
        e.fuse();
    }
}

template <typename T>
void DyConv<T>::visit(const std::string& prefix, const TensorVisitor<T>& visitor) {
    for (std::size_t k = 0; k < experts_.size(); ++k) {
        experts_[k].visit(join_name(prefix, "expert" + std::to_string(k)), visitor);
    }
    visitor(join_name(prefix, "router.weight"), router_w_, TensorRole::Parameter);
    visitor(join_name(prefix, "router.bias"), router_b_, TensorRole::Parameter);
}

template <typename T>
void DyConv<T>::visit_graphs(const std::string& prefix, const GraphVisitor<T>& visitor) {
    for (std::size_t k = 0; k < experts_.size(); ++k) {
        visitor(join_name(prefix, "expert" + std::to_string(k)), experts_[k]);
    }
}

template <typename T>
void DyConv<T>::cost(const std::string& name, int h, int w, CostSink& sink) const {
    const int in_c = spec_.in_channels;
    const int out_c = spec_.out_channels;
    const int k = spec_.kernel;
    const int g = spec_.groups;
    const std::int64_t n_exp = spec_.experts;
    if (sink.mode == CostMode::Training) {
        for (std::size_t e = 0; e < experts_.size(); ++e) {
            graph_cost(experts_[e], join_name(name, "expert" + std::to_string(e)), h, w, sink);
        }
    } else {
        const std::int64_t expert_params = conv_param_count(in_c, out_c, k, g, true);
        sink.add(join_name(name, "experts"), n_exp * expert_params, conv_madds(in_c, out_c, k, g, h, w), h, w);
        sink.add(join_name(name, "aggregation"), 0, n_exp * expert_params, 1, 1);
    }
    sink.add(join_name(name, "router"), static_cast<std::int64_t>(in_c) * n_exp + n_exp,
             static_cast<std::int64_t>(in_c) * n_exp, 1, 1);
}

template <typename T>
std::unique_ptr<DynamicConv<T>> make_dynamic_conv(const DynamicConvSpec& spec, Initializer& init) {
    switch (spec.conv_type) {
        case ConvType::Static: {
            DynamicConvSpec s = spec;
            s.latent = 0;
            return std::make_unique<DcdConv<T>>(s, init);
        }
        case ConvType::DCD:
            return std::make_unique<DcdConv<T>>(spec, init);
        case ConvType::DYConv:
            return std::make_unique<DyConv<T>>(spec, init);
    }
    throw ConfigError("unknown conv type");
}

template class DcdConv<float>;
template class DcdConv<double>;
template class DyConv<float>;
template class DyConv<double>;
template std::unique_ptr<DynamicConv<float>> make_dynamic_conv(const DynamicConvSpec&, Initializer&);
template std::unique_ptr<DynamicConv<double>> make_dynamic_conv(const DynamicConvSpec&, Initializer&);

}  // namespace lsr
