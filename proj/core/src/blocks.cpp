// SPDX-License-Identifier: Apache-2.0
#include "lsr/blocks.hpp"

#include "lsr/error.hpp"

namespace lsr {

template <typename T>
PlainConv<T> PlainConv<T>::make(Initializer& init, int in_c, int out_c, int kernel, int stride, int padding) {
    PlainConv conv;
    conv.weight = init.conv_weight<T>(in_c, out_c, kernel, 1);
    conv.bias = init.conv_bias<T>(in_c, out_c, kernel, 1);
    conv.geometry = ConvGeometry{stride, padding < 0 ? kernel / 2 : padding, 1};
    return conv;
}

template <typename T>
void PlainConv<T>::visit(const std::string& prefix, const TensorVisitor<T>& visitor) {
    visitor(join_name(prefix, "weight"), weight, TensorRole::Parameter);
    visitor(join_name(prefix, "bias"), bias, TensorRole::Parameter);
}

template <typename T>
std::pair<int, int> PlainConv<T>::cost(const std::string& name, int h, int w, CostSink& sink) const {
    const int k = kernel();
    const int oh = conv_output_extent(h, k, geometry.stride, geometry.padding);
    const int ow = conv_output_extent(w, k, geometry.stride, geometry.padding);
    sink.add(name, conv_param_count(in_channels(), out_channels(), k, geometry.groups, true),
             conv_madds(in_channels(), out_channels(), k, geometry.groups, oh, ow), oh, ow);
    return {oh, ow};
}

const char* to_string(RduArch arch) {
    switch (arch) {
        case RduArch::Base:
            return "base";
        case RduArch::SRB:
            return "srb";
        case RduArch::SCB:
            return "scb";
        case RduArch::RB:
            return "rb";
    }
    return "?";
}

RduArch parse_rdu_arch(const std::string& text) {
    if (text == "base") {
        return RduArch::Base;
    }
    if (text == "srb") {
        return RduArch::SRB;
    }
    if (text == "scb") {
        return RduArch::SCB;
    }
    if (text == "rb") {
        return RduArch::RB;
    }
    throw ConfigError("unknown RDU arch '" + text + "' (expected base, srb, scb or rb)");
}

// ---------------------------------------------------------------------------

template <typename T>
Var<T> concat_conv(std::span<const Var<T>> parts, const PlainConv<T>& conv) {
    if (parts.empty()) {
        throw ContractError("concat_conv needs at least one input");
    }
    if (parts.size() == 1) {
        return conv(parts.front());
    }
    return conv(ad::concat_channels(parts));
}

template <typename T>
Var<T> shallow_fusion(std::span<const Var<T>> residuals, const PlainConv<T>* conv) {
    if (residuals.empty()) {
        throw ContractError("shallow_fusion needs at least one residual");
    }
    if (residuals.size() == 1) {
        return conv != nullptr ? (*conv)(residuals.front()) : residuals.front();
    }
    if (conv == nullptr) {
        throw ContractError("shallow_fusion of several residuals needs a fusion conv");
    }
    return concat_conv(residuals, *conv);
}

template <typename T>
Var<T> sdf(std::span<const Var<T>> distilled, const PlainConv<T>& conv) {
    if (distilled.size() != 4) {
        throw ContractError("sdf expects 4 distilled tensors, got " + std::to_string(distilled.size()));
    }
    return concat_conv(distilled, conv);
}

template <typename T>
Var<T> ddf(std::span<const Var<T>> dynamic, const Var<T>& f_sdf, const PlainConv<T>& pa, const PlainConv<T>& fuse) {
    return ad::mul(ad::sigmoid(pa(f_sdf)), concat_conv(dynamic, fuse));
}

// ---------------------------------------------------------------------------

template <typename T>
Rdu<T>::Rdu(const RduConfig& cfg, Initializer& init) : cfg_(cfg) {
    const int c = cfg.channels;
    DynamicConvSpec spec;
    spec.in_channels = c;
    spec.out_channels = c;
    spec.kernel = cfg.kernel;
    spec.latent = cfg.latent;
    spec.rep_style = cfg.rep_style;
    spec.conv_type = cfg.conv_type;
    spec.experts = cfg.experts;
    switch (cfg.arch) {
        case RduArch::Base:
        case RduArch::SRB:
            units_.push_back(make_dynamic_conv<T>(spec, init));
            break;
        case RduArch::SCB:
            spec.groups = c;
            units_.push_back(make_dynamic_conv<T>(spec, init));
            pointwise_ = PlainConv<T>::make(init, c, c, 1);
            break;
        case RduArch::RB:
            units_.push_back(make_dynamic_conv<T>(spec, init));
            units_.push_back(make_dynamic_conv<T>(spec, init));
            fusion_ = PlainConv<T>::make(init, 2 * c, c, 1);
            break;
    }
}

template <typename T>
RduOutput<T> Rdu<T>::forward(const Var<T>& x, Mode mode) {
    if (x.shape().c != cfg_.channels) {
        throw DimensionError("RDU channel axis: expected " + std::to_string(cfg_.channels) + ", got " +
                             std::to_string(x.shape().c));
    }
    switch (cfg_.arch) {
        case RduArch::Base: {
            auto h = units_[0]->forward(x, mode);
            return {activate(h.static_out), h.dynamic};
        }
        case RduArch::SRB: {
            auto h = units_[0]->forward(x, mode);
            return {ad::add(activate(h.static_out), x), h.dynamic};
        }
        case RduArch::SCB: {
            auto h = units_[0]->forward(x, mode);
            return {activate(pointwise_(h.static_out)), h.dynamic};
        }
        case RduArch::RB: {
            auto inner = units_[0]->forward(x, mode);
            auto outer = units_[1]->forward(activate(inner.static_out), mode);
            const std::array<Var<T>, 2> residuals{outer.dynamic, inner.dynamic};
            return {ad::add(outer.static_out, x), shallow_fusion<T>(residuals, &fusion_)};
        }
    }
    throw ContractError("unknown RDU arch");
}

template <typename T>
void Rdu<T>::fuse() {
    for (auto& u : units_) {
        u->fuse();
    }
}

template <typename T>
void Rdu<T>::visit(const std::string& prefix, const TensorVisitor<T>& visitor) {
    for (std::size_t i = 0; i < units_.size(); ++i) {
        units_[i]->visit(join_name(prefix, "unit" + std::to_string(i)), visitor);
    }
    if (cfg_.arch == RduArch::SCB) {
        pointwise_.visit(join_name(prefix, "pointwise"), visitor);
    }
    if (cfg_.arch == RduArch::RB) {
        fusion_.visit(join_name(prefix, "fusion"), visitor);
    }
}

template <typename T>
void Rdu<T>::visit_graphs(const std::string& prefix, const GraphVisitor<T>& visitor) {
    for (std::size_t i = 0; i < units_.size(); ++i) {
        units_[i]->visit_graphs(join_name(prefix, "unit" + std::to_string(i)), visitor);
    }
}

template <typename T>
void Rdu<T>::cost(const std::string& name, int h, int w, CostSink& sink) const {
    for (std::size_t i = 0; i < units_.size(); ++i) {
        units_[i]->cost(join_name(name, "unit" + std::to_string(i)), h, w, sink);
    }
    if (cfg_.arch == RduArch::SCB) {
        pointwise_.cost(join_name(name, "pointwise"), h, w, sink);
    }
    if (cfg_.arch == RduArch::RB) {
        fusion_.cost(join_name(name, "fusion"), h, w, sink);
    }
}

// ---------------------------------------------------------------------------

template <typename T>
Esa<T>::Esa(int channels, Initializer& init) {
    if (channels < 4) {
        throw ConfigError("spatial attention needs at least 4 channels");
    }
    const int f = channels / 4;
    reduce = PlainConv<T>::make(init, channels, f, 1);
    strided = PlainConv<T>::make(init, f, f, 3, 2, 0);
    body = PlainConv<T>::make(init, f, f, 3);
    skip = PlainConv<T>::make(init, f, f, 1);
    expand = PlainConv<T>::make(init, f, channels, 1);
}

template <typename T>
Var<T> Esa<T>::forward(const Var<T>& x) const {
    const Shape& s = x.shape();
    if (s.h < kEsaMinExtent || s.w < kEsaMinExtent) {
        throw DimensionError("spatial attention needs inputs of at least " + std::to_string(kEsaMinExtent) + "x" +
                             std::to_string(kEsaMinExtent) + ", got " + std::to_string(s.h) + "x" +
                             std::to_string(s.w));
    }
    const Var<T> reduced = reduce(x);
    Var<T> v = strided(reduced);
    v = ad::max_pool2d(v, 7, 3);
    v = body(v);
    v = ad::bilinear_resize(v, s.h, s.w);
    const Var<T> gate = ad::sigmoid(expand(ad::add(v, skip(reduced))));
    return ad::mul(x, gate);
}

template <typename T>
void Esa<T>::visit(const std::string& prefix, const TensorVisitor<T>& visitor) {
    reduce.visit(join_name(prefix, "reduce"), visitor);
    strided.visit(join_name(prefix, "strided"), visitor);
    body.visit(join_name(prefix, "body"), visitor);
    skip.visit(join_name(prefix, "skip"), visitor);
    expand.visit(join_name(prefix, "expand"), visitor);
}

template <typename T>
void Esa<T>::cost(const std::string& name, int h, int w, CostSink& sink) const {
    reduce.cost(join_name(name, "reduce"), h, w, sink);
    const auto [sh, sw] = strided.cost(join_name(name, "strided"), h, w, sink);
    const int ph = (sh - 7) / 3 + 1;
    const int pw = (sw - 7) / 3 + 1;
    body.cost(join_name(name, "body"), ph, pw, sink);
    skip.cost(join_name(name, "skip"), h, w, sink);
    expand.cost(join_name(name, "expand"), h, w, sink);
}

// ---------------------------------------------------------------------------

bool block_has_ddf(const RepDfdbConfig& cfg) {
    return cfg.ddf && cfg.rdu.latent > 0 && cfg.rdu.conv_type == ConvType::DCD;
}

template <typename T>
RepDfdb<T>::RepDfdb(const RepDfdbConfig& cfg, Initializer& init) : cfg_(cfg), has_ddf_(block_has_ddf(cfg)) {
    const int c = cfg.rdu.channels;
    const int cd = cfg.distilled_channels;
    if (cd < 1) {
        throw ConfigError("distilled channels must be positive");
    }
    for (auto& r : rdus_) {
        r = std::make_unique<Rdu<T>>(cfg.rdu, init);
    }
    for (auto& d : distill_) {
        d = PlainConv<T>::make(init, c, cd, 1);
    }
    sdf_conv_ = PlainConv<T>::make(init, 4 * cd, c, 1);
    if (has_ddf_) {
        pa_conv_ = PlainConv<T>::make(init, c, c, 1);
        ddf_conv_ = PlainConv<T>::make(init, 4 * c, c, 1);
    }
    esa_ = std::make_unique<Esa<T>>(c, init);
}

template <typename T>
RepDfdbOutput<T> RepDfdb<T>::forward(const Var<T>& f_in, Mode mode) {
    RepDfdbOutput<T> out;
    Var<T> current = f_in;
    for (int step = 0; step < 3; ++step) {
        out.distilled[step] = distill_[step](current);
        RduOutput<T> r = rdus_[step]->forward(current, mode);
        out.statics[step] = r.static_out;
        out.dynamics[step] = r.dynamic;
        current = r.static_out;
    }
    out.dynamics[3] = f_in;
    out.distilled[3] = distill_[3](out.statics[2]);
    out.f_sdf = sdf<T>(out.distilled, sdf_conv_);
    Var<T> merged = out.f_sdf;
    if (has_ddf_) {
        out.f_ddf = ddf<T>(out.dynamics, out.f_sdf, pa_conv_, ddf_conv_);
        merged = ad::add(out.f_sdf, out.f_ddf);
    } else {
        out.f_ddf = ad::constant(BasicTensor<T>(f_in.shape()));
    }
    out.f = ad::add(esa_->forward(merged), f_in);
    return out;
}

template <typename T>
void RepDfdb<T>::fuse() {
    for (auto& r : rdus_) {
        r->fuse();
    }
}

template <typename T>
void RepDfdb<T>::visit(const std::string& prefix, const TensorVisitor<T>& visitor) {
    for (std::size_t i = 0; i < rdus_.size(); ++i) {
        rdus_[i]->visit(join_name(prefix, "rdu" + std::to_string(i)), visitor);
    }
    for (std::size_t i = 0; i < distill_.size(); ++i) {
        distill_[i].visit(join_name(prefix, "distill" + std::to_string(i)), visitor);
    }
    sdf_conv_.visit(join_name(prefix, "sdf"), visitor);
    if (has_ddf_) {
        pa_conv_.visit(join_name(prefix, "ddf_pa"), visitor);
        ddf_conv_.visit(join_name(prefix, "ddf_fuse"), visitor);
    }
    esa_->visit(join_name(prefix, "esa"), visitor);
}

template <typename T>
void RepDfdb<T>::visit_graphs(const std::string& prefix, const GraphVisitor<T>& visitor) {
    for (std::size_t i = 0; i < rdus_.size(); ++i) {
        rdus_[i]->visit_graphs(join_name(prefix, "rdu" + std::to_string(i)), visitor);
    }
}

template <typename T>
void RepDfdb<T>::cost(const std::string& name, int h, int w, CostSink& sink) const {
    for (std::size_t i = 0; i < rdus_.size(); ++i) {
        rdus_[i]->cost(join_name(name, "rdu" + std::to_string(i)), h, w, sink);
    }
    for (std::size_t i = 0; i < distill_.size(); ++i) {
        distill_[i].cost(join_name(name, "distill" + std::to_string(i)), h, w, sink);
    }
    sdf_conv_.cost(join_name(name, "sdf"), h, w, sink);
    if (has_ddf_) {
        pa_conv_.cost(join_name(name, "ddf_pa"), h, w, sink);
        ddf_conv_.cost(join_name(name, "ddf_fuse"), h, w, sink);
    }
    esa_->cost(join_name(name, "esa"), h, w, sink);
}

#define LSR_INSTANTIATE_BLOCKS(T)                                                                        \
    template struct PlainConv<T>;                                                                        \
    template class Rdu<T>;                                                                               \
    template class Esa<T>;                                                                               \
    template class RepDfdb<T>;                                                                           \
    template Var<T> concat_conv(std::span<const Var<T>>, const PlainConv<T>&);                           \
    template Var<T> shallow_fusion(std::span<const Var<T>>, const PlainConv<T>*);                        \
    template Var<T> sdf(std::span<const Var<T>>, const PlainConv<T>&);                                   \
    template Var<T> ddf(std::span<const Var<T>>, const Var<T>&, const PlainConv<T>&, const PlainConv<T>&);

LSR_INSTANTIATE_BLOCKS(float)
LSR_INSTANTIATE_BLOCKS(double)

#undef LSR_INSTANTIATE_BLOCKS

}  // namespace lsr
