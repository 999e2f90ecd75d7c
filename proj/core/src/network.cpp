// SPDX-License-Identifier: Apache-2.0
#include "lsr/network.hpp"

#include <iomanip>
#include <sstream>

#include "lsr/error.hpp"

namespace lsr {

template <typename T>
Model<T>::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Initializer init(seed);
    const int c = cfg_.channels;
    const int s = cfg_.scale;
    const RepDfdbConfig block_cfg = cfg_.block();
    has_global_ddf_ = block_has_ddf(block_cfg);

    head_ = PlainConv<T>::make(init, 3, c, 3);
    for (int b = 0; b < cfg_.blocks; ++b) {
        blocks_.push_back(std::make_unique<RepDfdb<T>>(block_cfg, init));
    }
    global_sdf_ = PlainConv<T>::make(init, cfg_.blocks * c, c, 1);
    if (has_global_ddf_) {
        global_pa_ = PlainConv<T>::make(init, c, c, 1);
        global_ddf_ = PlainConv<T>::make(init, cfg_.blocks * c, c, 1);
    }
    global_rdu_ = std::make_unique<Rdu<T>>(cfg_.rdu(), init);
    upsample_ = PlainConv<T>::make(init, c, 3 * s * s, 3);
    refine_ = PlainConv<T>::make(init, 3, 3, 3);
}

template <typename T>
Var<T> Model<T>::forward(const Var<T>& lr, Mode mode) {
    const Shape& s = lr.shape();
    if (s.c != 3) {
        throw DimensionError("channel axis: network input must have 3 channels, got " + std::to_string(s.c));
    }
    if (s.h < kMinInputExtent || s.w < kMinInputExtent) {
        throw DimensionError("input must be at least " + std::to_string(kMinInputExtent) + "x" +
                             std::to_string(kMinInputExtent) + ", got " + std::to_string(s.h) + "x" +
                             std::to_string(s.w));
    }
    const Var<T> features = head_(lr);
    std::vector<Var<T>> statics;
    std::vector<Var<T>> dynamics;
    Var<T> current = features;
    for (auto& block : blocks_) {
        RepDfdbOutput<T> out = block->forward(current, mode);
        statics.push_back(out.f);
        dynamics.push_back(out.f_ddf);
        current = out.f;
    }
    Var<T> fused = concat_conv<T>(statics, global_sdf_);
    if (has_global_ddf_) {
        fused = ad::add(fused, ddf<T>(dynamics, fused, global_pa_, global_ddf_));
    }
    const Var<T> body = ad::add(global_rdu_->forward(fused, mode).static_out, features);
    return refine_(ad::pixel_shuffle(upsample_(body), cfg_.scale));
}

template <typename T>
bool Model<T>::fuse() {
    if (fused_) {
        return false;
    }
    for (auto& block : blocks_) {
        block->fuse();
    }
    global_rdu_->fuse();
    fused_ = true;
    return true;
}

template <typename T>
void Model<T>::visit(const TensorVisitor<T>& visitor) {
    head_.visit("head", visitor);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        blocks_[b]->visit("block" + std::to_string(b), visitor);
    }
    global_sdf_.visit("global.sdf", visitor);
    if (has_global_ddf_) {
        global_pa_.visit("global.ddf_pa", visitor);
        global_ddf_.visit("global.ddf_fuse", visitor);
    }
    global_rdu_->visit("global.rdu", visitor);
    upsample_.visit("upsample", visitor);
    refine_.visit("refine", visitor);
}

template <typename T>
void Model<T>::visit_graphs(const GraphVisitor<T>& visitor) {
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        blocks_[b]->visit_graphs("block" + std::to_string(b), visitor);
    }
    global_rdu_->visit_graphs("global.rdu", visitor);
}

template <typename T>
void Model<T>::cost(int out_h, int out_w, CostSink& sink) const {
    const int s = cfg_.scale;
    const int h = out_h / s;
    const int w = out_w / s;
    head_.cost("head", h, w, sink);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        blocks_[b]->cost("block" + std::to_string(b), h, w, sink);
    }
    global_sdf_.cost("global.sdf", h, w, sink);
    if (has_global_ddf_) {
        global_pa_.cost("global.ddf_pa", h, w, sink);
        global_ddf_.cost("global.ddf_fuse", h, w, sink);
    }
    global_rdu_->cost("global.rdu", h, w, sink);
    upsample_.cost("upsample", h, w, sink);
    refine_.cost("refine", h * s, w * s, sink);
}

template <typename T>
std::vector<NamedParam<T>> Model<T>::parameters() {
    std::vector<NamedParam<T>> out;
    visit([&](const std::string& name, Var<T>& var, TensorRole role) {
        if (role == TensorRole::Parameter) {
            out.push_back({name, var});
        }
    });
    return out;
}

template <typename T>
BasicTensor<T> super_resolve(Model<T>& model, const BasicTensor<T>& lr) {
    NoGradGuard guard;
    return model.forward(ad::constant(lr), Mode::Eval).value();
}

template <typename T>
FuseStatus fuse_model(Model<T>& model) {
    return model.fuse() ? FuseStatus::Fused : FuseStatus::AlreadyFused;
}

template <typename T>
std::string describe_model(Model<T>& model) {
    const ModelConfig& cfg = model.config();
    std::ostringstream out;
    out << "variant " << to_string(cfg.variant) << ", x" << cfg.scale << ", C=" << cfg.channels
        << ", B=" << cfg.blocks << ", L=" << cfg.latent << ", C_d=" << cfg.effective_distilled() << "\n";
    out << "rdu " << to_string(cfg.arch) << ", rep " << to_string(cfg.rep_style) << ", conv "
        << to_string(cfg.conv_type) << ", slope " << cfg.slope << ", dynamic fusion "
        << (model.has_global_ddf() ? "on" : "off") << ", " << (model.is_fused() ? "fused" : "training structure")
        << "\n\n";

    std::vector<std::pair<std::string, std::string>> tags;
    model.visit_graphs([&](const std::string& name, BranchGraph<T>& g) {
        std::ostringstream shape;
        shape << g.tag() << " " << g.in_channels() << "->" << g.out_channels() << " k" << g.kernel();
        if (g.groups() > 1) {
            shape << " g" << g.groups();
        }
        shape << " (" << g.branches().size() << " branch" << (g.branches().size() == 1 ? "" : "es") << ")";
        tags.emplace_back(name, shape.str());
    });

    out << std::left << std::setw(44) << "tensor" << "shape\n";
    model.visit([&](const std::string& name, Var<T>& var, TensorRole role) {
        out << std::left << std::setw(44) << name << var.shape().str()
            << (role == TensorRole::Buffer ? "  [buffer]" : "") << "\n";
    });
    out << "\n" << std::left << std::setw(44) << "rep kernel" << "structure\n";
    for (const auto& [name, text] : tags) {
        out << std::left << std::setw(44) << name << text << "\n";
    }
    return out.str();
}

template class Model<float>;
template class Model<double>;
template BasicTensor<float> super_resolve(Model<float>&, const BasicTensor<float>&);
template BasicTensor<double> super_resolve(Model<double>&, const BasicTensor<double>&);
template FuseStatus fuse_model(Model<float>&);
template FuseStatus fuse_model(Model<double>&);
template std::string describe_model(Model<float>&);
template std::string describe_model(Model<double>&);

}  // namespace lsr
