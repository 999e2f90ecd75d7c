// SPDX-License-Identifier: Apache-2.0
//
// Building blocks of the network: the reparameterized dynamic unit (RDU), the
// fusion heads, spatial attention and the distillation block that chains
// three RDUs.
#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lsr/dynamic.hpp"

namespace lsr {

/// A plain convolution with bias and "same" padding unless stated otherwise.
template <typename T>
struct PlainConv {
    Var<T> weight;
    Var<T> bias;
    ConvGeometry geometry{};

    static PlainConv make(Initializer& init, int in_c, int out_c, int kernel, int stride = 1, int padding = -1);

    int in_channels() const { return weight.shape().c * geometry.groups; }
    int out_channels() const { return weight.shape().n; }
    int kernel() const { return weight.shape().h; }

    Var<T> operator()(const Var<T>& x) const { return ad::conv2d(x, weight, bias, geometry); }
    void visit(const std::string& prefix, const TensorVisitor<T>& visitor);
    /// Adds a row for an input of h x w; returns the output extent.
    std::pair<int, int> cost(const std::string& name, int h, int w, CostSink& sink) const;
};

enum class RduArch { Base, SRB, SCB, RB };

const char* to_string(RduArch arch);
RduArch parse_rdu_arch(const std::string& text);

struct RduConfig {
    RduArch arch = RduArch::Base;
    int channels = 56;
    int latent = 16;
    RepStyle rep_style = RepStyle::DBB;
    ConvType conv_type = ConvType::DCD;
    int experts = kDefaultExperts;
    double slope = kDefaultLeakySlope;
    int kernel = 3;
};

template <typename T>
struct RduOutput {
    Var<T> static_out;
    Var<T> dynamic;
};

/// Merges dynamic residuals: one residual passes through (or through `conv`
/// when given); several are concatenated and mixed by `conv`.
template <typename T>
Var<T> shallow_fusion(std::span<const Var<T>> residuals, const PlainConv<T>* conv);

/// Concatenates along channels and applies a 1 x 1 conv.
template <typename T>
Var<T> concat_conv(std::span<const Var<T>> parts, const PlainConv<T>& conv);

/// Static distillation fusion over exactly four distilled tensors.
template <typename T>
Var<T> sdf(std::span<const Var<T>> distilled, const PlainConv<T>& conv);

/// Dynamic distillation fusion: sigmoid(pa(f_sdf)) * fuse(concat(dynamic)).
template <typename T>
Var<T> ddf(std::span<const Var<T>> dynamic, const Var<T>& f_sdf, const PlainConv<T>& pa, const PlainConv<T>& fuse);

template <typename T>
class Rdu {
public:
    Rdu(const RduConfig& cfg, Initializer& init);

    RduOutput<T> forward(const Var<T>& x, Mode mode);
    void fuse();
    void visit(const std::string& prefix, const TensorVisitor<T>& visitor);
    void visit_graphs(const std::string& prefix, const GraphVisitor<T>& visitor);
    void cost(const std::string& name, int h, int w, CostSink& sink) const;

    const RduConfig& config() const { return cfg_; }
    /// Base/SRB/SCB hold one unit; RB holds [inner, outer].
    std::vector<std::unique_ptr<DynamicConv<T>>>& units() { return units_; }
    PlainConv<T>& pointwise() { return pointwise_; }
    PlainConv<T>& fusion() { return fusion_; }

private:
    Var<T> activate(const Var<T>& x) const { return ad::leaky_relu(x, static_cast<T>(cfg_.slope)); }

    RduConfig cfg_;
    std::vector<std::unique_ptr<DynamicConv<T>>> units_;
    PlainConv<T> pointwise_;  // SCB only
    PlainConv<T> fusion_;     // RB only
};

/// Smallest spatial extent the attention pooling chain accepts.
inline constexpr int kEsaMinExtent = 15;

template <typename T>
class Esa {
public:
    Esa(int channels, Initializer& init);

    Var<T> forward(const Var<T>& x) const;
    void visit(const std::string& prefix, const TensorVisitor<T>& visitor);
    void cost(const std::string& name, int h, int w, CostSink& sink) const;

    PlainConv<T> reduce;   // 1x1 C -> f
    PlainConv<T> strided;  // 3x3 stride 2, no padding
    PlainConv<T> body;     // 3x3 on the pooled map
    PlainConv<T> skip;     // 1x1 f -> f on the reduced map
    PlainConv<T> expand;   // 1x1 f -> C
};

struct RepDfdbConfig {
    RduConfig rdu;
    int distilled_channels = 28;
    bool ddf = true;
};

template <typename T>
struct RepDfdbOutput {
    Var<T> f;
    Var<T> f_ddf;
    std::array<Var<T>, 3> statics;
    std::array<Var<T>, 4> dynamics;
    std::array<Var<T>, 4> distilled;
    Var<T> f_sdf;
};

/// Whether a block built from cfg carries the dynamic fusion head.
bool block_has_ddf(const RepDfdbConfig& cfg);

template <typename T>
class RepDfdb {
public:
    RepDfdb(const RepDfdbConfig& cfg, Initializer& init);

    RepDfdbOutput<T> forward(const Var<T>& f_in, Mode mode);
    void fuse();
    void visit(const std::string& prefix, const TensorVisitor<T>& visitor);
    void visit_graphs(const std::string& prefix, const GraphVisitor<T>& visitor);
    void cost(const std::string& name, int h, int w, CostSink& sink) const;

    const RepDfdbConfig& config() const { return cfg_; }
    bool has_ddf() const { return has_ddf_; }
    std::array<std::unique_ptr<Rdu<T>>, 3>& rdus() { return rdus_; }
    std::array<PlainConv<T>, 4>& distill() { return distill_; }
    PlainConv<T>& sdf_conv() { return sdf_conv_; }
    PlainConv<T>& pa_conv() { return pa_conv_; }
    PlainConv<T>& ddf_conv() { return ddf_conv_; }
    Esa<T>& esa() { return *esa_; }

private:
    RepDfdbConfig cfg_;
    bool has_ddf_ = false;
    std::array<std::unique_ptr<Rdu<T>>, 3> rdus_;
    std::array<PlainConv<T>, 4> distill_;
    PlainConv<T> sdf_conv_;
    PlainConv<T> pa_conv_;
    PlainConv<T> ddf_conv_;
    std::unique_ptr<Esa<T>> esa_;
};

}  // namespace lsr
