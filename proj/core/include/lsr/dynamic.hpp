// SPDX-License-Identifier: Apache-2.0
//
// Input-dependent convolutions built on a reparameterizable static kernel.
//
// DcdConv computes
//   static_out = lambda(x) * (W x) + P phi(x) Q^T x + b
//   dynamic    = P phi(x) Q^T x
// where W, b come from a branch graph (fused or not), lambda(x) is a
// per-output-channel gate in (0, 2) and phi(x) is an L x L latent mixer.
// DyConv blends K expert kernels with softmax routing weights.
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lsr/autodiff.hpp"
#include "lsr/init.hpp"
#include "lsr/module.hpp"
#include "lsr/reparam.hpp"

namespace lsr {

inline constexpr int kSqueezeRatio = 4;
inline constexpr int kDefaultExperts = 4;

enum class ConvType { Static, DYConv, DCD };

const char* to_string(ConvType type);
ConvType parse_conv_type(const std::string& text);

/// Width of the shared squeeze layer of the attention generators.
inline int squeeze_width(int channels) {
    return channels / kSqueezeRatio > 0 ? channels / kSqueezeRatio : 1;
}

struct DynamicConvSpec {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
    /// Groups of the static kernel; the P/Q path is always dense.
    int groups = 1;
    int latent = 0;
    RepStyle rep_style = RepStyle::DBB;
    ConvType conv_type = ConvType::DCD;
    int experts = kDefaultExperts;
};

template <typename T>
struct DynamicOutput {
    Var<T> static_out;
    /// Zeros when the unit has no dynamic path.
    Var<T> dynamic;
};

template <typename T>
using GraphVisitor = std::function<void(const std::string& name, BranchGraph<T>& graph)>;

template <typename T>
class DynamicConv {
public:
    virtual ~DynamicConv() = default;

    virtual DynamicOutput<T> forward(const Var<T>& x, Mode mode) = 0;
    /// Collapses every branch graph; generators and P/Q are untouched.
    virtual void fuse() = 0;
    virtual void visit(const std::string& prefix, const TensorVisitor<T>& visitor) = 0;
    virtual void visit_graphs(const std::string& prefix, const GraphVisitor<T>& visitor) = 0;
    virtual void cost(const std::string& name, int h, int w, CostSink& sink) const = 0;
    virtual const DynamicConvSpec& spec() const = 0;
};

/// Per-sample attention of a DCD unit.
template <typename T>
struct DcdAttention {
    Var<T> lambda;  // (n, C_out, 1, 1)
    Var<T> phi;     // (n, L*L, 1, 1), row-major L x L
};

template <typename T>
class DcdConv final : public DynamicConv<T> {
public:
    DcdConv(const DynamicConvSpec& spec, Initializer& init);
    /// Wraps an existing static kernel source; generators start neutral.
    DcdConv(const DynamicConvSpec& spec, BranchGraph<T> graph, Initializer& init);

    DynamicOutput<T> forward(const Var<T>& x, Mode mode) override;
    void fuse() override { graph_.fuse(); }
    void visit(const std::string& prefix, const TensorVisitor<T>& visitor) override;
    void visit_graphs(const std::string& prefix, const GraphVisitor<T>& visitor) override;
    void cost(const std::string& name, int h, int w, CostSink& sink) const override;
    const DynamicConvSpec& spec() const override { return spec_; }

    int latent() const { return spec_.latent; }
    /// Requires latent() >= 1.
    DcdAttention<T> attention(const Var<T>& x) const;
    /// P phi Q^T x for a given attention.
    Var<T> dynamic_residual(const Var<T>& x, const DcdAttention<T>& att) const;

    BranchGraph<T>& graph() { return graph_; }
    Var<T>& p() { return p_; }
    Var<T>& q_t() { return q_t_; }
    Var<T>& fc1_weight() { return fc1_w_; }
    Var<T>& fc1_bias() { return fc1_b_; }
    Var<T>& fc2_weight() { return fc2_w_; }
    Var<T>& fc2_bias() { return fc2_b_; }
    Var<T>& phi_weight() { return phi_w_; }
    Var<T>& phi_bias() { return phi_b_; }

private:
    void init_dynamic(Initializer& init);

    DynamicConvSpec spec_;
    BranchGraph<T> graph_;
    Var<T> p_;    // (C_out, L, 1, 1)
    Var<T> q_t_;  // (L, C_in, 1, 1)
    Var<T> fc1_w_, fc1_b_;
    Var<T> fc2_w_, fc2_b_;
    Var<T> phi_w_, phi_b_;
};

template <typename T>
class DyConv final : public DynamicConv<T> {
public:
    DyConv(const DynamicConvSpec& spec, Initializer& init);

    DynamicOutput<T> forward(const Var<T>& x, Mode mode) override;
    void fuse() override;
    void visit(const std::string& prefix, const TensorVisitor<T>& visitor) override;
    void visit_graphs(const std::string& prefix, const GraphVisitor<T>& visitor) override;
    void cost(const std::string& name, int h, int w, CostSink& sink) const override;
    const DynamicConvSpec& spec() const override { return spec_; }

    /// Softmax routing weights (n, K, 1, 1).
    Var<T> routing(const Var<T>& x) const;
    std::vector<BranchGraph<T>>& experts() { return experts_; }
    Var<T>& router_weight() { return router_w_; }
    Var<T>& router_bias() { return router_b_; }

private:
    DynamicConvSpec spec_;
    std::vector<BranchGraph<T>> experts_;
    Var<T> router_w_;  // (K, C_in, 1, 1)
    Var<T> router_b_;  // (1, K, 1, 1)
};

/// Static conv type is a DCD unit with no latent space.
template <typename T>
std::unique_ptr<DynamicConv<T>> make_dynamic_conv(const DynamicConvSpec& spec, Initializer& init);

}  // namespace lsr
