// SPDX-License-Identifier: Apache-2.0
//
// Reparameterizable branch graphs and the algebra that collapses them into a
// single static convolution.
//
// Border semantics: whenever a node pads an intermediate feature, the pad ring
// holds that feature's zero response (the constant it takes for an all-zero
// graph input) instead of zero. Every node is affine, so the zero response is
// a per-channel constant and the whole graph is exactly one affine k x k
// convolution of the zero-padded input, at every pixel.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lsr/autodiff.hpp"
#include "lsr/init.hpp"
#include "lsr/module.hpp"
#include "lsr/tensor.hpp"

namespace lsr {

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;
/// Conv-like stages (Conv, AvgPool, Identity) allowed in one branch.
inline constexpr int kMaxBranchStages = 3;

enum class RepStyle { Static, RepVGG, DBB };

const char* to_string(RepStyle style);
RepStyle parse_rep_style(const std::string& text);

/// Eval-mode batch normalization constants.
template <typename T>
struct BnParams {
    BasicTensor<T> gamma;
    BasicTensor<T> beta;
    BasicTensor<T> mean;
    BasicTensor<T> var;
    double eps = kBatchNormEps;
};

template <typename T>
struct BatchNorm {
    Var<T> gamma;
    Var<T> beta;
    Var<T> running_mean;  // buffer
    Var<T> running_var;   // buffer
    double eps = kBatchNormEps;
    double momentum = kBatchNormMomentum;

    /// gamma = 1, beta = 0, mean = 0, var = 1.
    static BatchNorm fresh(int channels);
    BnParams<T> params() const;
    int channels() const { return gamma.shape().c; }
};

enum class NodeKind { Conv, BatchNorm, AvgPool, Identity, Scale };

const char* to_string(NodeKind kind);

template <typename T>
struct BranchNode {
    NodeKind kind = NodeKind::Identity;
    // Conv
    Var<T> weight;
    Var<T> bias;  // may be undefined
    ConvGeometry geometry{};
    // BatchNorm
    BatchNorm<T> bn;
    // AvgPool
    int pool_kernel = 0;
    // Scale, shape (1, C, 1, 1)
    Var<T> scale;

    static BranchNode make_conv(Var<T> weight, Var<T> bias, ConvGeometry geometry);
    static BranchNode make_bn(BatchNorm<T> bn);
    static BranchNode make_avg_pool(int kernel);
    static BranchNode make_identity();
    static BranchNode make_scale(Var<T> scale);

    bool is_stage() const {
        return kind == NodeKind::Conv || kind == NodeKind::AvgPool || kind == NodeKind::Identity;
    }
};

template <typename T>
struct Branch {
    std::vector<BranchNode<T>> nodes;
};

/// Output of a branch graph: y, plus the per-channel zero response (1, D, 1, 1)
/// which equals the fused bias.
template <typename T>
struct AffineOutput {
    Var<T> y;
    Var<T> zero_response;
};

/// A parallel sum of sequential branches that maps C input channels to D
/// output channels with a "same"-padded k x k footprint.
template <typename T>
class BranchGraph {
public:
    BranchGraph() = default;
    BranchGraph(int in_channels, int out_channels, int kernel, int groups, std::string tag);

    int in_channels() const { return in_channels_; }
    int out_channels() const { return out_channels_; }
    int kernel() const { return kernel_; }
    int groups() const { return groups_; }
    /// Structure tag stored in checkpoints: static, repvgg, dbb or fused.
    const std::string& tag() const { return tag_; }
    bool is_fused() const { return tag_ == "fused"; }

    std::vector<Branch<T>>& branches() { return branches_; }
    const std::vector<Branch<T>>& branches() const { return branches_; }

    /// Train mode normalizes with batch statistics and updates running
    /// averages; Eval mode uses the running statistics.
    AffineOutput<T> forward(const Var<T>& x, Mode mode);

    /// Replaces the branches by the single fused convolution (tag "fused").
    void fuse();

    void visit(const std::string& prefix, const TensorVisitor<T>& visitor);
    std::int64_t param_count() const;
    /// Per-conv MAdds of the current structure for an h x w input.
    std::int64_t madds(int h, int w) const;

    static BranchGraph from_conv(const ConvParams<T>& conv, std::string tag = "fused");

private:
    int in_channels_ = 0;
    int out_channels_ = 0;
    int kernel_ = 0;
    int groups_ = 1;
    std::string tag_;
    std::vector<Branch<T>> branches_;
};

// ---------------------------------------------------------------------------
// Fusion algebra. Everything below works on plain tensors.

template <typename T>
ConvParams<T> fuse_conv_bn(const ConvParams<T>& conv, const BnParams<T>& bn);

/// Zero-pads the kernel symmetrically to k_target and sets padding k_target/2.
template <typename T>
ConvParams<T> embed_kernel(const ConvParams<T>& p, int k_target);

/// Grouped Dirac 1 x 1 kernel.
template <typename T>
ConvParams<T> identity_as_conv(int channels, int groups);

/// k x k average pool (stride 1, padding k/2) as a grouped convolution.
template <typename T>
ConvParams<T> avg_pool_as_conv(int channels, int kernel, int groups);

/// Composes first (1 x 1, stride 1, no padding) followed by second.
template <typename T>
ConvParams<T> fuse_sequential(const ConvParams<T>& first, const ConvParams<T>& second);

template <typename T>
ConvParams<T> fuse_parallel_sum(std::span<const ConvParams<T>> branches);

template <typename T>
ConvParams<T> fuse_branch_graph(const BranchGraph<T>& graph);

/// Plain parameters of a Conv node; a missing bias becomes zeros.
template <typename T>
ConvParams<T> conv_params_of(const BranchNode<T>& conv_node);

// ---------------------------------------------------------------------------
// Builders.

/// One k x k convolution with bias.
template <typename T>
BranchGraph<T> make_static_graph(int in_c, int out_c, int kernel, int groups, Initializer& init);

/// k x k-BN, 1 x 1-BN and (when in_c == out_c) Identity-BN.
template <typename T>
BranchGraph<T> make_repvgg_graph(int in_c, int out_c, int kernel, int groups, Initializer& init);

/// k x k-BN, 1 x 1-BN, 1 x 1-BN-AvgPool and 1 x 1-BN-k x k-BN, bias-free convs.
template <typename T>
BranchGraph<T> make_dbb_graph(int in_c, int out_c, int kernel, int groups, Initializer& init);

template <typename T>
BranchGraph<T> make_graph(RepStyle style, int in_c, int out_c, int kernel, int groups, Initializer& init);

}  // namespace lsr
