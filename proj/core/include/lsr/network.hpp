// SPDX-License-Identifier: Apache-2.0
//
// The full super-resolution network:
//   feature extraction (3x3, 3 -> C)
//   B distillation blocks chained on their outputs F_b
//   global fusion: 1x1 over concat(F_1..F_B), optionally gated by a global
//     dynamic fusion of the block-level dynamic maps, then one RDU
//   global skip from the extracted features
//   upsampling: 3x3 (C -> 3 s^2), pixel shuffle, 3x3 refine (3 -> 3)
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lsr/blocks.hpp"
#include "lsr/optim.hpp"

namespace lsr {

enum class Variant { Full, Small, Custom };

const char* to_string(Variant v);
Variant parse_variant(const std::string& text);

/// Minimum LR height and width accepted by the network.
inline constexpr int kMinInputExtent = 16;

struct ModelConfig {
    int scale = 4;
    int channels = 56;
    int blocks = 4;
    int latent = 16;
    Variant variant = Variant::Full;
    RduArch arch = RduArch::Base;
    RepStyle rep_style = RepStyle::DBB;
    ConvType conv_type = ConvType::DCD;
    int experts = kDefaultExperts;
    /// 0 selects channels / 2.
    int distilled_channels = 0;
    double slope = kDefaultLeakySlope;
    bool ddf = true;

    /// Base RDUs, L = 16, dynamic fusion on.
    static ModelConfig full(int scale);
    /// SCB RDUs, L = 8, dynamic fusion off.
    static ModelConfig small(int scale);

    /// Throws ConfigError on out-of-range values or a variant conflict.
    void validate() const;
    int effective_distilled() const { return distilled_channels > 0 ? distilled_channels : channels / 2; }
    RduConfig rdu() const;
    RepDfdbConfig block() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Structured-text form. Unknown keys are ConfigErrors; omitted keys take the
/// variant defaults.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);
ModelConfig load_model_config(const std::string& path);

template <typename T>
class Model {
public:
    Model(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    bool is_fused() const { return fused_; }

    Var<T> forward(const Var<T>& lr, Mode mode);
    /// Returns false when the model was already fused.
    bool fuse();

    void visit(const TensorVisitor<T>& visitor);
    void visit_graphs(const GraphVisitor<T>& visitor);
    /// Rows for an HR output of out_h x out_w.
    void cost(int out_h, int out_w, CostSink& sink) const;
    /// Trainable tensors in traversal order.
    std::vector<NamedParam<T>> parameters();

    PlainConv<T>& head() { return head_; }
    std::vector<std::unique_ptr<RepDfdb<T>>>& blocks() { return blocks_; }
    bool has_global_ddf() const { return has_global_ddf_; }
    PlainConv<T>& global_sdf() { return global_sdf_; }
    PlainConv<T>& global_pa() { return global_pa_; }
    PlainConv<T>& global_ddf() { return global_ddf_; }
    Rdu<T>& global_rdu() { return *global_rdu_; }
    PlainConv<T>& upsample() { return upsample_; }
    PlainConv<T>& refine() { return refine_; }

private:
    ModelConfig cfg_;
    bool fused_ = false;
    bool has_global_ddf_ = false;
    PlainConv<T> head_;
    std::vector<std::unique_ptr<RepDfdb<T>>> blocks_;
    PlainConv<T> global_sdf_;
    PlainConv<T> global_pa_;
    PlainConv<T> global_ddf_;
    std::unique_ptr<Rdu<T>> global_rdu_;
    PlainConv<T> upsample_;
    PlainConv<T> refine_;
};

template <typename T>
Model<T> build_model(const ModelConfig& cfg, std::uint64_t seed) {
    return Model<T>(cfg, seed);
}

/// Eval-mode forward without graph recording. lr is n x 3 x h x w.
template <typename T>
BasicTensor<T> super_resolve(Model<T>& model, const BasicTensor<T>& lr);

enum class FuseStatus { Fused, AlreadyFused };

template <typename T>
FuseStatus fuse_model(Model<T>& model);

/// Layer-by-layer listing of the architecture.
template <typename T>
std::string describe_model(Model<T>& model);

}  // namespace lsr
