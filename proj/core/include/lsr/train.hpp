// SPDX-License-Identifier: Apache-2.0
//
// Toy-scale training: L1 optimization with Adam and a cosine schedule, then an
// optional L2 fine-tune of the fused model.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lsr/degrade.hpp"
#include "lsr/network.hpp"
#include "lsr/optim.hpp"

namespace lsr {

struct TrainConfig {
    long steps = 2000;
    double lr_max = kDefaultLrMax;
    double lr_min = kDefaultLrMin;
    long period = 0;  // cosine period; 0 means `steps`
    std::uint64_t seed = 0;
    bool augment = false;  // seeded rotation then flip per step
    long finetune_steps = 0;  // L2 steps after fusion; 0 skips fusion
    double finetune_lr = 1e-5;
    AdamConfig adam{};
};

struct TraceEntry {
    long step = 0;
    double lr = 0.0;
    double loss = 0.0;
};

struct TrainResult {
    std::vector<TraceEntry> trace;  // L1 phase, then fine-tune phase
    long l1_steps = 0;
    bool fused = false;
};

/// Trains on `patches` (one per step, chosen with a generator seeded by
/// cfg.seed). Requires an unfused model. A non-finite loss throws
/// TrainingError naming the step.
TrainResult train_toy(Model<float>& model, const std::vector<PatchPair>& patches, const TrainConfig& cfg);

/// "step,lr,loss" header plus one row per entry.
void write_trace_csv(std::ostream& out, const std::vector<TraceEntry>& trace);

}  // namespace lsr
