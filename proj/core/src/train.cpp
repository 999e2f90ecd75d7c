// SPDX-License-Identifier: Apache-2.0
#include "lsr/train.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "lsr/error.hpp"

namespace lsr {

namespace {

struct Phase {
    long steps = 0;
    long first_step = 0;
    double lr_max = 0.0;
    double lr_min = 0.0;
    long period = 0;
    bool l2 = false;
};

void run_phase(Model<float>& model, const std::vector<PatchPair>& patches, const Phase& phase,
               const TrainConfig& cfg, std::mt19937_64& rng, std::vector<TraceEntry>& trace) {
    auto named = model.parameters();
    std::vector<Var<float>> vars;
    vars.reserve(named.size());
    for (auto& p : named) {
        vars.push_back(p.var);
    }
    AdamState<float> state;
    state.config = cfg.adam;
    std::uniform_int_distribution<std::size_t> pick(0, patches.size() - 1);
    std::uniform_int_distribution<int> pick_turn(0, 3);
    std::uniform_int_distribution<int> pick_flip(0, 1);

    for (long t = 0; t < phase.steps; ++t) {
        const PatchPair& pair = patches[pick(rng)];
        Tensor lr = pair.lr;
        Tensor hr = pair.hr;
        if (cfg.augment) {
            const int turns = pick_turn(rng);
            const bool flip = pick_flip(rng) == 1;
            lr = rotate_flip(lr, turns, flip);
            hr = rotate_flip(hr, turns, flip);
        }
        const double rate = cosine_lr(t, phase.period, phase.lr_max, phase.lr_min);
        const Var<float> sr = model.forward(ad::constant(std::move(lr)), Mode::Train);
        const Var<float> target = ad::constant(std::move(hr));
        const Var<float> loss = phase.l2 ? ad::mse_loss(sr, target) : ad::l1_loss(sr, target);
        const double value = loss.value()[0];
        const long step = phase.first_step + t;
        if (!std::isfinite(value)) {
            throw TrainingError("loss diverged (" + std::to_string(value) + ") at step " + std::to_string(step));
        }
        const auto grads = gradients(loss, std::span<Var<float>>(vars));
        adam_step<float>(named, grads, state, rate);
        trace.push_back({step, rate, value});
    }
}

}  // namespace

TrainResult train_toy(Model<float>& model, const std::vector<PatchPair>& patches, const TrainConfig& cfg) {
    if (model.is_fused()) {
        throw ContractError("train_toy needs a model in training structure");
    }
    if (cfg.steps < 0 || cfg.finetune_steps < 0 || cfg.period < 0) {
        throw ConfigError("step counts and period must be non-negative");
    }
    TrainResult result;
    if (cfg.steps == 0 && cfg.finetune_steps == 0) {
        return result;
    }
    if (patches.empty()) {
        throw DataError("training needs at least one patch");
    }
    std::mt19937_64 rng(cfg.seed);
    if (cfg.steps > 0) {
        Phase l1{cfg.steps, 0, cfg.lr_max, cfg.lr_min, cfg.period > 0 ? cfg.period : cfg.steps, false};
        run_phase(model, patches, l1, cfg, rng, result.trace);
        result.l1_steps = cfg.steps;
    }
    if (cfg.finetune_steps > 0) {
        fuse_model(model);
        result.fused = true;
        Phase l2{cfg.finetune_steps, cfg.steps, cfg.finetune_lr, cfg.lr_min, cfg.finetune_steps, true};
        run_phase(model, patches, l2, cfg, rng, result.trace);
    }
    return result;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceEntry>& trace) {
    out << "step,lr,loss\n";
    for (const auto& e : trace) {
        out << e.step << "," << std::setprecision(9) << e.lr << "," << std::setprecision(9) << e.loss << "\n";
    }
}

}  // namespace lsr
