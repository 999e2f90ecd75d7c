// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lsr/checkpoint.hpp"
#include "lsr/degrade.hpp"
#include "lsr/error.hpp"
#include "lsr/gradcheck.hpp"
#include "lsr/image.hpp"
#include "lsr/metrics.hpp"
#include "lsr/network.hpp"
#include "lsr/profile.hpp"
#include "lsr/train.hpp"

namespace lsr::cli {

namespace fs = std::filesystem;

namespace {

/// Largest output deviation `fuse` accepts between the two structures.
constexpr double kFuseTolerance = 1e-3;
constexpr int kFuseProbeExtent = 32;

bool is_png(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png";
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw DataError("not a directory: " + dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_png(entry.path())) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        return a.filename().string() < b.filename().string();
    });
    return files;
}

void require_exists(const fs::path& p) {
    if (!fs::exists(p)) {
        throw DataError("no such file or directory: " + p.string());
    }
}

/// Pairs input files with output files: one file to one file, or every PNG of
/// a directory to the same name under the output directory.
std::vector<std::pair<fs::path, fs::path>> io_pairs(const fs::path& in, const fs::path& out) {
    require_exists(in);
    if (!fs::is_directory(in)) {
        return {{in, out}};
    }
    const auto files = list_pngs(in);
    if (files.empty()) {
        throw DataError("no PNG files in " + in.string());
    }
    fs::create_directories(out);
    std::vector<std::pair<fs::path, fs::path>> pairs;
    for (const auto& f : files) {
        pairs.emplace_back(f, out / f.filename());
    }
    return pairs;
}

std::pair<int, int> parse_size(const std::string& text) {
    const auto x = text.find_first_of("xX");
    try {
        if (x == std::string::npos) {
            throw std::invalid_argument(text);
        }
        std::size_t used_w = 0;
        std::size_t used_h = 0;
        const std::string ws = text.substr(0, x);
        const std::string hs = text.substr(x + 1);
        const int w = std::stoi(ws, &used_w);
        const int h = std::stoi(hs, &used_h);
        if (used_w != ws.size() || used_h != hs.size() || w <= 0 || h <= 0) {
            throw std::invalid_argument(text);
        }
        return {w, h};
    } catch (const std::logic_error&) {
        throw ConfigError("--out-size expects WxH with positive integers, got '" + text + "'");
    }
}

void check_scale(int scale) {
    if (scale < 2 || scale > 4) {
        throw ConfigError("--scale must be 2, 3 or 4, got " + std::to_string(scale));
    }
}

Tensor probe_input(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    Tensor t(Shape{1, 3, kFuseProbeExtent, kFuseProbeExtent});
    for (auto& v : t.data()) {
        v = dist(rng);
    }
    return t;
}

struct DescribeArgs {
    std::string config;
};

int cmd_describe(const DescribeArgs& a, std::ostream& out) {
    const ModelConfig cfg = load_model_config(a.config);
    Model<float> model(cfg, 0);
    out << describe_model(model);
    return kOk;
}

struct CountArgs {
    std::string config;
    std::string out_size = "1280x720";
    std::string mode = "inference";
    bool csv = false;
};

int cmd_count(const CountArgs& a, std::ostream& out) {
    const CostMode mode = parse_cost_mode(a.mode);
    const auto [w, h] = parse_size(a.out_size);
    const ModelConfig cfg = load_model_config(a.config);
    if (h % cfg.scale != 0 || w % cfg.scale != 0) {
        throw ConfigError("--out-size must be divisible by the scale " + std::to_string(cfg.scale));
    }
    Model<float> model(cfg, 0);
    const CostReport report = profile_model(model, mode, h, w);
    out << (a.csv ? report.to_csv() : report.to_table());
    return kOk;
}

struct DegradeArgs {
    std::string mode;
    int scale = 4;
    std::uint64_t seed = 0;
    std::string input;
    std::string output;
};

int cmd_degrade(const DegradeArgs& a, std::ostream& out) {
    const Degradation mode = parse_degradation(a.mode);
    check_scale(a.scale);
    std::uint64_t index = 0;
    for (const auto& [src, dst] : io_pairs(a.input, a.output)) {
        // Each file draws from its own stream so results do not depend on batch composition.
        const std::uint64_t seed = a.seed + index++;
        write_png(dst.string(), degrade(read_png(src.string()), mode, a.scale, seed));
        out << src.string() << " -> " << dst.string() << "\n";
    }
    return kOk;
}

struct InferArgs {
    std::string ckpt;
    std::string input;
    std::string output;
};

int cmd_infer(const InferArgs& a, std::ostream& out) {
    require_exists(a.input);
    Model<float> model = load_checkpoint(a.ckpt);
    for (const auto& [src, dst] : io_pairs(a.input, a.output)) {
        const Tensor sr = super_resolve(model, read_png(src.string()));
        if (!sr.all_finite()) {
            throw TrainingError("non-finite output for " + src.string());
        }
        write_png(dst.string(), sr);
        out << src.string() << " -> " << dst.string() << "\n";
    }
    return kOk;
}

struct FuseArgs {
    std::string input;
    std::string output;
};

int cmd_fuse(const FuseArgs& a, std::ostream& out) {
    Model<float> model = load_checkpoint(a.input);
    const Tensor probe = probe_input(0);
    const Tensor before = super_resolve(model, probe);
    if (fuse_model(model) == FuseStatus::AlreadyFused) {
        out << "already fused; writing unchanged\n";
    } else {
        const double diff = max_abs_diff(before, super_resolve(model, probe));
        if (!(diff <= kFuseTolerance)) {
            throw FusionError("fused output deviates by " + std::to_string(diff));
        }
        out << "fused; max output deviation " << std::scientific << std::setprecision(3) << diff << "\n";
    }
    save_checkpoint(model, a.output);
    return kOk;
}

struct EvalArgs {
    std::string hr;
    std::string sr;
    int shave = 0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    if (a.shave < 0) {
        throw ConfigError("--shave must be non-negative");
    }
    require_exists(a.hr);
    require_exists(a.sr);
    MetricConfig mc;
    mc.shave = a.shave;
    std::vector<std::pair<fs::path, fs::path>> pairs;
    if (fs::is_directory(a.hr)) {
        for (const auto& hr : list_pngs(a.hr)) {
            const fs::path sr = fs::path(a.sr) / hr.filename();
            if (!fs::exists(sr)) {
                throw DataError("no SR counterpart for " + hr.filename().string());
            }
            pairs.emplace_back(hr, sr);
        }
    } else {
        pairs.emplace_back(a.hr, a.sr);
    }
    std::vector<MetricRow> rows;
    for (const auto& [hr, sr] : pairs) {
        rows.push_back(evaluate_pair(read_png(sr.string()), read_png(hr.string()), mc, hr.filename().string()));
    }
    out << metrics_csv(rows);
    return kOk;
}

struct TrainArgs {
    std::string config;
    std::string data;
    long steps = 2000;
    std::uint64_t seed = 0;
    std::string out;
    std::string trace;
    std::string degradation = "bi";
    int patch = kDefaultLrPatch;
    int patches_per_image = 8;
    bool augment = false;
    long finetune_steps = 0;
    double lr = kDefaultLrMax;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    const Degradation mode = parse_degradation(a.degradation);
    if (a.steps < 0 || a.finetune_steps < 0 || a.patch < 1 || a.patches_per_image < 1 || !(a.lr > 0.0)) {
        throw ConfigError("steps must be non-negative; patch, patches-per-image and lr positive");
    }
    const ModelConfig cfg = load_model_config(a.config);
    const auto files = list_pngs(a.data);
    if (files.empty()) {
        throw DataError("no PNG files in " + a.data);
    }
    std::vector<PatchPair> patches;
    std::uint64_t index = 0;
    for (const auto& f : files) {
        const Tensor hr = crop_to_multiple(read_png(f.string()), cfg.scale);
        const Tensor lr = degrade(hr, mode, cfg.scale, a.seed + index);
        auto some = extract_patches(hr, lr, cfg.scale, a.patch, a.patches_per_image, a.seed + index, false);
        patches.insert(patches.end(), std::make_move_iterator(some.begin()), std::make_move_iterator(some.end()));
        ++index;
    }
    Model<float> model(cfg, a.seed);
    TrainConfig tc;
    tc.steps = a.steps;
    tc.seed = a.seed;
    tc.augment = a.augment;
    tc.finetune_steps = a.finetune_steps;
    tc.lr_max = a.lr;
    const TrainResult result = train_toy(model, patches, tc);
    if (a.trace.empty()) {
        write_trace_csv(out, result.trace);
    } else {
        std::ofstream trace(a.trace);
        if (!trace) {
            throw DataError("cannot open " + a.trace + " for writing");
        }
        write_trace_csv(trace, result.trace);
    }
    save_checkpoint(model, a.out);
    if (!result.trace.empty()) {
        err << "final loss " << result.trace.back().loss << ", checkpoint " << a.out << "\n";
    }
    return kOk;
}

struct GradcheckArgs {
    std::uint64_t seed = 0;
    std::size_t entries = GradCheckOptions{}.max_entries;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
    if (a.entries == 0) {
        throw ConfigError("--entries must be positive");
    }
    GradCheckOptions opts;
    opts.seed = a.seed;
    opts.max_entries = a.entries;
    bool ok = true;
    out << std::left << std::setw(24) << "case" << std::setw(14) << "max_rel_err" << std::setw(11) << "tolerance"
        << std::setw(9) << "entries" << std::setw(7) << "kinks" << std::setw(6) << "ok"
        << "worst\n";
    for (const auto& r : run_gradcheck_suite(opts)) {
        ok = ok && r.passed();
        out << std::left << std::setw(24) << r.name << std::setw(14) << std::scientific << std::setprecision(3)
            << r.max_rel_error << std::setw(11) << std::setprecision(0) << r.tolerance << std::setw(9) << r.entries
            << std::setw(7) << r.kinks_skipped << std::setw(6) << (r.passed() ? "yes" : "NO") << r.worst_entry
            << "\n";
    }
    return ok ? kOk : kNumeric;
}

int exit_code_for(const Error& e) {
    if (dynamic_cast<const ConfigError*>(&e) != nullptr) {
        return kUsage;
    }
    if (dynamic_cast<const TrainingError*>(&e) != nullptr || dynamic_cast<const FusionError*>(&e) != nullptr) {
        return kNumeric;
    }
    return kData;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Lightweight super-resolution toolkit"};
    app.name("lsr");
    app.require_subcommand(1);

    DescribeArgs describe;
    auto* describe_cmd = app.add_subcommand("describe", "Print the layer-by-layer architecture");
    describe_cmd->add_option("--config", describe.config, "Model config (JSON)")->required();

    CountArgs count;
    auto* count_cmd = app.add_subcommand("count", "Parameter and MAdds table");
    count_cmd->add_option("--config", count.config, "Model config (JSON)")->required();
    count_cmd->add_option("--out-size", count.out_size, "Output resolution WxH")->capture_default_str();
    count_cmd->add_option("--mode", count.mode, "training or inference")->capture_default_str();
    count_cmd->add_flag("--csv", count.csv, "CSV instead of a table");

    DegradeArgs deg;
    auto* degrade_cmd = app.add_subcommand("degrade", "Produce LR images (bi, bd or dn)");
    degrade_cmd->add_option("--mode", deg.mode, "bi, bd or dn")->required();
    degrade_cmd->add_option("--scale", deg.scale, "2, 3 or 4")->capture_default_str();
    degrade_cmd->add_option("--seed", deg.seed, "Noise seed")->capture_default_str();
    degrade_cmd->add_option("input", deg.input, "HR PNG or directory")->required();
    degrade_cmd->add_option("output", deg.output, "LR PNG or directory")->required();

    InferArgs infer;
    auto* infer_cmd = app.add_subcommand("infer", "Super-resolve PNGs with a checkpoint");
    infer_cmd->add_option("--ckpt", infer.ckpt, "Checkpoint (fused or not)")->required();
    infer_cmd->add_option("input", infer.input, "LR PNG or directory")->required();
    infer_cmd->add_option("output", infer.output, "SR PNG or directory")->required();

    FuseArgs fuse;
    auto* fuse_cmd = app.add_subcommand("fuse", "Collapse training branches into plain convolutions");
    fuse_cmd->add_option("--in", fuse.input, "Input checkpoint")->required();
    fuse_cmd->add_option("--out", fuse.output, "Output checkpoint")->required();

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM on luma as CSV");
    eval_cmd->add_option("--hr", eval.hr, "HR directory (or file)")->required();
    eval_cmd->add_option("--sr", eval.sr, "SR directory (or file)")->required();
    eval_cmd->add_option("--shave", eval.shave, "Border pixels to exclude, usually the scale")->required();

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train-toy", "Toy-scale training with a loss trace");
    train_cmd->add_option("--config", train.config, "Model config (JSON)")->required();
    train_cmd->add_option("--data", train.data, "Directory of HR PNGs")->required();
    train_cmd->add_option("--steps", train.steps, "L1 steps")->capture_default_str();
    train_cmd->add_option("--seed", train.seed, "Seed for init, degradation and sampling")->capture_default_str();
    train_cmd->add_option("--out", train.out, "Checkpoint to write")->required();
    train_cmd->add_option("--trace", train.trace, "Loss trace CSV (default: standard output)");
    train_cmd->add_option("--degradation", train.degradation, "bi, bd or dn")->capture_default_str();
    train_cmd->add_option("--patch", train.patch, "LR patch size")->capture_default_str();
    train_cmd->add_option("--patches-per-image", train.patches_per_image, "Patches per image")->capture_default_str();
    train_cmd->add_flag("--augment", train.augment, "Random rotation and flip per step");
    train_cmd->add_option("--finetune-steps", train.finetune_steps, "L2 steps after fusion")->capture_default_str();
    train_cmd->add_option("--lr", train.lr, "Peak learning rate")->capture_default_str();

    GradcheckArgs grad;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
    grad_cmd->add_option("--seed", grad.seed, "Seed for inputs and sampling")->capture_default_str();
    grad_cmd->add_option("--entries", grad.entries, "Entries probed per tensor")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*describe_cmd) {
            return cmd_describe(describe, out);
        }
        if (*count_cmd) {
            return cmd_count(count, out);
        }
        if (*degrade_cmd) {
            return cmd_degrade(deg, out);
        }
        if (*infer_cmd) {
            return cmd_infer(infer, out);
        }
        if (*fuse_cmd) {
            return cmd_fuse(fuse, out);
        }
        if (*eval_cmd) {
            return cmd_eval(eval, out);
        }
        if (*train_cmd) {
            return cmd_train(train, out, err);
        }
        if (*grad_cmd) {
            return cmd_gradcheck(grad, out);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kData;
    }
    return kUsage;
}

}  // namespace lsr::cli
