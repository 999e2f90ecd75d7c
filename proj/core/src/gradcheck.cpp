// SPDX-License-Identifier: Apache-2.0
#include "lsr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lsr/blocks.hpp"
#include "lsr/network.hpp"

namespace lsr {

namespace {

double probe(const std::vector<Var<double>>& outs, const std::vector<Tensor64>& weights) {
    double total = 0.0;
    for (std::size_t i = 0; i < outs.size(); ++i) {
        const auto v = outs[i].value().data();
        const auto r = weights[i].data();
        for (std::size_t j = 0; j < v.size(); ++j) {
            total += v[j] * r[j];
        }
    }
    return total;
}

double evaluate(const Forward64& forward, const std::vector<Tensor64>& weights) {
    NoGradGuard guard;
    return probe(forward(), weights);
}

std::vector<std::size_t> probe_order(std::size_t numel, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(numel);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

/// f holds values at -2h, -h, 0, h, 2h. A kink inside the stencil makes the
/// h and 2h estimates of either the first or the second derivative disagree.
bool near_kink(const double f[5], double h) {
    const double d1 = (f[3] - f[1]) / (2.0 * h);
    const double d2 = (f[4] - f[0]) / (4.0 * h);
    if (std::abs(d1 - d2) > kKinkThreshold * std::max(std::abs(d1), std::abs(d2)) + 1e-9) {
        return true;
    }
    const double s1 = (f[3] - 2.0 * f[2] + f[1]) / (h * h);
    const double s2 = (f[4] - 2.0 * f[2] + f[0]) / (4.0 * h * h);
    return std::abs(s1 - s2) > kCurvatureThreshold * std::max(std::abs(s1), std::abs(s2)) + 1e-5;
}

}  // namespace

GradCheckReport grad_check(const std::string& name, const Forward64& forward, std::vector<NamedParam<double>> inputs,
                           const GradCheckOptions& opts, double tolerance) {
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    std::vector<Var<double>> outs = forward();
    std::vector<Tensor64> weights;
    Var<double> loss;
    for (const auto& out : outs) {
        Tensor64 r(out.shape());
        for (auto& v : r.data()) {
            v = unit(rng);
        }
        const Var<double> term = ad::sum(ad::mul(out, ad::constant(r)));
        loss = loss.defined() ? ad::add(loss, term) : term;
        weights.push_back(std::move(r));
    }
    std::vector<Var<double>> vars;
    for (auto& p : inputs) {
        vars.push_back(p.var);
    }
    const auto analytic = gradients(loss, std::span<Var<double>>(vars));
    outs.clear();
    loss = Var<double>();

    GradCheckReport report;
    report.name = name;
    report.tolerance = tolerance;
    const double h = opts.step;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        Tensor64& value = inputs[t].var.mutable_value();
        std::size_t checked = 0;
        for (std::size_t i : probe_order(value.numel(), rng)) {
            if (checked == opts.max_entries) {
                break;
            }
            const double x0 = value[i];
            double f[5];
            const double offsets[5] = {-2.0 * h, -h, 0.0, h, 2.0 * h};
            for (int k = 0; k < 5; ++k) {
                value[i] = x0 + offsets[k];
                f[k] = evaluate(forward, weights);
            }
            value[i] = x0;
            if (near_kink(f, h)) {
                ++report.kinks_skipped;
                continue;
            }
            ++checked;
            const double numeric = (f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * h);
            const double err = std::abs(analytic[t][i] - numeric) / std::max(1e-8, std::abs(numeric));
            ++report.entries;
            if (err > report.max_rel_error || report.worst_entry.empty()) {
                report.max_rel_error = err;
                report.worst_entry = inputs[t].name + "[" + std::to_string(i) + "]";
                report.worst_analytic = analytic[t][i];
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

namespace {

constexpr int kChannels = 8;
constexpr int kLatent = 2;

/// Moves every parameter off its initial value (generators start at zero).
void jitter(std::vector<NamedParam<double>>& params, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> noise(-0.1, 0.1);
    for (auto& p : params) {
        for (auto& v : p.var.mutable_value().data()) {
            v += noise(rng);
        }
    }
}

template <typename Module>
std::vector<NamedParam<double>> collect(Module& m, const std::string& prefix) {
    std::vector<NamedParam<double>> out;
    m.visit(prefix, [&](const std::string& name, Var<double>& var, TensorRole role) {
        if (role == TensorRole::Parameter) {
            out.push_back({name, var});
        }
    });
    return out;
}

Var<double> random_input(Shape shape, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Tensor64 t(shape);
    for (auto& v : t.data()) {
        v = dist(rng);
    }
    return Var<double>::parameter(std::move(t));
}

struct Case {
    std::string name;
    Forward64 forward;
    std::vector<NamedParam<double>> inputs;
    double tolerance = kGradTolerance;
    std::size_t max_entries = 0;  // 0 keeps the caller's limit
};

RduConfig rdu_config(RduArch arch) {
    RduConfig cfg;
    cfg.arch = arch;
    cfg.channels = kChannels;
    cfg.latent = kLatent;
    return cfg;
}

}  // namespace

std::vector<GradCheckReport> run_gradcheck_suite(const GradCheckOptions& opts) {
    std::mt19937_64 rng(opts.seed);
    Initializer init(opts.seed + 1);
    std::vector<Case> cases;
    std::vector<std::shared_ptr<void>> keep_alive;
    const Shape small{1, kChannels, 8, 8};

    {
        auto x = random_input(Shape{1, 3, 6, 6}, rng);
        PlainConv<double> conv = PlainConv<double>::make(init, 3, 4, 3);
        std::vector<NamedParam<double>> in{{"x", x}, {"weight", conv.weight}, {"bias", conv.bias}};
        cases.push_back({"linear.conv2d", [x, conv] { return std::vector<Var<double>>{conv(x)}; }, in,
                         kLinearGradTolerance});
    }

    auto add_dynamic = [&](const std::string& name, RepStyle style, ConvType type, Mode mode) {
        DynamicConvSpec spec;
        spec.in_channels = kChannels;
        spec.out_channels = kChannels;
        spec.latent = kLatent;
        spec.rep_style = style;
        spec.conv_type = type;
        spec.experts = 2;
        auto conv = std::shared_ptr<DynamicConv<double>>(make_dynamic_conv<double>(spec, init).release());
        keep_alive.push_back(conv);
        auto x = random_input(small, rng);
        auto params = collect(*conv, name);
        jitter(params, rng);
        params.insert(params.begin(), {"x", x});
        cases.push_back({name,
                         [conv, x, mode] {
                             auto out = conv->forward(x, mode);
                             std::vector<Var<double>> v{out.static_out};
                             if (out.dynamic.defined()) {
                                 v.push_back(out.dynamic);
                             }
                             return v;
                         },
                         params});
    };
    // Batch statistics only in a graph without BN feeding BN; there a BN shift
    // has an exactly zero gradient that finite differences resolve to roundoff.
    add_dynamic("dcd.repvgg.batch_stats", RepStyle::RepVGG, ConvType::DCD, Mode::Train);
    add_dynamic("dcd.dbb", RepStyle::DBB, ConvType::DCD, Mode::Eval);
    add_dynamic("dyconv.dbb", RepStyle::DBB, ConvType::DYConv, Mode::Eval);

    for (RduArch arch : {RduArch::Base, RduArch::SRB, RduArch::SCB, RduArch::RB}) {
        const std::string name = std::string("rdu.") + to_string(arch);
        auto rdu = std::make_shared<Rdu<double>>(rdu_config(arch), init);
        keep_alive.push_back(rdu);
        auto x = random_input(small, rng);
        auto params = collect(*rdu, name);
        jitter(params, rng);
        params.insert(params.begin(), {"x", x});
        cases.push_back({name,
                         [rdu, x] {
                             auto out = rdu->forward(x, Mode::Eval);
                             return std::vector<Var<double>>{out.static_out, out.dynamic};
                         },
                         params});
    }

    {
        const int cd = kChannels / 2;
        PlainConv<double> conv = PlainConv<double>::make(init, 4 * cd, kChannels, 1);
        std::vector<Var<double>> parts;
        std::vector<NamedParam<double>> in;
        for (int i = 0; i < 4; ++i) {
            parts.push_back(random_input(Shape{1, cd, 6, 6}, rng));
            in.push_back({"distilled" + std::to_string(i), parts.back()});
        }
        in.push_back({"weight", conv.weight});
        in.push_back({"bias", conv.bias});
        cases.push_back({"sdf", [parts, conv] { return std::vector<Var<double>>{sdf<double>(parts, conv)}; }, in});
    }

    {
        PlainConv<double> pa = PlainConv<double>::make(init, kChannels, kChannels, 1);
        PlainConv<double> fuse = PlainConv<double>::make(init, 4 * kChannels, kChannels, 1);
        std::vector<Var<double>> dyn;
        std::vector<NamedParam<double>> in;
        for (int i = 0; i < 4; ++i) {
            dyn.push_back(random_input(Shape{1, kChannels, 6, 6}, rng));
            in.push_back({"dynamic" + std::to_string(i), dyn.back()});
        }
        auto f_sdf = random_input(Shape{1, kChannels, 6, 6}, rng);
        in.push_back({"f_sdf", f_sdf});
        in.push_back({"pa.weight", pa.weight});
        in.push_back({"pa.bias", pa.bias});
        in.push_back({"fuse.weight", fuse.weight});
        in.push_back({"fuse.bias", fuse.bias});
        cases.push_back({"ddf",
                         [dyn, f_sdf, pa, fuse] { return std::vector<Var<double>>{ddf<double>(dyn, f_sdf, pa, fuse)}; },
                         in});
    }

    {
        auto esa = std::make_shared<Esa<double>>(kChannels, init);
        keep_alive.push_back(esa);
        auto x = random_input(Shape{1, kChannels, 16, 16}, rng);
        auto params = collect(*esa, "esa");
        params.insert(params.begin(), {"x", x});
        cases.push_back({"esa", [esa, x] { return std::vector<Var<double>>{esa->forward(x)}; }, params});
    }

    {
        ModelConfig cfg = ModelConfig::full(2);
        cfg.channels = kChannels;
        cfg.blocks = 1;
        cfg.latent = kLatent;
        auto model = std::make_shared<Model<double>>(cfg, opts.seed + 2);
        keep_alive.push_back(model);
        auto x = random_input(Shape{1, 3, kMinInputExtent, kMinInputExtent}, rng);
        std::vector<NamedParam<double>> params = model->parameters();
        jitter(params, rng);
        params.insert(params.begin(), {"x", x});
        cases.push_back({"model.tiny", [model, x] { return std::vector<Var<double>>{model->forward(x, Mode::Eval)}; },
                         params, kGradTolerance, 3});
    }

    std::vector<GradCheckReport> reports;
    for (auto& c : cases) {
        GradCheckOptions o = opts;
        if (c.max_entries > 0) {
            o.max_entries = std::min(o.max_entries, c.max_entries);
        }
        reports.push_back(grad_check(c.name, c.forward, c.inputs, o, c.tolerance));
    }
    return reports;
}

}  // namespace lsr
