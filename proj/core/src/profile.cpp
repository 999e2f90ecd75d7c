// SPDX-License-Identifier: Apache-2.0
#include "lsr/profile.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "lsr/error.hpp"

namespace lsr {

std::int64_t CostReport::total_params() const {
    return std::accumulate(rows.begin(), rows.end(), std::int64_t{0},
                           [](std::int64_t acc, const CostRow& r) { return acc + r.params; });
}

std::int64_t CostReport::total_madds() const {
    return std::accumulate(rows.begin(), rows.end(), std::int64_t{0},
                           [](std::int64_t acc, const CostRow& r) { return acc + r.madds; });
}

std::string CostReport::to_csv() const {
    std::ostringstream out;
    out << "name,params,madds,out_h,out_w\n";
    for (const auto& r : rows) {
        out << r.name << "," << r.params << "," << r.madds << "," << r.out_h << "," << r.out_w << "\n";
    }
    out << "total," << total_params() << "," << total_madds() << "," << out_h << "," << out_w << "\n";
    return out.str();
}

std::string CostReport::to_table() const {
    std::size_t width = 5;
    for (const auto& r : rows) {
        width = std::max(width, r.name.size());
    }
    std::ostringstream out;
    out << to_string(mode) << " cost at " << out_w << "x" << out_h << " output\n";
    out << std::left << std::setw(static_cast<int>(width) + 2) << "layer" << std::right << std::setw(12) << "params"
        << std::setw(18) << "madds" << std::setw(12) << "out" << "\n";
    for (const auto& r : rows) {
        out << std::left << std::setw(static_cast<int>(width) + 2) << r.name << std::right << std::setw(12)
            << r.params << std::setw(18) << r.madds << std::setw(12)
            << (std::to_string(r.out_w) + "x" + std::to_string(r.out_h)) << "\n";
    }
    out << std::left << std::setw(static_cast<int>(width) + 2) << "total" << std::right << std::setw(12)
        << total_params() << std::setw(18) << total_madds() << "\n";
    out << std::fixed << std::setprecision(1) << "params " << static_cast<double>(total_params()) / 1e3 << "K, madds "
        << std::setprecision(2) << static_cast<double>(total_madds()) / 1e9 << "G\n";
    return out.str();
}

const char* to_string(CostMode mode) {
    return mode == CostMode::Training ? "training" : "inference";
}

CostMode parse_cost_mode(const std::string& text) {
    if (text == "training") {
        return CostMode::Training;
    }
    if (text == "inference") {
        return CostMode::Inference;
    }
    throw ConfigError("unknown cost mode '" + text + "' (expected training or inference)");
}

template <typename T>
CostReport profile_model(const Model<T>& model, CostMode mode, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) {
        throw ConfigError("output size must be positive");
    }
    CostSink sink;
    sink.mode = mode;
    model.cost(out_h, out_w, sink);
    CostReport report;
    report.mode = mode;
    report.out_h = out_h;
    report.out_w = out_w;
    report.rows = std::move(sink.rows);
    return report;
}

template <typename T>
std::int64_t count_params(const Model<T>& model, CostMode mode) {
    const int s = model.config().scale;
    return profile_model(model, mode, kMinInputExtent * s, kMinInputExtent * s).total_params();
}

template <typename T>
std::int64_t count_madds(const Model<T>& model, int out_h, int out_w, CostMode mode) {
    return profile_model(model, mode, out_h, out_w).total_madds();
}

template CostReport profile_model(const Model<float>&, CostMode, int, int);
template CostReport profile_model(const Model<double>&, CostMode, int, int);
template std::int64_t count_params(const Model<float>&, CostMode);
template std::int64_t count_params(const Model<double>&, CostMode);
template std::int64_t count_madds(const Model<float>&, int, int, CostMode);
template std::int64_t count_madds(const Model<double>&, int, int, CostMode);

}  // namespace lsr
