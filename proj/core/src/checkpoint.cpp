// SPDX-License-Identifier: Apache-2.0
#include "lsr/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include <nlohmann/json.hpp>

#include "lsr/error.hpp"

namespace lsr {

namespace {

constexpr char kMagic[8] = {'L', 'S', 'R', 'C', 'K', 'P', 'T', '\0'};
constexpr std::size_t kPreambleSize = sizeof(kMagic) + 4 + 8;

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        out.push_back(static_cast<std::uint8_t>((value >> (8 * i)) & 0xFF));
    }
}

template <typename U>
U get_le(const std::uint8_t* p) {
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        value |= static_cast<U>(p[i]) << (8 * i);
    }
    return value;
}

void put_float(std::vector<std::uint8_t>& out, float v) {
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
}

float get_float(const std::uint8_t* p) {
    return std::bit_cast<float>(get_le<std::uint32_t>(p));
}

struct IndexEntry {
    Shape shape;
    std::uint64_t offset = 0;
    std::uint64_t count = 0;
};

std::map<std::string, std::string> structure_tags(Model<float>& model) {
    std::map<std::string, std::string> tags;
    model.visit_graphs([&](const std::string& name, BranchGraph<float>& g) { tags[name] = g.tag(); });
    return tags;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(Model<float>& model) {
    nlohmann::json header;
    header["format_version"] = kCheckpointVersion;
    header["config"] = nlohmann::json::parse(model_config_to_json(model.config()));
    header["fused"] = model.is_fused();
    header["structure"] = structure_tags(model);

    std::vector<std::uint8_t> payload;
    nlohmann::json index = nlohmann::json::array();
    model.visit([&](const std::string& name, Var<float>& var, TensorRole) {
        const Shape& s = var.shape();
        index.push_back({{"name", name},
                         {"shape", {s.n, s.c, s.h, s.w}},
                         {"offset", payload.size()},
                         {"count", var.value().numel()}});
        for (float v : var.value().data()) {
            put_float(payload, v);
        }
    });
    header["tensors"] = std::move(index);

    const std::string text = header.dump();
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint64_t>(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

Model<float> deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kPreambleSize) {
        throw CheckpointTruncatedError("checkpoint shorter than its fixed preamble");
    }
    if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
        throw CheckpointHeaderError("not a checkpoint file (bad magic)");
    }
    const auto version = get_le<std::uint32_t>(bytes.data() + sizeof(kMagic));
    if (version != kCheckpointVersion) {
        throw CheckpointHeaderError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto header_len = get_le<std::uint64_t>(bytes.data() + sizeof(kMagic) + 4);
    if (header_len > bytes.size() - kPreambleSize) {
        throw CheckpointTruncatedError("checkpoint header extends past end of file");
    }
    const char* header_begin = reinterpret_cast<const char*>(bytes.data() + kPreambleSize);
    const std::span<const std::uint8_t> payload = bytes.subspan(kPreambleSize + header_len);

    nlohmann::json header;
    ModelConfig cfg;
    bool fused = false;
    std::map<std::string, std::string> tags;
    std::map<std::string, IndexEntry> index;
    std::vector<std::string> order;
    try {
        header = nlohmann::json::parse(header_begin, header_begin + header_len);
        if (header.at("format_version").get<std::uint32_t>() != kCheckpointVersion) {
            throw CheckpointHeaderError("header format_version disagrees with preamble");
        }
        cfg = model_config_from_json(header.at("config").dump());
        fused = header.at("fused").get<bool>();
        tags = header.at("structure").get<std::map<std::string, std::string>>();
        for (const auto& item : header.at("tensors")) {
            const auto name = item.at("name").get<std::string>();
            const auto dims = item.at("shape").get<std::vector<int>>();
            if (dims.size() != 4) {
                throw CheckpointHeaderError("tensor " + name + " has a shape of rank " + std::to_string(dims.size()));
            }
            IndexEntry entry{Shape{dims[0], dims[1], dims[2], dims[3]}, item.at("offset").get<std::uint64_t>(),
                             item.at("count").get<std::uint64_t>()};
            if (!index.emplace(name, entry).second) {
                throw CheckpointHeaderError("tensor " + name + " listed twice");
            }
            order.push_back(name);
        }
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointHeaderError(std::string("malformed checkpoint header: ") + e.what());
    } catch (const ConfigError& e) {
        throw CheckpointHeaderError(std::string("invalid config in checkpoint: ") + e.what());
    }

    std::uint64_t expected = 0;
    for (const auto& name : order) {
        const IndexEntry& e = index.at(name);
        if (e.offset != expected || e.count != e.shape.numel()) {
            throw CheckpointHeaderError("tensor " + name + " has an inconsistent offset or count");
        }
        expected += e.count * sizeof(float);
    }
    if (payload.size() < expected) {
        throw CheckpointTruncatedError("payload holds " + std::to_string(payload.size()) + " bytes, index needs " +
                                       std::to_string(expected));
    }
    if (payload.size() > expected) {
        throw CheckpointHeaderError("payload has " + std::to_string(payload.size() - expected) + " trailing bytes");
    }

    Model<float> model(cfg, 0);
    if (fused) {
        model.fuse();
    }
    if (structure_tags(model) != tags) {
        throw CheckpointHeaderError("structure tags do not match the configured architecture");
    }
    std::size_t seen = 0;
    model.visit([&](const std::string& name, Var<float>& var, TensorRole) {
        auto it = index.find(name);
        if (it == index.end()) {
            throw CheckpointShapeError("checkpoint lacks tensor " + name);
        }
        if (it->second.shape != var.shape()) {
            throw CheckpointShapeError("tensor " + name + " has shape " + it->second.shape.str() + ", model expects " +
                                       var.shape().str());
        }
        BasicTensor<float>& dst = var.mutable_value();
        const std::uint8_t* src = payload.data() + it->second.offset;
        for (std::size_t i = 0; i < dst.numel(); ++i) {
            dst[i] = get_float(src + i * sizeof(float));
        }
        ++seen;
    });
    if (seen != index.size()) {
        throw CheckpointShapeError("checkpoint holds " + std::to_string(index.size() - seen) +
                                   " tensors the model does not have");
    }
    return model;
}

void save_checkpoint(Model<float>& model, const std::string& path) {
    const auto bytes = serialize_checkpoint(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot open " + path + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw DataError("failed writing " + path);
    }
}

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open checkpoint " + path);
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Model<float> load_checkpoint(const std::string& path) {
    const auto bytes = read_file(path);
    return deserialize_checkpoint(bytes);
}

std::size_t load_compatible(Model<float>& model, const std::string& path) {
    Model<float> source = load_checkpoint(path);
    std::map<std::string, BasicTensor<float>> values;
    source.visit([&](const std::string& name, Var<float>& var, TensorRole) { values[name] = var.value(); });
    std::size_t copied = 0;
    model.visit([&](const std::string& name, Var<float>& var, TensorRole) {
        auto it = values.find(name);
        if (it != values.end() && it->second.shape() == var.shape()) {
            var.mutable_value() = it->second;
            ++copied;
        }
    });
    return copied;
}

}  // namespace lsr
