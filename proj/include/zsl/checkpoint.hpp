#pragma once

// Model checkpoint archive (little-endian):
//   "ZSLA" | u32 version (=1) | u32 json_length | JSON header
//   u32 tensor_count | tensor_count x ( u64 byte_length | ZSLF blob )
//
// The JSON header carries the architecture, label order, optional training config
// and the shape of every tensor. Each ZSLF blob holds one record whose id is the
// tensor name and whose vector is the row-major flattened tensor.

#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "zsl/errors.hpp"
#include "zsl/network.hpp"
#include "zsl/trainer.hpp"
#include "zsl/zslf.hpp"

namespace zsl {

inline constexpr char kCheckpointMagic[4] = {'Z', 'S', 'L', 'A'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    Model<float> model;
    std::optional<TrainConfig> train_config;
};

inline std::string encode_checkpoint(const Model<float>& model, const std::optional<TrainConfig>& train_config = {}) {
    nlohmann::json header;
    header["format"] = "zsl-checkpoint";
    header["architecture"] = to_json(model.config);
    header["label_order"] = model.label_order;
    if (train_config) header["train_config"] = to_json(*train_config);
    nlohmann::json tensors = nlohmann::json::array();
    std::string blobs;
    std::uint32_t count = 0;
    model.for_each_tensor([&](const std::string& name, const Matrix<float>& m) {
        tensors.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}});
        FeatureTable t(static_cast<std::uint32_t>(m.size()));
        t.add(name, std::span<const float>(m.data(), static_cast<std::size_t>(m.size())));
        const auto blob = encode_zslf(t);
        detail::put_u64(blobs, blob.size());
        blobs += blob;
        ++count;
    });
    header["tensors"] = std::move(tensors);

    const auto json_text = header.dump();
    std::string out;
    out.append(kCheckpointMagic, 4);
    detail::put_u32(out, kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(json_text.size()));
    out += json_text;
    detail::put_u32(out, count);
    out += blobs;
    return out;
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
    detail::ByteReader in(bytes);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
        throw FormatError("not a checkpoint archive (bad magic)");
    }
    in.take(4, "magic");
    const auto version = in.u32("header");
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto json_len = in.u32("header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(in.take(json_len, "JSON header"));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }

    Checkpoint ckpt;
    std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> shapes;
    try {
        ckpt.model.config = architecture_from_json(header.at("architecture"));
        ckpt.model.label_order = header.at("label_order").get<std::vector<std::string>>();
        if (header.contains("train_config")) ckpt.train_config = train_config_from_json(header.at("train_config"));
        for (const auto& t : header.at("tensors")) {
            shapes.push_back({t.at("name").get<std::string>(),
                              {t.at("shape").at(0).get<Eigen::Index>(), t.at("shape").at(1).get<Eigen::Index>()}});
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed checkpoint header: ") + e.what());
    }
    if (ckpt.model.label_order.empty()) {
        throw FormatError("checkpoint has an empty label order");
    }

    const auto count = in.u32("tensor count");
    if (count != shapes.size()) {
        throw CorruptionError("checkpoint lists " + std::to_string(shapes.size()) + " tensors but stores " +
                              std::to_string(count));
    }
    std::map<std::string, MatrixF> stored;
    for (const auto& [name, shape] : shapes) {
        const auto len = in.u64("tensor length");
        const auto table = decode_zslf(in.take(len, "tensor blob"));
        if (table.size() != 1 || table.id(0) != name ||
            static_cast<Eigen::Index>(table.dim()) != shape.first * shape.second) {
            throw CorruptionError("tensor '" + name + "' does not match its header entry");
        }
        const auto v = table.vector(0);
        stored.emplace(name, Eigen::Map<const MatrixF>(v.data(), shape.first, shape.second));
    }
    if (in.remaining() != 0) {
        throw CorruptionError("trailing bytes after last tensor");
    }

    // Lay out an empty model of the stored architecture, then fill every tensor.
    const auto& config = ckpt.model.config;
    auto make_layers = [](const std::vector<LayerSpec>& specs) {
        std::vector<Layer<float>> layers;
        for (const auto& s : specs) {
            const auto in_dim = static_cast<Eigen::Index>(s.in_dim);
            const auto out_dim = static_cast<Eigen::Index>(s.out_dim);
            Layer<float> l{s, MatrixF(in_dim, out_dim), MatrixF(1, out_dim), {}, {}, {}, {}};
            if (s.has_batchnorm) {
                l.gamma.resize(1, out_dim);
                l.beta.resize(1, out_dim);
                l.running_mean.resize(1, out_dim);
                l.running_var.resize(1, out_dim);
            }
            layers.push_back(std::move(l));
        }
        return layers;
    };
    ckpt.model.reducer = make_layers(config.reducer);
    ckpt.model.trunk = make_layers(config.trunk);
    ckpt.model.output_weights.resize(static_cast<Eigen::Index>(config.semantic_dim),
                                     static_cast<Eigen::Index>(ckpt.model.label_order.size()));
    std::size_t filled = 0;
    ckpt.model.for_each_tensor([&](const std::string& name, MatrixF& m) {
        auto it = stored.find(name);
        if (it == stored.end()) {
            throw ArtifactMismatchError("checkpoint lacks tensor '" + name + "'");
        }
        if (it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
            throw ArtifactMismatchError("tensor '" + name + "' has the wrong shape for the stored architecture");
        }
        m = it->second;
        ++filled;
    });
    if (filled != stored.size()) {
        throw ArtifactMismatchError("checkpoint holds tensors the architecture does not use");
    }
    return ckpt;
}

inline void save_checkpoint(const Model<float>& model, const std::filesystem::path& path,
                            const std::optional<TrainConfig>& train_config = {}) {
    detail::write_file_bytes(path, encode_checkpoint(model, train_config));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(detail::read_file_bytes(path));
}

}  // namespace zsl
