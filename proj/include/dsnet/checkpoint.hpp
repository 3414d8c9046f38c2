#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsnet/io.hpp"
#include "dsnet/model.hpp"

namespace dsnet {

namespace detail {

constexpr char kCheckpointMagic[8] = {'D', 'S', 'N', 'C', 'K', 'P', 'T', '1'};

inline nlohmann::json conv_to_json(const Conv2dSpec& c) {
    return {{"in", c.in_channels},   {"out", c.out_channels}, {"kernel", c.kernel},
            {"dilation", c.dilation}, {"padding", c.padding},  {"relu", c.has_relu}};
}

inline Conv2dSpec conv_from_json(const nlohmann::json& j, const std::string& origin) {
    for (const char* key : {"in", "out", "kernel", "dilation", "padding", "relu"}) {
        if (!j.contains(key)) throw IoError(origin + ": conv spec missing '" + std::string(key) + "'");
    }
    Conv2dSpec c;
    c.in_channels = j["in"].get<std::int64_t>();
    c.out_channels = j["out"].get<std::int64_t>();
    c.kernel = j["kernel"].get<std::int64_t>();
    c.dilation = j["dilation"].get<std::int64_t>();
    c.padding = j["padding"].get<std::int64_t>();
    c.has_relu = j["relu"].get<bool>();
    return c;
}

}  // namespace detail

/// Topology manifest as JSON: enough to rebuild the graph without presets.
inline nlohmann::json model_manifest(const ModelGraph& graph) {
    nlohmann::json doc;
    doc["format"] = "dsnet-checkpoint";
    doc["version"] = 1;
    nlohmann::json backbone = nlohmann::json::array();
    for (const BackboneItem& item : graph.backbone) {
        if (item.is_pool) {
            backbone.push_back("pool");
        } else {
            backbone.push_back(detail::conv_to_json(item.conv));
        }
    }
    doc["backbone"] = std::move(backbone);
    nlohmann::json blocks = nlohmann::json::array();
    for (const DdcbSpec& b : graph.blocks) {
        blocks.push_back({{"in", b.in_channels},
                          {"growth", b.growth},
                          {"bottleneck", b.bottleneck},
                          {"dilations", b.dilations},
                          {"fuse", b.fuse_out}});
    }
    doc["blocks"] = std::move(blocks);
    nlohmann::json head = nlohmann::json::array();
    for (const Conv2dSpec& c : graph.head) head.push_back(detail::conv_to_json(c));
    doc["head"] = std::move(head);
    return doc;
}

inline ModelGraph model_from_manifest(const nlohmann::json& doc, const std::string& origin) {
    if (!doc.contains("format") || doc["format"] != "dsnet-checkpoint") {
        throw IoError(origin + ": not a checkpoint manifest");
    }
    std::vector<BackboneItem> backbone;
    for (const auto& item : doc.at("backbone")) {
        if (item.is_string() && item == "pool") {
            backbone.push_back(BackboneItem::pool());
        } else {
            backbone.push_back(BackboneItem::convolution(detail::conv_from_json(item, origin)));
        }
    }
    std::vector<DdcbSpec> blocks;
    for (const auto& b : doc.at("blocks")) {
        DdcbSpec spec;
        spec.in_channels = b.at("in").get<std::int64_t>();
        spec.growth = b.at("growth").get<std::int64_t>();
        spec.bottleneck = b.at("bottleneck").get<std::int64_t>();
        spec.dilations = b.at("dilations").get<std::vector<std::int64_t>>();
        spec.fuse_out = b.at("fuse").get<std::int64_t>();
        blocks.push_back(std::move(spec));
    }
    std::vector<Conv2dSpec> head;
    for (const auto& c : doc.at("head")) head.push_back(detail::conv_from_json(c, origin));
    return build_dsnet(std::move(backbone), std::move(blocks), std::move(head));
}

/// Container layout: 8-byte magic, u32 manifest length + manifest JSON,
/// u32 tensor count, then per tensor u32 name length + name + one DCT1
/// snapshot. External weights can be imported by writing this container.
inline void save_checkpoint(const std::string& path, const ModelGraph& graph) {
    std::vector<std::uint8_t> out(detail::kCheckpointMagic, detail::kCheckpointMagic + 8);
    const std::string manifest = model_manifest(graph).dump();
    detail::push_le32(out, static_cast<std::uint32_t>(manifest.size()));
    out.insert(out.end(), manifest.begin(), manifest.end());
    detail::push_le32(out, static_cast<std::uint32_t>(graph.params.size()));
    for (const auto& [name, tensor] : graph.params.items()) {
        detail::push_le32(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        append_tensor_snapshot(out, tensor);
    }
    detail::write_file_bytes(path, out);
}

inline ModelGraph load_checkpoint(const std::string& path) {
    const std::vector<std::uint8_t> bytes = detail::read_file_bytes(path);
    if (bytes.size() < 8 || std::memcmp(bytes.data(), detail::kCheckpointMagic, 8) != 0) {
        throw IoError(path + ": not a checkpoint file");
    }
    std::size_t pos = 8;
    const std::uint32_t manifest_len = detail::take_le32(bytes, pos, path);
    if (pos + manifest_len > bytes.size()) throw IoError(path + ": truncated manifest");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + manifest_len));
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(path + ": manifest parse error: " + e.what());
    }
    pos += manifest_len;

    ModelGraph graph = model_from_manifest(doc, path);
    const std::uint32_t count = detail::take_le32(bytes, pos, path);
    if (count != graph.params.size()) {
        throw IoError(path + ": checkpoint holds " + std::to_string(count) + " tensors, topology needs " +
                      std::to_string(graph.params.size()));
    }
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = detail::take_le32(bytes, pos, path);
        if (pos + name_len > bytes.size()) throw IoError(path + ": truncated tensor name");
        const std::string name(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                               bytes.begin() + static_cast<std::ptrdiff_t>(pos + name_len));
        pos += name_len;
        Tensor snapshot = take_tensor_snapshot(bytes, pos, path);
        Tensor& param = graph.params.at(name);
        if (!(snapshot.shape() == param.shape())) {
            throw IoError(path + ": tensor '" + name + "' has shape " + snapshot.shape().str() +
                          ", topology needs " + param.shape().str());
        }
        param.vec() = snapshot.vec();
    }
    if (pos != bytes.size()) throw IoError(path + ": trailing bytes after checkpoint payload");
    return graph;
}

}  // namespace dsnet
