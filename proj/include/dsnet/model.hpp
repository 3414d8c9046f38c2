#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dsnet/adam.hpp"
#include "dsnet/ops.hpp"
#include "dsnet/rng.hpp"
#include "dsnet/tensor.hpp"

namespace dsnet {

/// One backbone element: a convolution or a 2x2 max-pool marker.
struct BackboneItem {
    bool is_pool = false;
    Conv2dSpec conv;

    static BackboneItem pool() {
        BackboneItem b;
        b.is_pool = true;
        return b;
    }
    static BackboneItem convolution(const Conv2dSpec& spec) {
        BackboneItem b;
        b.conv = spec;
        return b;
    }
};

/// Backbone preset: VGG-style front (ten 3x3 convolutions, three pools),
/// optionally with channel widths scaled down for desk-scale runs.
struct BackbonePreset {
    double channel_scale = 1.0;

    static BackbonePreset vgg_front10() { return {1.0}; }
    static BackbonePreset toy(double scale = 0.125) { return {scale}; }
};

namespace detail {

inline std::int64_t scaled_width(std::int64_t full, double scale) {
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(full * scale)));
}

}  // namespace detail

/// conv3-64 x2, pool, conv3-128 x2, pool, conv3-256 x3, pool, conv3-512 x3,
/// ReLU after each conv, same-size padding. channel_scale < 1 shrinks every
/// width with identical topology.
inline std::vector<BackboneItem> build_backbone(const BackbonePreset& preset,
                                                std::int64_t input_channels = 3) {
    const std::int64_t widths[4] = {
        detail::scaled_width(64, preset.channel_scale),
        detail::scaled_width(128, preset.channel_scale),
        detail::scaled_width(256, preset.channel_scale),
        detail::scaled_width(512, preset.channel_scale),
    };
    const int repeats[4] = {2, 2, 3, 3};
    std::vector<BackboneItem> items;
    std::int64_t in_ch = input_channels;
    for (int stage = 0; stage < 4; ++stage) {
        for (int r = 0; r < repeats[stage]; ++r) {
            items.push_back(
                BackboneItem::convolution(Conv2dSpec::same_padded(in_ch, widths[stage], 3)));
            in_ch = widths[stage];
        }
        if (stage < 3) items.push_back(BackboneItem::pool());
    }
    return items;
}

/// Dense dilated convolution block description. Each dilated layer is
/// preceded by a 1x1 bottleneck; the block ends with a 3x3 fusion conv
/// back to in_channels so residual addition is well-defined.
struct DdcbSpec {
    std::int64_t in_channels = 512;
    std::int64_t growth = 64;
    std::int64_t bottleneck = 256;
    std::vector<std::int64_t> dilations{1, 2, 3};
    std::int64_t fuse_out = 512;

    void validate() const {
        if (in_channels <= 0 || growth <= 0 || bottleneck <= 0 || fuse_out <= 0) {
            throw ConfigError("DdcbSpec: channel counts must be positive");
        }
        for (std::size_t i = 1; i < dilations.size(); ++i) {
            if (dilations[i] <= dilations[i - 1]) {
                throw ConfigError("DdcbSpec: dilations must be strictly increasing");
            }
        }
        if (dilations.empty() || dilations.front() <= 0) {
            throw ConfigError("DdcbSpec: dilations must be positive");
        }
        if (fuse_out != in_channels) {
            throw ConfigError("DdcbSpec: fuse_out " + std::to_string(fuse_out) +
                              " must equal in_channels " + std::to_string(in_channels) +
                              " (required by residual addition)");
        }
    }

    static DdcbSpec scaled(double channel_scale) {
        DdcbSpec s;
        s.in_channels = detail::scaled_width(512, channel_scale);
        s.growth = detail::scaled_width(64, channel_scale);
        s.bottleneck = detail::scaled_width(256, channel_scale);
        s.fuse_out = s.in_channels;
        return s;
    }
};

/// Channel accounting for a DDCB under the dense-connection rule: layer j
/// consumes the block input concatenated with all previous layer outputs.
struct DdcbLayout {
    DdcbSpec spec;
    std::vector<std::int64_t> layer_in_channels;
    std::int64_t fusion_in_channels = 0;
};

inline DdcbLayout build_ddcb(const DdcbSpec& spec) {
    spec.validate();
    DdcbLayout layout;
    layout.spec = spec;
    for (std::size_t j = 0; j < spec.dilations.size(); ++j) {
        layout.layer_in_channels.push_back(spec.in_channels +
                                           static_cast<std::int64_t>(j) * spec.growth);
    }
    layout.fusion_in_channels =
        spec.in_channels + static_cast<std::int64_t>(spec.dilations.size()) * spec.growth;
    return layout;
}

/// The whole network: backbone, dense dilated blocks wired with dense
/// residual additions, and the regression head.
struct ModelGraph {
    std::vector<BackboneItem> backbone;
    std::vector<DdcbSpec> blocks;
    std::vector<Conv2dSpec> head;
    ParamStore params;

    std::int64_t backbone_out_channels() const {
        std::int64_t ch = 0;
        for (const BackboneItem& item : backbone) {
            if (!item.is_pool) ch = item.conv.out_channels;
        }
        return ch;
    }

    std::int64_t pool_count() const {
        std::int64_t n = 0;
        for (const BackboneItem& item : backbone) n += item.is_pool ? 1 : 0;
        return n;
    }

    std::int64_t conv_count() const {
        std::int64_t n = static_cast<std::int64_t>(head.size());
        for (const BackboneItem& item : backbone) n += item.is_pool ? 0 : 1;
        for (const DdcbSpec& b : blocks) n += 2 * static_cast<std::int64_t>(b.dilations.size()) + 1;
        return n;
    }

    std::int64_t output_stride() const {
        std::int64_t s = 1;
        for (std::int64_t i = 0; i < pool_count(); ++i) s *= 2;
        return s;
    }
};

/// Regression head: 3x3 -> 3x3 -> 1x1(1), ReLU after every layer. The final
/// ReLU keeps density predictions non-negative.
inline std::vector<Conv2dSpec> build_head(std::int64_t in_channels, double channel_scale = 1.0) {
    const std::int64_t w1 = detail::scaled_width(128, channel_scale);
    const std::int64_t w2 = detail::scaled_width(64, channel_scale);
    return {
        Conv2dSpec::same_padded(in_channels, w1, 3),
        Conv2dSpec::same_padded(w1, w2, 3),
        Conv2dSpec::same_padded(w2, 1, 1),
    };
}

namespace detail {

inline void register_conv_params(ParamStore& store, const std::string& prefix,
                                 const Conv2dSpec& spec) {
    store.create(prefix + ".weight", {spec.out_channels, spec.in_channels, spec.kernel, spec.kernel});
    store.create(prefix + ".bias", {1, spec.out_channels, 1, 1});
}

inline std::string block_prefix(std::size_t b) { return "block" + std::to_string(b + 1); }

}  // namespace detail

/// Assemble the graph and allocate (zero-initialized) parameters.
/// Channel accounting across backbone -> blocks -> head is checked here.
inline ModelGraph build_dsnet(std::vector<BackboneItem> backbone, std::vector<DdcbSpec> blocks,
                              std::vector<Conv2dSpec> head) {
    ModelGraph g;
    g.backbone = std::move(backbone);
    g.blocks = std::move(blocks);
    g.head = std::move(head);

    if (g.pool_count() != 3) {
        throw ConfigError("build_dsnet: backbone must contain exactly 3 pools, got " +
                          std::to_string(g.pool_count()));
    }
    const std::int64_t feat_ch = g.backbone_out_channels();
    for (const DdcbSpec& b : g.blocks) {
        b.validate();
        if (b.in_channels != feat_ch) {
            throw ConfigError("build_dsnet: block in_channels " + std::to_string(b.in_channels) +
                              " does not match backbone output " + std::to_string(feat_ch));
        }
    }
    if (g.head.empty() || g.head.back().out_channels != 1) {
        throw ConfigError("build_dsnet: head must end with a single-channel layer");
    }
    if (!g.head.empty() && g.head.front().in_channels != feat_ch) {
        throw ConfigError("build_dsnet: head in_channels " +
                          std::to_string(g.head.front().in_channels) +
                          " does not match feature width " + std::to_string(feat_ch));
    }

    std::size_t conv_idx = 0;
    for (const BackboneItem& item : g.backbone) {
        if (item.is_pool) continue;
        detail::register_conv_params(g.params, "backbone.conv" + std::to_string(conv_idx),
                                     item.conv);
        ++conv_idx;
    }
    for (std::size_t b = 0; b < g.blocks.size(); ++b) {
        const DdcbLayout layout = build_ddcb(g.blocks[b]);
        const std::string prefix = detail::block_prefix(b);
        for (std::size_t j = 0; j < layout.spec.dilations.size(); ++j) {
            const std::string lp = prefix + ".layer" + std::to_string(j);
            detail::register_conv_params(
                g.params, lp + ".reduce",
                Conv2dSpec::same_padded(layout.layer_in_channels[j], layout.spec.bottleneck, 1));
            detail::register_conv_params(
                g.params, lp + ".dilated",
                Conv2dSpec::same_padded(layout.spec.bottleneck, layout.spec.growth, 3,
                                        layout.spec.dilations[j]));
        }
        detail::register_conv_params(
            g.params, prefix + ".fuse",
            Conv2dSpec::same_padded(layout.fusion_in_channels, layout.spec.fuse_out, 3));
    }
    for (std::size_t i = 0; i < g.head.size(); ++i) {
        detail::register_conv_params(g.params, "head.conv" + std::to_string(i), g.head[i]);
    }
    return g;
}

/// Convenience: full-size network (VGG-width backbone, 512-wide blocks).
inline ModelGraph build_dsnet_full() {
    auto backbone = build_backbone(BackbonePreset::vgg_front10());
    std::vector<DdcbSpec> blocks(3, DdcbSpec::scaled(1.0));
    auto head = build_head(512, 1.0);
    return build_dsnet(std::move(backbone), std::move(blocks), std::move(head));
}

/// Convenience: toy preset with widths scaled by channel_scale (default 1/8).
inline ModelGraph build_dsnet_toy(double channel_scale = 0.125) {
    auto backbone = build_backbone(BackbonePreset::toy(channel_scale));
    std::vector<DdcbSpec> blocks(3, DdcbSpec::scaled(channel_scale));
    const std::int64_t feat = detail::scaled_width(512, channel_scale);
    auto head = build_head(feat, channel_scale);
    return build_dsnet(std::move(backbone), std::move(blocks), std::move(head));
}

/// Fill all conv weights from N(0, 0.01^2) with a seeded generator; biases
/// stay zero. Parameters are visited in lexicographic path order, so one
/// seed pins every weight.
inline void init_params(ModelGraph& graph, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& [path, tensor] : graph.params.items()) {
        const bool is_weight = path.size() >= 7 && path.compare(path.size() - 7, 7, ".weight") == 0;
        if (!is_weight) continue;
        for (double& v : tensor.vec()) v = rng.gaussian(0.0, 0.01);
    }
}

/// He-scaled init, std = sqrt(2 / fan_in) per layer. The fixed 0.01 std
/// above presumes a pretrained backbone; when training from scratch it
/// shrinks activations below numerical relevance, so desk-scale runs use
/// this scheme instead. The final head layer gets 0.01-scaled weights and
/// a small positive bias: the output ReLU must not start dead, or the
/// all-zero prediction is a gradient-free trap.
inline void init_params_he(ModelGraph& graph, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& [path, tensor] : graph.params.items()) {
        const bool is_weight = path.size() >= 7 && path.compare(path.size() - 7, 7, ".weight") == 0;
        if (!is_weight) continue;
        const Shape4 s = tensor.shape();
        const double std = std::sqrt(2.0 / static_cast<double>(s.c * s.h * s.w));
        for (double& v : tensor.vec()) v = rng.gaussian(0.0, std);
    }
    if (!graph.head.empty()) {
        const std::string last = "head.conv" + std::to_string(graph.head.size() - 1);
        for (double& v : graph.params.at(last + ".weight").vec()) v *= 0.01;
        for (double& v : graph.params.at(last + ".bias").vec()) v = 0.1;
    }
}

/// Per-layer shape log from a probe forward pass.
struct ForwardTrace {
    std::vector<std::pair<std::string, Shape4>> shapes;
};

namespace detail {

inline Tensor run_conv(ParamStore& params, const std::string& prefix, const Conv2dSpec& spec,
                       const Tensor& input) {
    Tensor out = conv2d(input, params.at(prefix + ".weight"), params.at(prefix + ".bias"), spec);
    return spec.has_relu ? relu(out) : out;
}

}  // namespace detail

/// Forward pass through one DDCB given the block's parameter prefix.
inline Tensor run_ddcb(ParamStore& params, const std::string& prefix, const DdcbSpec& spec,
                       const Tensor& input, ForwardTrace* trace = nullptr) {
    const DdcbLayout layout = build_ddcb(spec);
    std::vector<Tensor> features{input};
    for (std::size_t j = 0; j < spec.dilations.size(); ++j) {
        const std::string lp = prefix + ".layer" + std::to_string(j);
        Tensor cat = features.size() == 1 ? features.front() : concat_channels(features);
        Tensor reduced = detail::run_conv(
            params, lp + ".reduce",
            Conv2dSpec::same_padded(layout.layer_in_channels[j], spec.bottleneck, 1), cat);
        Tensor dilated = detail::run_conv(
            params, lp + ".dilated",
            Conv2dSpec::same_padded(spec.bottleneck, spec.growth, 3, spec.dilations[j]), reduced);
        if (trace) trace->shapes.emplace_back(lp, dilated.shape());
        features.push_back(dilated);
    }
    Tensor fusion_in = concat_channels(features);
    // Last conv of the block: no ReLU.
    Tensor fused = detail::run_conv(
        params, prefix + ".fuse",
        Conv2dSpec::same_padded(layout.fusion_in_channels, spec.fuse_out, 3, 1,
                                /*has_relu=*/false),
        fusion_in);
    if (trace) trace->shapes.emplace_back(prefix + ".fuse", fused.shape());
    return fused;
}

/// Full forward pass: backbone, dense-residual block cascade, head.
/// Input spatial dims must be divisible by the output stride (8).
inline Tensor forward(ModelGraph& graph, const Tensor& input, ForwardTrace* trace = nullptr) {
    const Shape4 in = input.shape();
    const std::int64_t stride = graph.output_stride();
    if (in.h % stride != 0 || in.w % stride != 0) {
        throw ContractError("forward: input " + std::to_string(in.h) + "x" + std::to_string(in.w) +
                            " not divisible by stride " + std::to_string(stride));
    }

    Tensor x = input;
    std::size_t conv_idx = 0, pool_idx = 0;
    for (const BackboneItem& item : graph.backbone) {
        if (item.is_pool) {
            x = max_pool_2x2(x);
            if (trace) trace->shapes.emplace_back("backbone.pool" + std::to_string(pool_idx++), x.shape());
        } else {
            x = detail::run_conv(graph.params, "backbone.conv" + std::to_string(conv_idx), item.conv, x);
            if (trace) trace->shapes.emplace_back("backbone.conv" + std::to_string(conv_idx), x.shape());
            ++conv_idx;
        }
    }

    // Dense residual wiring: block b consumes f0 + o1 + ... + o_{b-1}; the
    // head consumes the sum over all block outputs plus f0.
    Tensor accumulated = x;  // f0, then running sum of f0 and block outputs
    for (std::size_t b = 0; b < graph.blocks.size(); ++b) {
        Tensor out = run_ddcb(graph.params, detail::block_prefix(b), graph.blocks[b], accumulated,
                              trace);
        accumulated = add(accumulated, out);
    }

    Tensor y = accumulated;
    for (std::size_t i = 0; i < graph.head.size(); ++i) {
        y = detail::run_conv(graph.params, "head.conv" + std::to_string(i), graph.head[i], y);
        if (trace) trace->shapes.emplace_back("head.conv" + std::to_string(i), y.shape());
    }
    return y;
}

}  // namespace dsnet
