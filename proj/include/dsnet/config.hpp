#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsnet/data.hpp"
#include "dsnet/density.hpp"
#include "dsnet/losses.hpp"

namespace dsnet {

struct OptimizerConfig {
    double lr = 5e-6;
    double weight_decay = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        if (lr <= 0.0) throw ConfigError("optimizer: lr must be > 0");
        if (weight_decay < 0.0) throw ConfigError("optimizer: weight_decay must be >= 0");
    }
};

/// Ground-truth kernel settings shared by gen-gt, train and eval.
struct GroundTruthConfig {
    std::string mode = "adaptive";  // "fixed" | "adaptive"
    double fixed_sigma = 15.0;
    AdaptiveKernelConfig adaptive;

    KernelMode kernel_mode() const {
        if (mode == "fixed") return FixedKernel{fixed_sigma};
        if (mode == "adaptive") return adaptive;
        throw ConfigError("ground_truth: mode must be 'fixed' or 'adaptive', got '" + mode + "'");
    }
};

/// Everything one experiment needs; every field has a default so partial
/// config files work.
struct RunConfig {
    // model
    std::string preset = "toy";  // "toy" | "full"
    double channel_scale = 0.125;
    std::string init_scheme = "gaussian";  // "gaussian" (N(0, 0.01^2)) | "he"

    // data
    std::string dataset_dir;    // when empty, synthetic data is used
    std::string profile = "none";
    SyntheticSceneSpec synthetic;
    std::int64_t synthetic_train_scenes = 64;
    std::int64_t synthetic_test_scenes = 16;

    GroundTruthConfig ground_truth;
    LossConfig loss;
    OptimizerConfig optimizer;

    // training
    std::int64_t batch_size = 1;
    std::int64_t iterations = 200;
    std::uint64_t seed = 0;
    std::int64_t checkpoint_interval = 0;  // 0 = final checkpoint only
    bool augment = false;
    AugmentConfig augment_cfg;

    std::string output_dir = "run";

    void validate() const {
        if (preset != "toy" && preset != "full") {
            throw ConfigError("config: preset must be 'toy' or 'full', got '" + preset + "'");
        }
        if (init_scheme != "gaussian" && init_scheme != "he") {
            throw ConfigError("config: init_scheme must be 'gaussian' or 'he', got '" +
                              init_scheme + "'");
        }
        if (channel_scale <= 0.0 || channel_scale > 1.0) {
            throw ConfigError("config: channel_scale must lie in (0, 1]");
        }
        if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
        if (iterations < 1) throw ConfigError("config: iterations must be >= 1");
        optimizer.validate();
        loss.validate();
        if (dataset_dir.empty()) synthetic.validate();
        dataset_profile_from_string(profile);  // throws on bad value
        if (augment) augment_cfg.validate();
    }
};

namespace detail {

/// Unknown-key rejection: every object in the config is checked against its
/// schema and errors list the offending keys.
inline void reject_unknown_keys(const nlohmann::json& obj, const std::vector<std::string>& known,
                                const std::string& where) {
    if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
    std::string bad;
    for (const auto& [key, value] : obj.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            if (!bad.empty()) bad += ", ";
            bad += "'" + key + "'";
        }
    }
    if (!bad.empty()) {
        throw ConfigError("config: unknown key(s) " + bad + " in " + where);
    }
}

template <typename T>
inline void read_field(const nlohmann::json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& doc) {
    RunConfig cfg;
    detail::reject_unknown_keys(doc, {"model", "data", "ground_truth", "loss", "optimizer",
                                      "training", "augment", "output_dir"},
                                "top level");

    if (doc.contains("model")) {
        const auto& m = doc["model"];
        detail::reject_unknown_keys(m, {"preset", "channel_scale", "init_scheme"}, "model");
        detail::read_field(m, "preset", cfg.preset);
        detail::read_field(m, "channel_scale", cfg.channel_scale);
        detail::read_field(m, "init_scheme", cfg.init_scheme);
    }
    if (doc.contains("data")) {
        const auto& d = doc["data"];
        detail::reject_unknown_keys(d, {"dataset_dir", "profile", "synthetic"}, "data");
        detail::read_field(d, "dataset_dir", cfg.dataset_dir);
        detail::read_field(d, "profile", cfg.profile);
        if (d.contains("synthetic")) {
            const auto& s = d["synthetic"];
            detail::reject_unknown_keys(s,
                                        {"width", "height", "count_min", "count_max", "gradient",
                                         "train_scenes", "test_scenes"},
                                        "data.synthetic");
            detail::read_field(s, "width", cfg.synthetic.width);
            detail::read_field(s, "height", cfg.synthetic.height);
            detail::read_field(s, "count_min", cfg.synthetic.count_min);
            detail::read_field(s, "count_max", cfg.synthetic.count_max);
            detail::read_field(s, "gradient", cfg.synthetic.vertical_scale_gradient);
            detail::read_field(s, "train_scenes", cfg.synthetic_train_scenes);
            detail::read_field(s, "test_scenes", cfg.synthetic_test_scenes);
        }
    }
    if (doc.contains("ground_truth")) {
        const auto& g = doc["ground_truth"];
        detail::reject_unknown_keys(
            g, {"mode", "sigma", "beta", "k", "truncation_sigmas", "fallback_sigma"},
            "ground_truth");
        detail::read_field(g, "mode", cfg.ground_truth.mode);
        detail::read_field(g, "sigma", cfg.ground_truth.fixed_sigma);
        detail::read_field(g, "beta", cfg.ground_truth.adaptive.beta);
        detail::read_field(g, "k", cfg.ground_truth.adaptive.k);
        detail::read_field(g, "truncation_sigmas", cfg.ground_truth.adaptive.truncation_radius_sigmas);
        detail::read_field(g, "fallback_sigma", cfg.ground_truth.adaptive.fallback_sigma);
    }
    if (doc.contains("loss")) {
        const auto& l = doc["loss"];
        detail::reject_unknown_keys(l, {"lambda", "levels", "dataset_preset"}, "loss");
        if (l.contains("dataset_preset")) {
            cfg.loss = LossConfig::for_dataset(l["dataset_preset"].get<std::string>());
        }
        detail::read_field(l, "lambda", cfg.loss.lambda);
        detail::read_field(l, "levels", cfg.loss.levels);
    }
    if (doc.contains("optimizer")) {
        const auto& o = doc["optimizer"];
        detail::reject_unknown_keys(o, {"lr", "weight_decay", "beta1", "beta2", "eps"}, "optimizer");
        detail::read_field(o, "lr", cfg.optimizer.lr);
        detail::read_field(o, "weight_decay", cfg.optimizer.weight_decay);
        detail::read_field(o, "beta1", cfg.optimizer.beta1);
        detail::read_field(o, "beta2", cfg.optimizer.beta2);
        detail::read_field(o, "eps", cfg.optimizer.eps);
    }
    if (doc.contains("training")) {
        const auto& t = doc["training"];
        detail::reject_unknown_keys(
            t, {"batch_size", "iterations", "seed", "checkpoint_interval", "augment"}, "training");
        detail::read_field(t, "batch_size", cfg.batch_size);
        detail::read_field(t, "iterations", cfg.iterations);
        detail::read_field(t, "seed", cfg.seed);
        detail::read_field(t, "checkpoint_interval", cfg.checkpoint_interval);
        detail::read_field(t, "augment", cfg.augment);
    }
    if (doc.contains("augment")) {
        const auto& a = doc["augment"];
        detail::reject_unknown_keys(a,
                                    {"flip_prob", "gamma_prob", "gamma_range", "gray_prob",
                                     "random_crops_per_image", "seed"},
                                    "augment");
        detail::read_field(a, "flip_prob", cfg.augment_cfg.flip_prob);
        detail::read_field(a, "gamma_prob", cfg.augment_cfg.gamma_prob);
        if (a.contains("gamma_range")) {
            const auto range = a["gamma_range"].get<std::vector<double>>();
            if (range.size() != 2) throw ConfigError("config: augment.gamma_range must be [lo, hi]");
            cfg.augment_cfg.gamma_lo = range[0];
            cfg.augment_cfg.gamma_hi = range[1];
        }
        detail::read_field(a, "gray_prob", cfg.augment_cfg.gray_prob);
        detail::read_field(a, "random_crops_per_image", cfg.augment_cfg.random_crops_per_image);
        detail::read_field(a, "seed", cfg.augment_cfg.seed);
    }
    detail::read_field(doc, "output_dir", cfg.output_dir);

    cfg.validate();
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    try {
        return parse_run_config(doc);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
}

}  // namespace dsnet
