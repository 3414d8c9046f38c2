#pragma once

#include <map>
#include <string>
#include <vector>

#include "dsnet/ops.hpp"
#include "dsnet/tensor.hpp"

namespace dsnet {

/// Weighting and pooling levels for the combined objective.
struct LossConfig {
    double lambda = 100.0;
    std::vector<std::int64_t> levels{1, 2, 4};

    void validate() const {
        if (lambda < 0.0) throw ConfigError("LossConfig: lambda must be non-negative");
        if (levels.empty()) throw ConfigError("LossConfig: at least one pooling level required");
        for (std::size_t i = 0; i < levels.size(); ++i) {
            if (levels[i] <= 0) throw ConfigError("LossConfig: levels must be positive");
            if (i > 0 && levels[i] <= levels[i - 1]) {
                throw ConfigError("LossConfig: levels must be strictly increasing");
            }
        }
    }

    static LossConfig for_dataset(const std::string& name);
};

/// Per-dataset consistency-loss weights.
inline const std::map<std::string, double>& lambda_presets() {
    static const std::map<std::string, double> presets{
        {"ShanghaiTech-A", 1000.0}, {"ShanghaiTech-B", 100.0}, {"UCF-QNRF", 1000.0},
        {"UCF_CC_50", 100.0},       {"UCSD", 100.0},
    };
    return presets;
}

inline LossConfig LossConfig::for_dataset(const std::string& name) {
    const auto& presets = lambda_presets();
    auto it = presets.find(name);
    if (it == presets.end()) {
        std::string known;
        for (const auto& [k, v] : presets) {
            if (!known.empty()) known += ", ";
            known += k;
        }
        throw ConfigError("LossConfig: unknown dataset '" + name + "' (known: " + known + ")");
    }
    LossConfig cfg;
    cfg.lambda = it->second;
    return cfg;
}

/// Batch-mean of per-image sums of squared pixel differences
/// (no per-pixel averaging).
inline Tensor euclidean_loss(const Tensor& pred, const Tensor& gt) {
    detail::check_same_shape(pred, gt, "euclidean_loss");
    const std::int64_t batch = pred.shape().n;
    if (batch < 1) throw ContractError("euclidean_loss: empty batch");
    Tensor diff = sub(pred, gt);
    return scale(sum_all(mul(diff, diff)), 1.0 / static_cast<double>(batch));
}

/// Multi-scale density-level consistency: for each level k, the L1
/// distance between k x k average-pooled prediction and ground truth,
/// weighted 1/k^2, averaged over the batch.
inline Tensor consistency_loss(const Tensor& pred, const Tensor& gt, const LossConfig& cfg) {
    detail::check_same_shape(pred, gt, "consistency_loss");
    cfg.validate();
    const std::int64_t batch = pred.shape().n;
    if (batch < 1) throw ContractError("consistency_loss: empty batch");
    Tensor total = Tensor::scalar(0.0);
    for (std::int64_t level : cfg.levels) {
        Tensor pa = adaptive_avg_pool(pred, level);
        Tensor ga = adaptive_avg_pool(gt, level);
        Tensor term = sum_all(abs_val(sub(pa, ga)));
        total = add(total, scale(term, 1.0 / static_cast<double>(level * level)));
    }
    return scale(total, 1.0 / static_cast<double>(batch));
}

/// Combined objective L = L_e + lambda * L_c with the components exposed
/// for logging.
struct CombinedLoss {
    Tensor total;
    Tensor euclidean;
    Tensor consistency;
};

inline CombinedLoss combined_loss(const Tensor& pred, const Tensor& gt, const LossConfig& cfg) {
    CombinedLoss out;
    out.euclidean = euclidean_loss(pred, gt);
    out.consistency = consistency_loss(pred, gt, cfg);
    out.total = add(out.euclidean, scale(out.consistency, cfg.lambda));
    return out;
}

}  // namespace dsnet
