#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dsnet/data.hpp"
#include "dsnet/density.hpp"
#include "dsnet/model.hpp"

namespace dsnet {

struct EvalRow {
    std::string name;
    double estimated = 0.0;
    double ground_truth = 0.0;
    double millis = 0.0;
};

/// Whole-image counting metrics: MAE is the mean absolute count error,
/// MSE the root of the mean squared count error.
struct EvalResult {
    std::vector<EvalRow> rows;
    double mae = 0.0;
    double mse = 0.0;
    double ms_mean = 0.0;
    double ms_min = 0.0;
    double ms_max = 0.0;
};

struct CountMetrics {
    double mae = 0.0;
    double mse = 0.0;
};

/// MAE = (1/N) sum |C_i - C_i_gt|; MSE = sqrt((1/N) sum |C_i - C_i_gt|^2).
inline CountMetrics count_metrics(const std::vector<double>& estimated,
                                  const std::vector<double>& ground_truth) {
    if (estimated.empty() || estimated.size() != ground_truth.size()) {
        throw ContractError("count_metrics: need equal-length non-empty count lists");
    }
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t i = 0; i < estimated.size(); ++i) {
        const double err = estimated[i] - ground_truth[i];
        abs_sum += std::abs(err);
        sq_sum += err * err;
    }
    const double n = static_cast<double>(estimated.size());
    return {abs_sum / n, std::sqrt(sq_sum / n)};
}

/// Estimated count for one scene: pad to the model stride, run the network
/// without taping, crop the prediction to the original extent, and apply
/// the ROI when present (each output cell weighted by the in-ROI fraction
/// of its pixel block).
inline double predict_count(ModelGraph& graph, const AnnotatedScene& scene) {
    const std::int64_t stride = graph.output_stride();
    const PaddedScene padded = pad_to_multiple(scene, stride);
    const Tensor input = image_to_tensor(padded.scene.image);
    NoGradGuard no_grad;
    const Tensor pred = forward(graph, input);
    const Shape4 ps = pred.shape();
    const std::int64_t rows = (padded.orig_height + stride - 1) / stride;
    const std::int64_t cols = (padded.orig_width + stride - 1) / stride;

    double count = 0.0;
    for (std::int64_t r = 0; r < rows && r < ps.h; ++r) {
        for (std::int64_t c = 0; c < cols && c < ps.w; ++c) {
            double weight = 1.0;
            if (padded.scene.roi) {
                std::int64_t inside = 0;
                const std::int64_t pw = padded.scene.width();
                for (std::int64_t dy = 0; dy < stride; ++dy) {
                    for (std::int64_t dx = 0; dx < stride; ++dx) {
                        inside += (*padded.scene.roi)[static_cast<std::size_t>(
                            (r * stride + dy) * pw + (c * stride + dx))];
                    }
                }
                weight = static_cast<double>(inside) / static_cast<double>(stride * stride);
            }
            count += weight * pred.at(0, 0, r, c);
        }
    }
    return count;
}

/// Evaluate a model over whole scenes. Ground-truth counts come from the
/// (ROI-masked) density maps, so partial people at ROI edges contribute
/// partial count.
inline EvalResult evaluate(ModelGraph& graph, const std::vector<AnnotatedScene>& scenes,
                           const KernelMode& mode,
                           const std::vector<std::string>* names = nullptr) {
    if (scenes.empty()) throw ConfigError("evaluate: empty scene list");
    EvalResult result;
    std::vector<double> estimated, ground_truth;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const AnnotatedScene& scene = scenes[i];
        const DensityMap gt = build_density_map(scene, mode);
        const double gt_count = gt.sum();

        const auto t0 = std::chrono::steady_clock::now();
        const double est = predict_count(graph, scene);
        const auto t1 = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

        EvalRow row;
        row.name = names && i < names->size() ? (*names)[i] : "scene_" + std::to_string(i);
        row.estimated = est;
        row.ground_truth = gt_count;
        row.millis = ms;
        result.rows.push_back(row);

        estimated.push_back(est);
        ground_truth.push_back(gt_count);
        result.ms_min = result.rows.size() == 1 ? ms : std::min(result.ms_min, ms);
        result.ms_max = std::max(result.ms_max, ms);
        result.ms_mean += ms;
    }
    const CountMetrics metrics = count_metrics(estimated, ground_truth);
    result.mae = metrics.mae;
    result.mse = metrics.mse;
    result.ms_mean /= static_cast<double>(scenes.size());
    if (result.mae > result.mse * (1.0 + 1e-12) + 1e-12) {
        throw NumericError("evaluate: MAE " + std::to_string(result.mae) + " exceeds MSE " +
                           std::to_string(result.mse));
    }
    return result;
}

/// MAE of the constant predictor that always answers the mean training
/// count; the reference a trained model has to beat.
inline double constant_mean_baseline_mae(const std::vector<double>& train_counts,
                                         const std::vector<double>& test_counts) {
    if (train_counts.empty() || test_counts.empty()) {
        throw ContractError("constant_mean_baseline_mae: empty count list");
    }
    double mean = 0.0;
    for (double c : train_counts) mean += c;
    mean /= static_cast<double>(train_counts.size());
    double abs_sum = 0.0;
    for (double c : test_counts) abs_sum += std::abs(c - mean);
    return abs_sum / static_cast<double>(test_counts.size());
}

}  // namespace dsnet
