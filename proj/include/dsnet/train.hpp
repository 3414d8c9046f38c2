#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dsnet/checkpoint.hpp"
#include "dsnet/config.hpp"
#include "dsnet/data.hpp"
#include "dsnet/losses.hpp"
#include "dsnet/model.hpp"

namespace dsnet {

struct TrainSample {
    Tensor input;   // (1, 3, h, w)
    Tensor target;  // (1, 1, h/8, w/8)
};

namespace detail {

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline TrainSample make_sample(const AnnotatedScene& scene, const KernelMode& mode,
                               std::int64_t stride) {
    const PaddedScene padded = pad_to_multiple(scene, stride);
    DensityMap density = build_density_map(scene, mode);
    density = pad_density_to_multiple(density, stride);
    TrainSample s;
    s.input = image_to_tensor(padded.scene.image);
    s.target = density_to_tensor(sum_pool_downsample(density, stride));
    return s;
}

inline Tensor concat_batch(const std::vector<Tensor>& items) {
    if (items.size() == 1) return items.front();
    const Shape4 first = items.front().shape();
    std::int64_t total_n = 0;
    for (const Tensor& t : items) {
        const Shape4 s = t.shape();
        if (s.c != first.c || s.h != first.h || s.w != first.w) {
            throw ContractError("batching requires equal sample dims, got " + s.str() + " vs " +
                                first.str() + " (use batch_size 1 for variable-size data)");
        }
        total_n += s.n;
    }
    Tensor out = Tensor::zeros({total_n, first.c, first.h, first.w});
    double* dst = out.data();
    for (const Tensor& t : items) {
        std::copy(t.data(), t.data() + t.numel(), dst);
        dst += t.numel();
    }
    return out;
}

}  // namespace detail

/// Deterministic train/test scene seeds: branch 1 for training, branch 2
/// for held-out evaluation.
inline AnnotatedScene synth_train_scene(const SyntheticSceneSpec& base, std::uint64_t run_seed,
                                        std::int64_t index) {
    SyntheticSceneSpec spec = base;
    spec.seed = mix_seed(mix_seed(run_seed, 1), static_cast<std::uint64_t>(index));
    return synth_scene(spec);
}

inline AnnotatedScene synth_test_scene(const SyntheticSceneSpec& base, std::uint64_t run_seed,
                                       std::int64_t index) {
    SyntheticSceneSpec spec = base;
    spec.seed = mix_seed(mix_seed(run_seed, 2), static_cast<std::uint64_t>(index));
    return synth_scene(spec);
}

/// Scenes named by the run config: a dataset directory (with resolution
/// rules applied) or seeded synthetic scenes.
inline std::vector<AnnotatedScene> load_training_scenes(const RunConfig& cfg) {
    std::vector<AnnotatedScene> scenes;
    if (!cfg.dataset_dir.empty()) {
        const DatasetProfile profile = dataset_profile_from_string(cfg.profile);
        for (const std::string& file : list_scene_files(cfg.dataset_dir)) {
            scenes.push_back(resolution_rules(load_scene(file), profile));
        }
        if (scenes.empty()) throw ConfigError("no scene files found in " + cfg.dataset_dir);
    } else {
        for (std::int64_t i = 0; i < cfg.synthetic_train_scenes; ++i) {
            scenes.push_back(synth_train_scene(cfg.synthetic, cfg.seed, i));
        }
    }
    return scenes;
}

struct TrainResult {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::int64_t iterations_run = 0;
    bool aborted = false;
    std::string abort_reason;
    std::string checkpoint_path;
    std::string log_path;
};

inline ModelGraph build_model_from_config(const RunConfig& cfg) {
    if (cfg.preset == "full") return build_dsnet_full();
    return build_dsnet_toy(cfg.channel_scale);
}

/// Train per the run config. Deterministic given the seed: the loss log
/// (one tab-separated line per iteration: iter, L_e, L_c, L) is
/// bitwise-reproducible. Aborts with the last good checkpoint if the loss
/// or any gradient turns non-finite.
inline TrainResult train(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    cfg.validate();
    fs::create_directories(cfg.output_dir);

    ModelGraph graph = build_model_from_config(cfg);
    if (cfg.init_scheme == "he") {
        init_params_he(graph, cfg.seed);
    } else {
        init_params(graph, cfg.seed);
    }
    const std::int64_t stride = graph.output_stride();
    const KernelMode mode = cfg.ground_truth.kernel_mode();

    const std::vector<AnnotatedScene> scenes = load_training_scenes(cfg);

    // Without augmentation the sample set is fixed; precompute it. With
    // augmentation each epoch regenerates its patches from (seed, epoch,
    // scene) substreams.
    std::vector<TrainSample> samples;
    std::int64_t samples_per_epoch;
    if (!cfg.augment) {
        for (const AnnotatedScene& s : scenes) samples.push_back(detail::make_sample(s, mode, stride));
        samples_per_epoch = static_cast<std::int64_t>(samples.size());
    } else {
        samples_per_epoch = static_cast<std::int64_t>(scenes.size()) *
                            (4 + cfg.augment_cfg.random_crops_per_image);
    }

    TrainResult result;
    result.log_path = (fs::path(cfg.output_dir) / "loss_log.tsv").string();
    result.checkpoint_path = (fs::path(cfg.output_dir) / "checkpoint.dsnet").string();
    std::ofstream log(result.log_path, std::ios::trunc);
    if (!log) throw IoError("cannot write loss log: " + result.log_path);

    std::int64_t cached_epoch = -1;
    std::vector<TrainSample> epoch_cache;
    auto sample_at = [&](std::int64_t flat_index) -> const TrainSample& {
        if (!cfg.augment) return samples[static_cast<std::size_t>(flat_index % samples_per_epoch)];
        const std::int64_t epoch = flat_index / samples_per_epoch;
        if (epoch != cached_epoch) {
            epoch_cache.clear();
            const Rng epoch_rng(mix_seed(mix_seed(cfg.augment_cfg.seed, 3), static_cast<std::uint64_t>(epoch)));
            for (std::size_t si = 0; si < scenes.size(); ++si) {
                const Rng scene_rng = epoch_rng.substream(si);
                for (const AnnotatedScene& patch : epoch_samples(scenes[si], cfg.augment_cfg, scene_rng)) {
                    epoch_cache.push_back(detail::make_sample(patch, mode, stride));
                }
            }
            cached_epoch = epoch;
        }
        return epoch_cache[static_cast<std::size_t>(flat_index % samples_per_epoch)];
    };

    auto abort_run = [&](std::int64_t iter, const std::string& reason) {
        const std::string lastgood = (fs::path(cfg.output_dir) / "checkpoint_lastgood.dsnet").string();
        save_checkpoint(lastgood, graph);
        result.aborted = true;
        result.abort_reason = "iteration " + std::to_string(iter) + ": " + reason +
                              "; last good parameters in " + lastgood;
        result.iterations_run = iter;
        return result;
    };

    for (std::int64_t it = 0; it < cfg.iterations; ++it) {
        std::vector<Tensor> inputs, targets;
        for (std::int64_t b = 0; b < cfg.batch_size; ++b) {
            const TrainSample& s = sample_at(it * cfg.batch_size + b);
            inputs.push_back(s.input);
            targets.push_back(s.target);
        }
        Tensor input = detail::concat_batch(inputs);
        Tensor target = detail::concat_batch(targets);

        Tensor pred = forward(graph, input);
        const CombinedLoss loss = combined_loss(pred, target, cfg.loss);
        const double le = loss.euclidean.item();
        const double lc = loss.consistency.item();
        const double lt = loss.total.item();
        log << it << "\t" << detail::format_g17(le) << "\t" << detail::format_g17(lc) << "\t"
            << detail::format_g17(lt) << "\n";
        if (!std::isfinite(lt)) return abort_run(it, "non-finite loss");
        if (it == 0) result.initial_loss = lt;
        result.final_loss = lt;

        const GradMap grads = backward(loss.total, graph.params);
        for (const auto& [path, g] : grads) {
            for (double v : g.vec()) {
                if (!std::isfinite(v)) {
                    return abort_run(it, "non-finite gradient in parameter '" + path + "'");
                }
            }
        }
        adam_step(graph.params, grads, cfg.optimizer.lr, cfg.optimizer.weight_decay,
                  cfg.optimizer.beta1, cfg.optimizer.beta2, cfg.optimizer.eps);
        result.iterations_run = it + 1;

        if (cfg.checkpoint_interval > 0 && (it + 1) % cfg.checkpoint_interval == 0 &&
            it + 1 < cfg.iterations) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_%06lld.dsnet",
                          static_cast<long long>(it + 1));
            save_checkpoint((fs::path(cfg.output_dir) / name).string(), graph);
        }
    }

    save_checkpoint(result.checkpoint_path, graph);
    return result;
}

}  // namespace dsnet
