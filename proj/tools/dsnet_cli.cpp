// Command-line front end: ground-truth generation, training, evaluation,
// receptive-field analysis and synthetic data generation.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dsnet/dsnet.hpp"

namespace fs = std::filesystem;

namespace {

// Output directory precedence: DSNET_OUT_DIR env var > flag/config value.
std::string resolve_out_dir(const std::string& configured) {
    const char* env = std::getenv("DSNET_OUT_DIR");
    return env && *env ? std::string(env) : configured;
}

dsnet::RunConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return dsnet::RunConfig{};
    return dsnet::load_run_config(path);
}

std::vector<std::int64_t> parse_dilation_list(const std::string& csv) {
    std::vector<std::int64_t> out;
    std::string token;
    for (char c : csv + ",") {
        if (c == ',') {
            if (!token.empty()) {
                out.push_back(std::stoll(token));
                token.clear();
            }
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            token += c;
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            throw dsnet::ConfigError("analyze-rf: bad character '" + std::string(1, c) +
                                     "' in dilation list");
        }
    }
    return out;
}

std::string format_pct(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", fraction * 100.0);
    return buf;
}

int run_synth_data(const std::string& out_dir, std::int64_t count, dsnet::SyntheticSceneSpec spec,
                   std::uint64_t seed) {
    spec.validate();
    fs::create_directories(out_dir);
    for (std::int64_t i = 0; i < count; ++i) {
        dsnet::SyntheticSceneSpec scene_spec = spec;
        scene_spec.seed = dsnet::mix_seed(seed, static_cast<std::uint64_t>(i));
        const dsnet::AnnotatedScene scene = dsnet::synth_scene(scene_spec);
        char stem[32];
        std::snprintf(stem, sizeof(stem), "scene_%04lld", static_cast<long long>(i));
        dsnet::save_scene(out_dir, stem, scene);
    }
    std::cout << "wrote " << count << " scenes to " << out_dir << "\n";
    return 0;
}

int run_gen_gt(const dsnet::RunConfig& cfg, const std::string& scene_path,
               const std::string& dataset_dir, std::string out_path, std::int64_t downsample) {
    const dsnet::KernelMode mode = cfg.ground_truth.kernel_mode();
    auto generate = [&](const std::string& file, const std::string& target) {
        const dsnet::AnnotatedScene scene = dsnet::load_scene(file);
        dsnet::DensityMap map = dsnet::build_density_map(scene, mode);
        if (downsample > 1) {
            map = dsnet::sum_pool_downsample(dsnet::pad_density_to_multiple(map, downsample),
                                             downsample);
        }
        dsnet::save_density_map(target, map);
        char sum[32];
        std::snprintf(sum, sizeof(sum), "%.6f", map.sum());
        std::cout << target << ": " << map.width << "x" << map.height << " sum=" << sum << "\n";
    };

    if (!scene_path.empty()) {
        if (out_path.empty()) out_path = fs::path(scene_path).replace_extension(".dmp").string();
        generate(scene_path, out_path);
        return 0;
    }
    if (dataset_dir.empty()) {
        throw dsnet::ConfigError("gen-gt: provide --scene or --dataset");
    }
    const std::string target_dir = out_path.empty() ? dataset_dir : out_path;
    fs::create_directories(target_dir);
    for (const std::string& file : dsnet::list_scene_files(dataset_dir)) {
        const std::string stem = fs::path(file).stem().string();
        generate(file, (fs::path(target_dir) / (stem + ".dmp")).string());
    }
    return 0;
}

int run_train(const dsnet::RunConfig& cfg) {
    const dsnet::TrainResult result = dsnet::train(cfg);
    if (result.aborted) {
        nlohmann::json record{{"error", result.abort_reason}, {"kind", "numeric"}};
        std::cerr << record.dump() << "\n";
        return 3;
    }
    std::cout << "iterations: " << result.iterations_run << "\n"
              << "initial loss: " << result.initial_loss << "\n"
              << "final loss: " << result.final_loss << "\n"
              << "checkpoint: " << result.checkpoint_path << "\n"
              << "loss log: " << result.log_path << "\n";
    return 0;
}

int run_eval(const dsnet::RunConfig& cfg, const std::string& checkpoint_path,
             const std::string& out_dir) {
    dsnet::ModelGraph graph = dsnet::load_checkpoint(checkpoint_path);

    std::vector<dsnet::AnnotatedScene> scenes;
    std::vector<std::string> names;
    if (!cfg.dataset_dir.empty()) {
        const dsnet::DatasetProfile profile = dsnet::dataset_profile_from_string(cfg.profile);
        for (const std::string& file : dsnet::list_scene_files(cfg.dataset_dir)) {
            scenes.push_back(dsnet::resolution_rules(dsnet::load_scene(file), profile));
            names.push_back(fs::path(file).stem().string());
        }
    } else {
        for (std::int64_t i = 0; i < cfg.synthetic_test_scenes; ++i) {
            scenes.push_back(dsnet::synth_test_scene(cfg.synthetic, cfg.seed, i));
            names.push_back("synthetic_" + std::to_string(i));
        }
    }

    const dsnet::EvalResult result =
        dsnet::evaluate(graph, scenes, cfg.ground_truth.kernel_mode(), &names);

    fs::create_directories(out_dir);
    nlohmann::json doc;
    doc["mae"] = result.mae;
    doc["mse"] = result.mse;
    doc["images"] = nlohmann::json::array();
    for (const dsnet::EvalRow& row : result.rows) {
        doc["images"].push_back({{"name", row.name},
                                 {"estimated", row.estimated},
                                 {"ground_truth", row.ground_truth},
                                 {"millis", row.millis}});
    }
    doc["timing_ms"] = {{"mean", result.ms_mean}, {"min", result.ms_min}, {"max", result.ms_max}};
    std::ofstream json_out((fs::path(out_dir) / "eval_report.json").string(), std::ios::trunc);
    json_out << doc.dump(2) << "\n";

    std::ofstream text_out((fs::path(out_dir) / "eval_report.txt").string(), std::ios::trunc);
    for (const dsnet::EvalRow& row : result.rows) {
        text_out << row.name << "\testimated=" << row.estimated
                 << "\tground_truth=" << row.ground_truth << "\n";
    }
    text_out << "MAE " << result.mae << "\nMSE " << result.mse << "\n";

    std::cout << "images: " << result.rows.size() << "\nMAE " << result.mae << "\nMSE "
              << result.mse << "\nforward ms mean/min/max: " << result.ms_mean << "/"
              << result.ms_min << "/" << result.ms_max << "\n";
    return 0;
}

int run_analyze_rf(const std::vector<std::int64_t>& dilations, std::int64_t kernel,
                   const std::string& connectivity, int blocks, bool ddcb,
                   const std::string& heatmap_path, const std::string& report_path) {
    if (dilations.empty()) throw dsnet::ConfigError("analyze-rf: --dilations required");

    std::string out;
    const dsnet::DilationPath full = dsnet::DilationPath::from_dilations(dilations, kernel);
    const dsnet::Coverage c1 = dsnet::coverage(full, 1);
    const dsnet::Coverage c2 = dsnet::coverage(full, 2);
    out += "composition " + full.str() + ": kernel " + std::to_string(kernel) + ", K=" +
           std::to_string(dsnet::rf_size(full)) + "\n";
    out += "  1-D: touched " + std::to_string(c1.touched) + " of " + std::to_string(c1.rf_cells) +
           " (lost " + format_pct(c1.lost_fraction) + "%)\n";
    out += "  2-D: touched " + std::to_string(c2.touched) + " of " + std::to_string(c2.rf_cells) +
           " (lost " + format_pct(c2.lost_fraction) + "%)\n";

    dsnet::Connectivity conn = dsnet::Dense{};
    if (connectivity == "sequential") {
        conn = dsnet::Sequential{};
    } else if (connectivity == "blocks") {
        conn = dsnet::DenseResidualBlocks{blocks};
    } else if (connectivity != "dense") {
        throw dsnet::ConfigError("analyze-rf: connectivity must be dense|sequential|blocks");
    }
    const dsnet::RFReport report = dsnet::enumerate_dense_paths(dilations, conn, kernel);
    out += "paths (" + connectivity + "): " + std::to_string(report.paths.size()) + "\n";
    out += "distinct receptive-field sizes: {";
    for (std::size_t i = 0; i < report.distinct_sizes.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(report.distinct_sizes[i]);
    }
    out += "}\n";
    out += "max consecutive gap: " + std::to_string(report.max_gap) + "\n";

    const std::vector<dsnet::DilationPath> audit_paths =
        ddcb ? dsnet::ddcb_audit_paths(dilations, kernel)
             : [&report] {
                   std::vector<dsnet::DilationPath> ps;
                   for (const auto& [p, k] : report.paths) ps.push_back(p);
                   return ps;
               }();
    const dsnet::GriddingReport audit = dsnet::gridding_audit(audit_paths);
    out += audit.text();

    std::cout << out;
    if (!report_path.empty()) {
        std::ofstream f(report_path, std::ios::trunc);
        if (!f) throw dsnet::IoError("cannot write report: " + report_path);
        f << out;
    }
    if (!heatmap_path.empty()) {
        dsnet::save_image(heatmap_path, dsnet::support_heatmap(full));
        std::cout << "heatmap: " << heatmap_path << "\n";
    }
    return audit.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dsnet: dense-scale crowd counting toolkit"};
    app.require_subcommand(1);

    std::string config_path;

    // synth-data
    auto* synth = app.add_subcommand("synth-data", "generate a synthetic annotated dataset");
    std::string synth_out = "synth_data";
    std::int64_t synth_count = 64;
    std::uint64_t synth_seed = 0;
    dsnet::SyntheticSceneSpec synth_spec;
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--count", synth_count, "number of scenes");
    synth->add_option("--seed", synth_seed, "dataset seed");
    synth->add_option("--width", synth_spec.width, "scene width");
    synth->add_option("--height", synth_spec.height, "scene height");
    synth->add_option("--min-heads", synth_spec.count_min, "minimum head count");
    synth->add_option("--max-heads", synth_spec.count_max, "maximum head count");
    synth->add_option("--gradient", synth_spec.vertical_scale_gradient,
                      "vertical density gradient (0 = uniform)");

    // gen-gt
    auto* gengt = app.add_subcommand("gen-gt", "generate ground-truth density maps");
    std::string gengt_scene, gengt_dataset, gengt_out;
    std::string gengt_mode;
    double gengt_sigma = -1.0, gengt_beta = -1.0;
    int gengt_k = -1;
    std::int64_t gengt_down = 0;
    gengt->add_option("-c,--config", config_path, "run config JSON");
    gengt->add_option("--scene", gengt_scene, "single scene JSON file");
    gengt->add_option("--dataset", gengt_dataset, "dataset directory of scene files");
    gengt->add_option("--out", gengt_out, "output file (single scene) or directory");
    gengt->add_option("--mode", gengt_mode, "kernel mode: fixed|adaptive");
    gengt->add_option("--sigma", gengt_sigma, "fixed kernel sigma");
    gengt->add_option("--beta", gengt_beta, "adaptive kernel beta");
    gengt->add_option("--k", gengt_k, "adaptive kernel neighbor count");
    gengt->add_option("--downsample", gengt_down, "sum-pool factor (0 = native resolution)");

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model");
    std::string train_out, train_dataset, train_preset;
    std::int64_t train_iters = -1;
    std::int64_t train_seed = -1;
    double train_lr = -1.0, train_lambda = -1.0;
    train_cmd->add_option("-c,--config", config_path, "run config JSON");
    train_cmd->add_option("--out", train_out, "output directory override");
    train_cmd->add_option("--dataset", train_dataset, "dataset directory override");
    train_cmd->add_option("--preset", train_preset, "model preset: toy|full");
    train_cmd->add_option("--iterations", train_iters, "iteration count override");
    train_cmd->add_option("--seed", train_seed, "run seed override");
    train_cmd->add_option("--lr", train_lr, "learning rate override");
    train_cmd->add_option("--lambda", train_lambda, "consistency loss weight override");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint (MAE/MSE)");
    std::string eval_ckpt, eval_dataset, eval_out = "eval";
    eval_cmd->add_option("-c,--config", config_path, "run config JSON");
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--dataset", eval_dataset, "dataset directory override");
    eval_cmd->add_option("--out", eval_out, "report directory");

    // analyze-rf
    auto* rf = app.add_subcommand("analyze-rf", "receptive-field and gridding analysis");
    std::string rf_dilations, rf_connectivity = "dense", rf_heatmap, rf_report;
    std::int64_t rf_kernel = 3;
    int rf_blocks = 3;
    bool rf_ddcb = false;
    rf->add_option("--dilations", rf_dilations, "comma-separated dilation rates")->required();
    rf->add_option("--kernel", rf_kernel, "square kernel size (odd)");
    rf->add_option("--connectivity", rf_connectivity, "dense|sequential|blocks");
    rf->add_option("--blocks", rf_blocks, "block count for blocks connectivity");
    rf->add_flag("--ddcb", rf_ddcb, "audit block-style paths (with trailing fusion conv)");
    rf->add_option("--heatmap", rf_heatmap, "write 2-D support graymap (.pgm/.png)");
    rf->add_option("--out", rf_report, "write the text report to this file");

    try {
        app.parse(argc, argv);

        if (synth->parsed()) {
            return run_synth_data(resolve_out_dir(synth_out), synth_count, synth_spec, synth_seed);
        }
        if (gengt->parsed()) {
            dsnet::RunConfig cfg = load_config_or_default(config_path);
            if (!gengt_mode.empty()) cfg.ground_truth.mode = gengt_mode;
            if (gengt_sigma > 0.0) cfg.ground_truth.fixed_sigma = gengt_sigma;
            if (gengt_beta > 0.0) cfg.ground_truth.adaptive.beta = gengt_beta;
            if (gengt_k > 0) cfg.ground_truth.adaptive.k = gengt_k;
            return run_gen_gt(cfg, gengt_scene, gengt_dataset, gengt_out, gengt_down);
        }
        if (train_cmd->parsed()) {
            dsnet::RunConfig cfg = load_config_or_default(config_path);
            if (!train_out.empty()) cfg.output_dir = train_out;
            if (!train_dataset.empty()) cfg.dataset_dir = train_dataset;
            if (!train_preset.empty()) cfg.preset = train_preset;
            if (train_iters > 0) cfg.iterations = train_iters;
            if (train_seed >= 0) cfg.seed = static_cast<std::uint64_t>(train_seed);
            if (train_lr > 0.0) cfg.optimizer.lr = train_lr;
            if (train_lambda >= 0.0) cfg.loss.lambda = train_lambda;
            cfg.output_dir = resolve_out_dir(cfg.output_dir);
            return run_train(cfg);
        }
        if (eval_cmd->parsed()) {
            dsnet::RunConfig cfg = load_config_or_default(config_path);
            if (!eval_dataset.empty()) cfg.dataset_dir = eval_dataset;
            return run_eval(cfg, eval_ckpt, resolve_out_dir(eval_out));
        }
        if (rf->parsed()) {
            return run_analyze_rf(parse_dilation_list(rf_dilations), rf_kernel, rf_connectivity,
                                  rf_blocks, rf_ddcb, rf_heatmap, rf_report);
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const dsnet::ConfigError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"kind", "config"}}.dump() << "\n";
        return 2;
    } catch (const dsnet::ContractError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"kind", "contract"}}.dump() << "\n";
        return 2;
    } catch (const dsnet::NumericError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"kind", "numeric"}}.dump() << "\n";
        return 3;
    } catch (const dsnet::IoError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"kind", "io"}}.dump() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"kind", "internal"}}.dump() << "\n";
        return 5;
    }
}
