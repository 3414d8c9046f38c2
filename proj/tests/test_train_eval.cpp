#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dsnet/eval.hpp"
#include "dsnet/train.hpp"

using namespace dsnet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("dsnet_train_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

RunConfig tiny_config(const std::string& out_dir) {
    RunConfig cfg;
    cfg.preset = "toy";
    cfg.channel_scale = 1.0 / 32.0;
    cfg.synthetic.width = 32;
    cfg.synthetic.height = 32;
    cfg.synthetic.count_min = 2;
    cfg.synthetic.count_max = 6;
    cfg.synthetic_train_scenes = 4;
    cfg.synthetic_test_scenes = 2;
    cfg.ground_truth.mode = "fixed";
    cfg.ground_truth.fixed_sigma = 2.0;
    cfg.loss.lambda = 100.0;
    cfg.loss.levels = {1, 2, 4};
    cfg.optimizer.lr = 1e-4;
    cfg.iterations = 5;
    cfg.seed = 11;
    cfg.output_dir = out_dir;
    return cfg;
}

}  // namespace

TEST(CountMetrics, HandCases) {
    // Perfect predictor.
    const CountMetrics perfect = count_metrics({5, 7}, {5, 7});
    EXPECT_DOUBLE_EQ(perfect.mae, 0.0);
    EXPECT_DOUBLE_EQ(perfect.mse, 0.0);

    // Counts (10, 20) vs ground truth (12, 16).
    const CountMetrics mixed = count_metrics({10, 20}, {12, 16});
    EXPECT_DOUBLE_EQ(mixed.mae, 3.0);
    EXPECT_DOUBLE_EQ(mixed.mse, std::sqrt(10.0));

    // Constant-zero predictor on counts (5, 7).
    const CountMetrics zero = count_metrics({0, 0}, {5, 7});
    EXPECT_DOUBLE_EQ(zero.mae, 6.0);
}

TEST(CountMetrics, MaeNeverExceedsMse) {
    Rng rng(211);
    for (int trial = 0; trial < 50; ++trial) {
        const std::int64_t n = rng.uniform_int(1, 20);
        std::vector<double> est, gt;
        for (std::int64_t i = 0; i < n; ++i) {
            est.push_back(rng.uniform(0, 100));
            gt.push_back(rng.uniform(0, 100));
        }
        const CountMetrics m = count_metrics(est, gt);
        EXPECT_LE(m.mae, m.mse + 1e-12);
    }
}

TEST(ConstantBaseline, HandCase) {
    // Train counts (10, 20): mean 15. Test counts (10, 20): MAE 5.
    EXPECT_DOUBLE_EQ(constant_mean_baseline_mae({10, 20}, {10, 20}), 5.0);
}

// Gradient descent on a bowl: lambda = 0, one parameter, quadratic toy
// objective; the loss strictly decreases for a small learning rate.
TEST(Training, QuadraticToyObjectiveDescends) {
    ParamStore store;
    Tensor& p = store.create("p", {1, 1, 1, 1});
    p.data()[0] = 5.0;
    double prev_loss = 1e300;
    for (int it = 0; it < 40; ++it) {
        Tensor loss = [&p] {
            Tensor target = Tensor::scalar(3.0);
            Tensor diff = sub(p, target);
            return mul(diff, diff);
        }();
        EXPECT_LT(loss.item(), prev_loss);
        prev_loss = loss.item();
        const GradMap grads = backward(loss, store);
        adam_step(store, grads, 0.05, 0.0);
    }
    EXPECT_NEAR(p.data()[0], 3.0, 0.5);
}

TEST(Training, SameSeedGivesBitwiseIdenticalLossLogs) {
    const fs::path dir_a = temp_dir("det_a");
    const fs::path dir_b = temp_dir("det_b");
    RunConfig cfg_a = tiny_config(dir_a.string());
    RunConfig cfg_b = tiny_config(dir_b.string());
    const TrainResult ra = train(cfg_a);
    const TrainResult rb = train(cfg_b);
    const std::string log_a = read_file(ra.log_path);
    const std::string log_b = read_file(rb.log_path);
    ASSERT_FALSE(log_a.empty());
    EXPECT_EQ(log_a, log_b);

    RunConfig cfg_c = tiny_config(temp_dir("det_c").string());
    cfg_c.seed = 12;
    const TrainResult rc = train(cfg_c);
    EXPECT_NE(read_file(rc.log_path), log_a);
}

TEST(Training, LambdaIsLiveAndLinearAtIterationZero) {
    RunConfig with = tiny_config(temp_dir("lambda_on").string());
    RunConfig without = tiny_config(temp_dir("lambda_off").string());
    without.loss.lambda = 0.0;
    const TrainResult r_with = train(with);
    const TrainResult r_without = train(without);

    // Parse iteration 0: iter, L_e, L_c, L.
    auto parse_first = [](const std::string& log) {
        std::istringstream ss(log);
        std::int64_t it;
        double le, lc, lt;
        ss >> it >> le >> lc >> lt;
        return std::tuple<double, double, double>(le, lc, lt);
    };
    const auto [le_w, lc_w, lt_w] = parse_first(read_file(r_with.log_path));
    const auto [le_o, lc_o, lt_o] = parse_first(read_file(r_without.log_path));

    // Same seed, same data: identical iteration-0 components.
    EXPECT_DOUBLE_EQ(le_w, le_o);
    EXPECT_DOUBLE_EQ(lc_w, lc_o);
    // L(lambda) = L_e + lambda * L_c, exactly.
    EXPECT_NEAR(lt_w, le_w + 100.0 * lc_w, 1e-12 * std::max(1.0, lt_w));
    EXPECT_DOUBLE_EQ(lt_o, le_o);
    // The consistency loss is live: trajectories diverge.
    EXPECT_NE(r_with.final_loss, r_without.final_loss);
}

TEST(Training, NonFiniteLossAbortsWithLastGoodCheckpoint) {
    RunConfig cfg = tiny_config(temp_dir("abort").string());
    cfg.optimizer.lr = 1e18;  // guaranteed blow-up after the first step
    cfg.iterations = 10;
    const TrainResult result = train(cfg);
    EXPECT_TRUE(result.aborted);
    EXPECT_FALSE(result.abort_reason.empty());
    EXPECT_TRUE(fs::exists(fs::path(cfg.output_dir) / "checkpoint_lastgood.dsnet"));
    // The rescue checkpoint must load.
    ModelGraph rescued =
        load_checkpoint((fs::path(cfg.output_dir) / "checkpoint_lastgood.dsnet").string());
    EXPECT_GT(rescued.params.size(), 0u);
}

TEST(Training, CheckpointIntervalWritesSnapshots) {
    RunConfig cfg = tiny_config(temp_dir("interval").string());
    cfg.iterations = 4;
    cfg.checkpoint_interval = 2;
    train(cfg);
    EXPECT_TRUE(fs::exists(fs::path(cfg.output_dir) / "checkpoint_000002.dsnet"));
    EXPECT_TRUE(fs::exists(fs::path(cfg.output_dir) / "checkpoint.dsnet"));
}

TEST(Evaluate, PaddedForwardMatchesDirectSumOnDivisibleInputs) {
    ModelGraph g = build_dsnet_toy(1.0 / 16.0);
    init_params(g, 5);
    SyntheticSceneSpec spec;
    spec.width = 64;
    spec.height = 64;
    spec.seed = 9;
    const AnnotatedScene scene = synth_scene(spec);

    const double count = predict_count(g, scene);
    NoGradGuard no_grad;
    const Tensor direct = forward(g, image_to_tensor(scene.image));
    double direct_sum = 0.0;
    for (std::int64_t i = 0; i < direct.numel(); ++i) direct_sum += direct.data()[i];
    EXPECT_NEAR(count, direct_sum, 1e-6 * std::max(1.0, std::abs(direct_sum)));
}

TEST(Evaluate, RoiMasksPredictions) {
    ModelGraph g = build_dsnet_toy(1.0 / 16.0);
    init_params(g, 6);
    SyntheticSceneSpec spec;
    spec.seed = 10;
    AnnotatedScene scene = synth_scene(spec);
    scene.roi = std::vector<std::uint8_t>(static_cast<std::size_t>(64 * 64), 0);
    EXPECT_DOUBLE_EQ(predict_count(g, scene), 0.0);
}

TEST(Evaluate, AggregatesAndOrdering) {
    ModelGraph g = build_dsnet_toy(1.0 / 16.0);
    init_params(g, 7);
    std::vector<AnnotatedScene> scenes;
    SyntheticSceneSpec spec;
    for (std::uint64_t s = 0; s < 3; ++s) {
        spec.seed = s;
        scenes.push_back(synth_scene(spec));
    }
    const EvalResult result = evaluate(g, scenes, FixedKernel{2.0});
    ASSERT_EQ(result.rows.size(), 3u);
    EXPECT_LE(result.mae, result.mse + 1e-12);
    EXPECT_GE(result.ms_min, 0.0);
    EXPECT_GE(result.ms_max, result.ms_min);
    EXPECT_THROW(evaluate(g, {}, FixedKernel{2.0}), ConfigError);
}

TEST(RunConfigParsing, StrictUnknownKeyRejection) {
    const nlohmann::json good = {
        {"model", {{"preset", "toy"}, {"channel_scale", 0.25}}},
        {"training", {{"iterations", 3}, {"seed", 4}}},
        {"loss", {{"dataset_preset", "UCSD"}}},
    };
    const RunConfig cfg = parse_run_config(good);
    EXPECT_EQ(cfg.preset, "toy");
    EXPECT_DOUBLE_EQ(cfg.loss.lambda, 100.0);  // UCSD preset
    EXPECT_EQ(cfg.iterations, 3);

    nlohmann::json bad = good;
    bad["training"]["learning_rate"] = 1.0;  // wrong section
    try {
        parse_run_config(bad);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos);
    }

    nlohmann::json top = good;
    top["extra_top"] = 1;
    EXPECT_THROW(parse_run_config(top), ConfigError);
}

TEST(RunConfigParsing, ValidationCatchesBadValues) {
    nlohmann::json doc = {{"training", {{"iterations", 0}}}};
    EXPECT_THROW(parse_run_config(doc), ConfigError);
    doc = {{"model", {{"preset", "resnet"}}}};
    EXPECT_THROW(parse_run_config(doc), ConfigError);
    doc = {{"optimizer", {{"lr", -1.0}}}};
    EXPECT_THROW(parse_run_config(doc), ConfigError);
}

TEST(SyntheticSplits, TrainAndTestStreamsDiffer) {
    SyntheticSceneSpec spec;
    const AnnotatedScene train0 = synth_train_scene(spec, 1, 0);
    const AnnotatedScene test0 = synth_test_scene(spec, 1, 0);
    EXPECT_NE(train0.image.pixels, test0.image.pixels);
    const AnnotatedScene train0_again = synth_train_scene(spec, 1, 0);
    EXPECT_EQ(train0.image.pixels, train0_again.image.pixels);
}
