#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dsnet/adam.hpp"
#include "dsnet/ops.hpp"
#include "dsnet/tensor.hpp"
#include "test_helpers.hpp"

using namespace dsnet;
using dsnet::testing::conv2d_reference;
using dsnet::testing::finite_difference_check;
using dsnet::testing::max_abs_diff;
using dsnet::testing::random_tensor;

namespace {

Tensor zero_bias(std::int64_t channels) { return Tensor::zeros({1, channels, 1, 1}); }

}  // namespace

TEST(Conv2d, BoxSumIdentity) {
    Tensor input = Tensor::filled({1, 1, 3, 3}, 1.0);
    Tensor kernel = Tensor::filled({1, 1, 3, 3}, 1.0);
    Conv2dSpec spec = Conv2dSpec::same_padded(1, 1, 3);
    Tensor out = conv2d(input, kernel, zero_bias(1), spec);
    EXPECT_DOUBLE_EQ(out.at(0, 0, 1, 1), 9.0);
    EXPECT_DOUBLE_EQ(out.at(0, 0, 0, 0), 4.0);
    EXPECT_DOUBLE_EQ(out.at(0, 0, 0, 2), 4.0);
    EXPECT_DOUBLE_EQ(out.at(0, 0, 2, 0), 4.0);
    EXPECT_DOUBLE_EQ(out.at(0, 0, 2, 2), 4.0);
}

TEST(Conv2d, DilatedImpulseResponse) {
    Tensor input = Tensor::zeros({1, 1, 7, 7});
    input.at(0, 0, 3, 3) = 1.0;
    Tensor kernel = Tensor::filled({1, 1, 3, 3}, 1.0);
    Conv2dSpec spec;
    spec.in_channels = 1;
    spec.out_channels = 1;
    spec.kernel = 3;
    spec.dilation = 3;
    spec.padding = 0;
    Tensor out = conv2d(input, kernel, zero_bias(1), spec);
    ASSERT_EQ(out.shape(), (Shape4{1, 1, 1, 1}));
    EXPECT_DOUBLE_EQ(out.item(), 1.0);
}

TEST(Conv2d, MatchesNaiveReference) {
    Rng rng(42);
    Tensor input = random_tensor({1, 2, 5, 5}, rng);
    Tensor kernel = random_tensor({3, 2, 3, 3}, rng);
    Tensor bias = random_tensor({1, 3, 1, 1}, rng);
    Conv2dSpec spec;
    spec.in_channels = 2;
    spec.out_channels = 3;
    spec.kernel = 3;
    spec.dilation = 2;
    spec.padding = 2;
    Tensor out = conv2d(input, kernel, bias, spec);
    Tensor ref = conv2d_reference(input, kernel, bias, 2, 2);
    ASSERT_EQ(out.shape(), ref.shape());
    EXPECT_LT(max_abs_diff(out, ref), 1e-12);
}

// Randomized property: conv2d equals the reference on all shapes <= 8.
TEST(Conv2d, PropertyMatchesReferenceOnSmallShapes) {
    Rng rng(7);
    for (int trial = 0; trial < 60; ++trial) {
        const std::int64_t n = rng.uniform_int(1, 2);
        const std::int64_t cin = rng.uniform_int(1, 3);
        const std::int64_t cout = rng.uniform_int(1, 3);
        const std::int64_t k = 2 * rng.uniform_int(0, 2) + 1;  // 1, 3, 5
        const std::int64_t d = rng.uniform_int(1, 3);
        const std::int64_t span = d * (k - 1);
        const std::int64_t h = std::min<std::int64_t>(8, span + rng.uniform_int(1, 4));
        const std::int64_t w = std::min<std::int64_t>(8, span + rng.uniform_int(1, 4));
        const std::int64_t p = rng.uniform_int(0, 2);
        if (h + 2 * p - span <= 0 || w + 2 * p - span <= 0) continue;

        Tensor input = random_tensor({n, cin, h, w}, rng);
        Tensor kernel = random_tensor({cout, cin, k, k}, rng);
        Tensor bias = random_tensor({1, cout, 1, 1}, rng);
        Conv2dSpec spec;
        spec.in_channels = cin;
        spec.out_channels = cout;
        spec.kernel = k;
        spec.dilation = d;
        spec.padding = p;
        Tensor out = conv2d(input, kernel, bias, spec);
        Tensor ref = conv2d_reference(input, kernel, bias, d, p);
        ASSERT_EQ(out.shape(), ref.shape());
        ASSERT_LT(max_abs_diff(out, ref), 1e-12) << "trial " << trial;
    }
}

// Gridding structure made observable: with an impulse input, outputs are
// nonzero only at tap offsets that are multiples of the dilation.
TEST(Conv2d, DilationImpulseTouchesOnlyLattice) {
    for (std::int64_t d : {2, 3}) {
        const std::int64_t size = 4 * d + 1;
        Tensor input = Tensor::zeros({1, 1, size, size});
        const std::int64_t center = size / 2;
        input.at(0, 0, center, center) = 1.0;
        Tensor kernel = Tensor::filled({1, 1, 3, 3}, 1.0);
        Conv2dSpec spec;
        spec.in_channels = 1;
        spec.out_channels = 1;
        spec.kernel = 3;
        spec.dilation = d;
        spec.padding = d;
        Tensor out = conv2d(input, kernel, zero_bias(1), spec);
        for (std::int64_t y = 0; y < size; ++y) {
            for (std::int64_t x = 0; x < size; ++x) {
                const bool lattice = (std::abs(y - center) % d == 0) &&
                                     (std::abs(x - center) % d == 0) &&
                                     std::abs(y - center) <= d && std::abs(x - center) <= d;
                if (lattice) {
                    EXPECT_DOUBLE_EQ(out.at(0, 0, y, x), 1.0);
                } else {
                    EXPECT_DOUBLE_EQ(out.at(0, 0, y, x), 0.0);
                }
            }
        }
    }
}

TEST(Conv2d, ShapeContractErrors) {
    Tensor input = Tensor::zeros({1, 2, 4, 4});
    Tensor kernel = Tensor::zeros({3, 2, 3, 3});
    Conv2dSpec spec;
    spec.in_channels = 2;
    spec.out_channels = 3;
    spec.kernel = 3;
    spec.padding = 1;

    Tensor bad_kernel = Tensor::zeros({3, 1, 3, 3});
    EXPECT_THROW(conv2d(input, bad_kernel, zero_bias(3), spec), ContractError);

    Tensor bad_input = Tensor::zeros({1, 1, 4, 4});
    EXPECT_THROW(conv2d(bad_input, kernel, zero_bias(3), spec), ContractError);

    EXPECT_THROW(conv2d(input, kernel, zero_bias(2), spec), ContractError);

    EXPECT_THROW(Conv2dSpec::same_padded(2, 3, 4), ConfigError);
}

TEST(Conv2d, PureForwardIsBitwiseDeterministic) {
    Rng rng(11);
    Tensor input = random_tensor({1, 3, 6, 6}, rng);
    Tensor kernel = random_tensor({4, 3, 3, 3}, rng);
    Tensor bias = random_tensor({1, 4, 1, 1}, rng);
    Conv2dSpec spec = Conv2dSpec::same_padded(3, 4, 3, 2);
    Tensor a = conv2d(input, kernel, bias, spec);
    Tensor b = conv2d(input, kernel, bias, spec);
    EXPECT_EQ(a.vec(), b.vec());
}

TEST(MaxPool, HandCase) {
    Tensor input = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor out = max_pool_2x2(input);
    ASSERT_EQ(out.numel(), 1);
    EXPECT_DOUBLE_EQ(out.item(), 4.0);
}

TEST(MaxPool, ConstantInputIdempotent) {
    Tensor input = Tensor::filled({1, 2, 4, 4}, 2.5);
    Tensor out = max_pool_2x2(input);
    for (std::int64_t i = 0; i < out.numel(); ++i) EXPECT_DOUBLE_EQ(out.data()[i], 2.5);
}

TEST(MaxPool, MatchesBruteForceWindows) {
    Rng rng(3);
    Tensor input = random_tensor({1, 1, 4, 4}, rng);
    Tensor out = max_pool_2x2(input);
    for (std::int64_t y = 0; y < 2; ++y) {
        for (std::int64_t x = 0; x < 2; ++x) {
            double m = -1e300;
            for (std::int64_t dy = 0; dy < 2; ++dy) {
                for (std::int64_t dx = 0; dx < 2; ++dx) {
                    m = std::max(m, input.at(0, 0, 2 * y + dy, 2 * x + dx));
                }
            }
            EXPECT_DOUBLE_EQ(out.at(0, 0, y, x), m);
        }
    }
}

TEST(MaxPool, OddDimsRejected) {
    EXPECT_THROW(max_pool_2x2(Tensor::zeros({1, 1, 3, 4})), ConfigError);
    EXPECT_THROW(max_pool_2x2(Tensor::zeros({1, 1, 4, 5})), ConfigError);
}

TEST(MaxPool, TieBreakRoutesGradientToFirstOccurrence) {
    Tensor input = Tensor::filled({1, 1, 2, 2}, 1.0, true);
    Tensor loss = sum_all(max_pool_2x2(input));
    backward(loss);
    EXPECT_DOUBLE_EQ(input.grad()[0], 1.0);  // row-major first occurrence
    EXPECT_DOUBLE_EQ(input.grad()[1], 0.0);
    EXPECT_DOUBLE_EQ(input.grad()[2], 0.0);
    EXPECT_DOUBLE_EQ(input.grad()[3], 0.0);
}

TEST(AdaptiveAvgPool, GlobalMeanAtK1) {
    Rng rng(5);
    Tensor input = random_tensor({1, 1, 5, 7}, rng);
    Tensor out = adaptive_avg_pool(input, 1);
    double mean = 0.0;
    for (std::int64_t i = 0; i < input.numel(); ++i) mean += input.data()[i];
    mean /= static_cast<double>(input.numel());
    EXPECT_NEAR(out.item(), mean, 1e-12);
}

TEST(AdaptiveAvgPool, QuadrantMeans) {
    std::vector<double> vals(16);
    for (int i = 0; i < 16; ++i) vals[static_cast<std::size_t>(i)] = i;
    Tensor input = Tensor::from_data({1, 1, 4, 4}, vals);
    Tensor out = adaptive_avg_pool(input, 2);
    EXPECT_DOUBLE_EQ(out.at(0, 0, 0, 0), 2.5);
    EXPECT_DOUBLE_EQ(out.at(0, 0, 0, 1), 4.5);
    EXPECT_DOUBLE_EQ(out.at(0, 0, 1, 0), 10.5);
    EXPECT_DOUBLE_EQ(out.at(0, 0, 1, 1), 12.5);
}

TEST(AdaptiveAvgPool, ConstantMap) {
    Tensor input = Tensor::filled({1, 1, 6, 6}, 3.25);
    for (std::int64_t k : {1, 2, 3, 4, 5}) {
        Tensor out = adaptive_avg_pool(input, k);
        for (std::int64_t i = 0; i < out.numel(); ++i) EXPECT_DOUBLE_EQ(out.data()[i], 3.25);
    }
}

// The bins partition the input exactly: sum of bin means times bin areas
// equals the input sum.
TEST(AdaptiveAvgPool, BinsPartitionInput) {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const std::int64_t h = rng.uniform_int(2, 9);
        const std::int64_t w = rng.uniform_int(2, 9);
        const std::int64_t k = rng.uniform_int(1, std::min(h, w));
        Tensor input = random_tensor({1, 1, h, w}, rng);
        Tensor pooled = adaptive_avg_pool(input, k);
        double via_bins = 0.0;
        for (std::int64_t bi = 0; bi < k; ++bi) {
            const std::int64_t r0 = bi * h / k, r1 = (bi + 1) * h / k;
            for (std::int64_t bj = 0; bj < k; ++bj) {
                const std::int64_t c0 = bj * w / k, c1 = (bj + 1) * w / k;
                via_bins += pooled.at(0, 0, bi, bj) * static_cast<double>((r1 - r0) * (c1 - c0));
            }
        }
        double direct = 0.0;
        for (std::int64_t i = 0; i < input.numel(); ++i) direct += input.data()[i];
        EXPECT_NEAR(via_bins, direct, 1e-9);
    }
}

TEST(AdaptiveAvgPool, OversizedKRejected) {
    EXPECT_THROW(adaptive_avg_pool(Tensor::zeros({1, 1, 3, 5}), 4), ConfigError);
    EXPECT_THROW(adaptive_avg_pool(Tensor::zeros({1, 1, 5, 3}), 4), ConfigError);
}

TEST(Relu, PiecewiseDefinition) {
    Tensor input = Tensor::from_data({1, 1, 1, 3}, {-1, 0, 2});
    Tensor out = relu(input);
    EXPECT_DOUBLE_EQ(out.at(0, 0, 0, 0), 0.0);
    EXPECT_DOUBLE_EQ(out.at(0, 0, 0, 1), 0.0);
    EXPECT_DOUBLE_EQ(out.at(0, 0, 0, 2), 2.0);

    Tensor negative = Tensor::filled({1, 1, 2, 2}, -5.0);
    Tensor zeroed = relu(negative);
    for (std::int64_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(zeroed.data()[i], 0.0);
}

TEST(Relu, GradientIsStepFunction) {
    Tensor input = Tensor::from_data({1, 1, 1, 2}, {3.0, -3.0}, true);
    backward(sum_all(relu(input)));
    EXPECT_DOUBLE_EQ(input.grad()[0], 1.0);
    EXPECT_DOUBLE_EQ(input.grad()[1], 0.0);
}

TEST(AddConcat, BasicContracts) {
    Rng rng(13);
    Tensor x = random_tensor({1, 3, 2, 2}, rng);
    Tensor zero = Tensor::zeros({1, 3, 2, 2});
    Tensor sum = add(x, zero);
    EXPECT_EQ(sum.vec(), x.vec());

    Tensor a = random_tensor({2, 3, 4, 4}, rng);
    Tensor b = random_tensor({2, 5, 4, 4}, rng);
    Tensor cat = concat_channels({a, b});
    EXPECT_EQ(cat.shape(), (Shape4{2, 8, 4, 4}));

    // concat then channel-slice recovers the originals
    Tensor back_a = slice_channels(cat, 0, 3);
    Tensor back_b = slice_channels(cat, 3, 8);
    EXPECT_EQ(back_a.vec(), a.vec());
    EXPECT_EQ(back_b.vec(), b.vec());

    EXPECT_THROW(add(a, b), ContractError);
    EXPECT_THROW(concat_channels({a, Tensor::zeros({2, 1, 5, 4})}), ContractError);
}

TEST(Backward, LinearFormGradientIsOtherFactor) {
    Rng rng(17);
    Tensor x = random_tensor({1, 1, 3, 3}, rng);
    Tensor w = random_tensor({1, 1, 3, 3}, rng, -1.0, 1.0, true);
    backward(sum_all(mul(w, x)));
    for (std::int64_t i = 0; i < 9; ++i) {
        EXPECT_DOUBLE_EQ(w.grad()[static_cast<std::size_t>(i)], x.data()[i]);
    }
}

TEST(Backward, ReusedTensorAccumulates) {
    Tensor x = Tensor::scalar(1.5, true);
    backward(add(x, x));
    EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
}

TEST(Backward, NonScalarLossRejected) {
    Tensor x = Tensor::zeros({1, 1, 2, 2}, true);
    EXPECT_THROW(backward(relu(x)), ContractError);
}

TEST(Backward, SecondCallResetsGradients) {
    Tensor x = Tensor::scalar(2.0, true);
    backward(mul(x, x));
    EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
    backward(mul(x, x));
    EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);  // not 8: each backward yields this loss's gradient
}

// Finite-difference oracle over every differentiable op.
TEST(Backward, FiniteDifferencesConv) {
    Rng rng(21);
    std::vector<Tensor> inputs{random_tensor({1, 2, 5, 5}, rng, -1, 1, true),
                               random_tensor({2, 2, 3, 3}, rng, -1, 1, true),
                               random_tensor({1, 2, 1, 1}, rng, -1, 1, true)};
    Conv2dSpec spec = Conv2dSpec::same_padded(2, 2, 3, 2);
    auto fn = [&spec](const std::vector<Tensor>& t) {
        return sum_all(mul(conv2d(t[0], t[1], t[2], spec), conv2d(t[0], t[1], t[2], spec)));
    };
    EXPECT_LT(finite_difference_check(fn, inputs), 1e-4);
}

TEST(Backward, FiniteDifferencesPoolingAndElementwise) {
    Rng rng(23);
    {
        std::vector<Tensor> inputs{random_tensor({1, 2, 4, 4}, rng, -1, 1, true)};
        auto fn = [](const std::vector<Tensor>& t) {
            Tensor pooled = max_pool_2x2(t[0]);
            return sum_all(mul(pooled, pooled));
        };
        EXPECT_LT(finite_difference_check(fn, inputs), 1e-4);
    }
    {
        std::vector<Tensor> inputs{random_tensor({1, 1, 6, 6}, rng, -1, 1, true)};
        auto fn = [](const std::vector<Tensor>& t) {
            Tensor pooled = adaptive_avg_pool(t[0], 4);
            return sum_all(mul(pooled, pooled));
        };
        EXPECT_LT(finite_difference_check(fn, inputs), 1e-4);
    }
    {
        // Values bounded away from the relu/abs kinks so the FD stencil
        // stays on one branch.
        Tensor a = Tensor::from_data({1, 1, 2, 2}, {0.5, -0.7, 1.2, -0.3}, true);
        Tensor b = Tensor::from_data({1, 1, 2, 2}, {-0.9, 0.6, 0.4, -1.1}, true);
        std::vector<Tensor> inputs{a, b};
        auto fn = [](const std::vector<Tensor>& t) {
            Tensor mixed = add(mul(relu(t[0]), t[1]), abs_val(sub(t[0], scale(t[1], 0.5))));
            return sum_all(mul(mixed, mixed));
        };
        EXPECT_LT(finite_difference_check(fn, inputs), 1e-4);
    }
    {
        Rng r2(29);
        std::vector<Tensor> inputs{random_tensor({1, 2, 3, 3}, r2, 0.2, 1.0, true),
                                   random_tensor({1, 3, 3, 3}, r2, 0.2, 1.0, true)};
        auto fn = [](const std::vector<Tensor>& t) {
            Tensor cat = concat_channels({t[0], t[1]});
            Tensor part = slice_channels(cat, 1, 4);
            return sum_all(mul(part, part));
        };
        EXPECT_LT(finite_difference_check(fn, inputs), 1e-4);
    }
}

TEST(Adam, FirstStepMagnitudeIsLrForLargeGradients) {
    ParamStore store;
    Tensor& p = store.create("p", {1, 1, 1, 2});
    p.data()[0] = 1.0;
    p.data()[1] = -2.0;
    GradMap grads;
    grads.emplace("p", Tensor::from_data({1, 1, 1, 2}, {0.5, -0.25}));
    const double lr = 1e-3;
    adam_step(store, grads, lr, /*weight_decay=*/0.0);
    // Bias-corrected first step: m_hat = g, v_hat = g^2, so the update is
    // lr * g / (|g| + eps) ~= lr * sign(g).
    EXPECT_NEAR(p.data()[0], 1.0 - lr, 1e-8);
    EXPECT_NEAR(p.data()[1], -2.0 + lr, 1e-8);
    EXPECT_EQ(store.step_count(), 1);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
    ParamStore store;
    Tensor& p = store.create("p", {1, 1, 2, 2});
    for (std::int64_t i = 0; i < 4; ++i) p.data()[i] = 0.5 * static_cast<double>(i);
    GradMap grads;
    grads.emplace("p", Tensor::zeros({1, 1, 2, 2}));
    adam_step(store, grads, 1e-3, 0.0);
    for (std::int64_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(p.data()[i], 0.5 * static_cast<double>(i));
}

TEST(Adam, TwoStepsMatchHandRolledTrace) {
    const double lr = 1e-2, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double g1 = 0.3, g2 = -0.7;
    double ref = 1.0, m = 0.0, v = 0.0;
    const double grads_seq[2] = {g1, g2};
    for (int t = 1; t <= 2; ++t) {
        const double g = grads_seq[t - 1];
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mhat = m / (1 - std::pow(b1, t));
        const double vhat = v / (1 - std::pow(b2, t));
        ref -= lr * mhat / (std::sqrt(vhat) + eps);
    }

    ParamStore store;
    store.create("p", {1, 1, 1, 1}).data()[0] = 1.0;
    for (double g : grads_seq) {
        GradMap grads;
        grads.emplace("p", Tensor::from_data({1, 1, 1, 1}, {g}));
        adam_step(store, grads, lr, 0.0, b1, b2, eps);
    }
    EXPECT_NEAR(store.at("p").data()[0], ref, 1e-12);
    EXPECT_EQ(store.step_count(), 2);
}

TEST(Adam, CoupledWeightDecayAddsToGradient) {
    // With zero raw gradient, coupled L2 still moves the parameter toward 0.
    ParamStore store;
    store.create("p", {1, 1, 1, 1}).data()[0] = 2.0;
    GradMap grads;
    grads.emplace("p", Tensor::zeros({1, 1, 1, 1}));
    adam_step(store, grads, 1e-3, /*weight_decay=*/0.1);
    EXPECT_LT(store.at("p").data()[0], 2.0);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
    ParamStore store;
    store.create("layer.weight", {1, 1, 1, 1});
    GradMap grads;
    grads.emplace("layer.weight",
                  Tensor::from_data({1, 1, 1, 1}, {std::numeric_limits<double>::quiet_NaN()}));
    try {
        adam_step(store, grads, 1e-3, 0.0);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("layer.weight"), std::string::npos);
    }
}

TEST(Adam, MissingGradientRejected) {
    ParamStore store;
    store.create("a", {1, 1, 1, 1});
    store.create("b", {1, 1, 1, 1});
    GradMap grads;
    grads.emplace("a", Tensor::zeros({1, 1, 1, 1}));
    EXPECT_THROW(adam_step(store, grads, 1e-3, 0.0), ContractError);
}
