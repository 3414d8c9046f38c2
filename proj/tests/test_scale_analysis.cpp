#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "dsnet/ops.hpp"
#include "dsnet/rng.hpp"
#include "dsnet/scale_analysis.hpp"

using namespace dsnet;

TEST(RfSize, CompositionFormula) {
    EXPECT_EQ(rf_size(DilationPath::from_dilations({1})), 3);
    EXPECT_EQ(rf_size(DilationPath::from_dilations({1, 2, 3})), 13);
    EXPECT_EQ(rf_size(DilationPath::from_dilations({3, 6})), 19);
    EXPECT_EQ(rf_size(DilationPath{{{5, 2}}}), 9);
}

TEST(RfSize, EqualsSupportBoundingBox) {
    Rng rng(71);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::int64_t> dilations;
        const std::int64_t layers = rng.uniform_int(1, 4);
        for (std::int64_t i = 0; i < layers; ++i) dilations.push_back(rng.uniform_int(1, 6));
        const DilationPath path = DilationPath::from_dilations(dilations);
        const std::vector<std::uint8_t> mask = support_mask_1d(path);
        std::int64_t lo = -1, hi = -1;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (mask[i]) {
                if (lo < 0) lo = static_cast<std::int64_t>(i);
                hi = static_cast<std::int64_t>(i);
            }
        }
        EXPECT_EQ(hi - lo + 1, rf_size(path));
        EXPECT_EQ(static_cast<std::int64_t>(mask.size()), rf_size(path));
    }
}

TEST(EnumerateDensePaths, DdcbDilationsGiveSixSizesWithGapTwo) {
    const RFReport report = enumerate_dense_paths({1, 2, 3}, Dense{});
    EXPECT_EQ(report.paths.size(), 7u);
    EXPECT_EQ(report.distinct_sizes, (std::vector<std::int64_t>{3, 5, 7, 9, 11, 13}));
    EXPECT_EQ(report.max_gap, 2);
    EXPECT_EQ(report.full_composition.lost_fraction, 0.0);
}

TEST(EnumerateDensePaths, SingleLayerAnyConnectivity) {
    for (const Connectivity& conn :
         {Connectivity(Sequential{}), Connectivity(Dense{}), Connectivity(DenseResidualBlocks{1})}) {
        const RFReport report = enumerate_dense_paths({2}, conn);
        ASSERT_EQ(report.paths.size(), 1u);
        EXPECT_EQ(report.paths[0].second, 5);
    }
}

TEST(EnumerateDensePaths, SequentialIsSinglePath) {
    const RFReport report = enumerate_dense_paths({3, 6}, Sequential{});
    ASSERT_EQ(report.paths.size(), 1u);
    EXPECT_EQ(report.paths[0].second, 19);
}

TEST(EnumerateDensePaths, DenseAsppStyleHasLargeGap) {
    const RFReport report = enumerate_dense_paths({3, 6}, Dense{});
    EXPECT_EQ(report.distinct_sizes, (std::vector<std::int64_t>{7, 13, 19}));
    EXPECT_EQ(report.max_gap, 6);
}

TEST(EnumerateDensePaths, ResidualBlocksExtendScaleRangeWithGapTwo) {
    const RFReport report = enumerate_dense_paths({1, 2, 3}, DenseResidualBlocks{3});
    // K = 1 + s where s sums three block contributions from {0,2,...,12};
    // everything from 3 to 37 in steps of 2, identity-only path excluded.
    EXPECT_EQ(report.distinct_sizes.front(), 3);
    EXPECT_EQ(report.distinct_sizes.back(), 37);
    EXPECT_EQ(report.max_gap, 2);
    // A single-block path must appear unchanged among the compositions.
    bool found_single = false;
    for (const auto& [path, k] : report.paths) {
        if (path.layers.size() == 3 && path.layers[0].dilation == 1 &&
            path.layers[1].dilation == 2 && path.layers[2].dilation == 3) {
            found_single = true;
        }
    }
    EXPECT_TRUE(found_single);
}

TEST(EnumerateDensePaths, SubsetCapEnforced) {
    std::vector<std::int64_t> too_many(21, 1);
    for (std::size_t i = 0; i < too_many.size(); ++i) {
        too_many[i] = static_cast<std::int64_t>(i + 1);
    }
    EXPECT_THROW(enumerate_dense_paths(too_many, Dense{}), ConfigError);
}

TEST(Coverage, GriddingHandCases) {
    const DilationPath stacked = DilationPath::from_dilations({3, 6});
    const Coverage c1 = coverage(stacked, 1);
    EXPECT_EQ(c1.touched, 7);
    EXPECT_EQ(c1.rf_cells, 19);
    const Coverage c2 = coverage(stacked, 2);
    EXPECT_EQ(c2.touched, 49);
    EXPECT_EQ(c2.rf_cells, 361);
    EXPECT_NEAR(c2.lost_fraction, 0.8643, 0.0005);

    const Coverage full = coverage(DilationPath::from_dilations({1, 2, 3}), 2);
    EXPECT_EQ(full.touched, 169);
    EXPECT_EQ(full.rf_cells, 169);
    EXPECT_DOUBLE_EQ(full.lost_fraction, 0.0);
}

TEST(Coverage, TwoDimTouchedIsSquareOfOneDim) {
    Rng rng(73);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::int64_t> dilations;
        const std::int64_t layers = rng.uniform_int(1, 3);
        for (std::int64_t i = 0; i < layers; ++i) dilations.push_back(rng.uniform_int(1, 6));
        const DilationPath path = DilationPath::from_dilations(dilations);
        const Coverage c1 = coverage(path, 1);
        const Coverage c2 = coverage(path, 2);
        EXPECT_EQ(c2.touched, c1.touched * c1.touched);
        EXPECT_EQ(c2.rf_cells, c1.rf_cells * c1.rf_cells);
    }
}

// Appending a (3, d=1) layer completes coverage whenever the prior support
// has no gap larger than 3.
TEST(Coverage, DilationOneLayerHealsSmallGaps) {
    Rng rng(79);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<std::int64_t> dilations;
        const std::int64_t layers = rng.uniform_int(1, 3);
        for (std::int64_t i = 0; i < layers; ++i) dilations.push_back(rng.uniform_int(1, 5));
        const DilationPath path = DilationPath::from_dilations(dilations);
        const std::vector<std::uint8_t> mask = support_mask_1d(path);
        std::int64_t max_gap = 0, prev = -1;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (!mask[i]) continue;
            if (prev >= 0) max_gap = std::max<std::int64_t>(max_gap, static_cast<std::int64_t>(i) - prev);
            prev = static_cast<std::int64_t>(i);
        }
        if (max_gap > 3) continue;
        DilationPath extended = path;
        extended.layers.push_back({3, 1});
        EXPECT_DOUBLE_EQ(coverage(extended, 1).lost_fraction, 0.0) << extended.str();
    }
}

// Cross-module oracle: the Minkowski-sum support equals the nonzero set of
// an actual impulse forward pass with all-ones kernels.
TEST(Coverage, SupportAgreesWithConvolutionImpulse) {
    Rng rng(83);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<std::int64_t> dilations;
        const std::int64_t layers = rng.uniform_int(1, 4);
        for (std::int64_t i = 0; i < layers; ++i) dilations.push_back(rng.uniform_int(1, 6));
        const DilationPath path = DilationPath::from_dilations(dilations);
        const std::int64_t k = rf_size(path);

        Tensor x = Tensor::zeros({1, 1, k, k});
        x.at(0, 0, k / 2, k / 2) = 1.0;
        for (std::int64_t d : dilations) {
            Tensor ones = Tensor::filled({1, 1, 3, 3}, 1.0);
            x = conv2d(x, ones, Tensor::zeros({1, 1, 1, 1}),
                       Conv2dSpec::same_padded(1, 1, 3, d));
        }
        const std::vector<std::uint8_t> support = support_mask_2d(path);
        ASSERT_EQ(static_cast<std::int64_t>(support.size()), k * k);
        for (std::int64_t i = 0; i < k * k; ++i) {
            EXPECT_EQ(x.data()[i] > 0.0, support[static_cast<std::size_t>(i)] != 0)
                << path.str() << " cell " << i;
        }
    }
}

TEST(GriddingAudit, DdcbPathsAllCovered) {
    const GriddingReport report = gridding_audit(ddcb_audit_paths({1, 2, 3}));
    EXPECT_TRUE(report.pass);
    EXPECT_EQ(report.entries.size(), 8u);  // 7 dense subsets + fusion-only path
    for (const AuditEntry& e : report.entries) EXPECT_TRUE(e.full_coverage) << e.label;
    EXPECT_NE(report.text().find("PASS"), std::string::npos);
}

TEST(GriddingAudit, LargeRatesFailWithPerPathFigures) {
    const RFReport enumerated = enumerate_dense_paths({3, 6, 12, 18, 24}, Dense{});
    std::vector<DilationPath> paths;
    for (const auto& [p, k] : enumerated.paths) paths.push_back(p);
    const GriddingReport report = gridding_audit(paths);
    EXPECT_FALSE(report.pass);
    bool any_flagged = false;
    for (const AuditEntry& e : report.entries) any_flagged |= !e.full_coverage;
    EXPECT_TRUE(any_flagged);
    EXPECT_NE(report.text().find("FAIL"), std::string::npos);
    EXPECT_NE(report.text().find("GRIDDING"), std::string::npos);
}

TEST(GriddingAudit, EmptyInputGivesEmptyReport) {
    const GriddingReport report = gridding_audit({});
    EXPECT_TRUE(report.pass);
    EXPECT_TRUE(report.entries.empty());
}

TEST(SupportHeatmap, DimensionsMatchReceptiveField) {
    const DilationPath path = DilationPath::from_dilations({3, 6});
    const ImageU8 img = support_heatmap(path);
    EXPECT_EQ(img.width, 19);
    EXPECT_EQ(img.height, 19);
    std::int64_t bright = 0;
    for (std::uint8_t v : img.pixels) bright += v == 255 ? 1 : 0;
    EXPECT_EQ(bright, 49);
}

TEST(DilationPath, ValidationRejectsBadLayers) {
    EXPECT_THROW(rf_size(DilationPath{}), ContractError);
    EXPECT_THROW(rf_size(DilationPath{{{4, 1}}}), ContractError);
    EXPECT_THROW(rf_size(DilationPath{{{3, 0}}}), ContractError);
}
