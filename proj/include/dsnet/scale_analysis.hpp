#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "dsnet/common.hpp"
#include "dsnet/image.hpp"

namespace dsnet {

/// One stack of dilated convolution layers: ordered (kernel, dilation)
/// pairs, odd square kernels.
struct DilationPath {
    struct Layer {
        std::int64_t kernel = 3;
        std::int64_t dilation = 1;
    };
    std::vector<Layer> layers;

    void validate() const {
        if (layers.empty()) throw ContractError("DilationPath: empty layer list");
        for (const Layer& l : layers) {
            if (l.kernel <= 0 || l.kernel % 2 == 0) {
                throw ContractError("DilationPath: kernel must be odd positive, got " +
                                    std::to_string(l.kernel));
            }
            if (l.dilation <= 0) {
                throw ContractError("DilationPath: dilation must be positive, got " +
                                    std::to_string(l.dilation));
            }
        }
    }

    std::string str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(layers[i].dilation);
        }
        return s + ")";
    }

    static DilationPath from_dilations(const std::vector<std::int64_t>& dilations,
                                       std::int64_t kernel = 3) {
        DilationPath p;
        p.layers.reserve(dilations.size());
        for (std::int64_t d : dilations) p.layers.push_back({kernel, d});
        return p;
    }
};

/// Receptive-field side length of a layer stack: K = 1 + sum (kernel-1)*dilation.
inline std::int64_t rf_size(const DilationPath& path) {
    path.validate();
    std::int64_t k = 1;
    for (const DilationPath::Layer& l : path.layers) k += (l.kernel - 1) * l.dilation;
    return k;
}

/// Exact set of 1-D input offsets reachable by the stack: the Minkowski sum
/// of the per-layer tap sets {-d*r, ..., 0, ..., d*r} (kernel 2r+1,
/// dilation d), rasterized by brute force. Returns a 0/1 mask of length K
/// centered on offset 0.
inline std::vector<std::uint8_t> support_mask_1d(const DilationPath& path) {
    const std::int64_t radius = (rf_size(path) - 1) / 2;
    std::vector<std::uint8_t> cur(static_cast<std::size_t>(2 * radius + 1), 0);
    cur[static_cast<std::size_t>(radius)] = 1;
    for (const DilationPath::Layer& l : path.layers) {
        std::vector<std::uint8_t> next(cur.size(), 0);
        const std::int64_t r = (l.kernel - 1) / 2;
        for (std::int64_t off = -radius; off <= radius; ++off) {
            if (!cur[static_cast<std::size_t>(off + radius)]) continue;
            for (std::int64_t t = -r; t <= r; ++t) {
                const std::int64_t o = off + t * l.dilation;
                if (o >= -radius && o <= radius) next[static_cast<std::size_t>(o + radius)] = 1;
            }
        }
        cur.swap(next);
    }
    return cur;
}

/// 2-D analogue of support_mask_1d: K x K row-major mask, center at (K-1)/2.
inline std::vector<std::uint8_t> support_mask_2d(const DilationPath& path) {
    const std::int64_t k = rf_size(path);
    const std::int64_t radius = (k - 1) / 2;
    std::vector<std::uint8_t> cur(static_cast<std::size_t>(k * k), 0);
    cur[static_cast<std::size_t>(radius * k + radius)] = 1;
    for (const DilationPath::Layer& l : path.layers) {
        std::vector<std::uint8_t> next(cur.size(), 0);
        const std::int64_t r = (l.kernel - 1) / 2;
        for (std::int64_t y = 0; y < k; ++y) {
            for (std::int64_t x = 0; x < k; ++x) {
                if (!cur[static_cast<std::size_t>(y * k + x)]) continue;
                for (std::int64_t ty = -r; ty <= r; ++ty) {
                    const std::int64_t ny = y + ty * l.dilation;
                    if (ny < 0 || ny >= k) continue;
                    for (std::int64_t tx = -r; tx <= r; ++tx) {
                        const std::int64_t nx = x + tx * l.dilation;
                        if (nx >= 0 && nx < k) next[static_cast<std::size_t>(ny * k + nx)] = 1;
                    }
                }
            }
        }
        cur.swap(next);
    }
    return cur;
}

/// Pixel-coverage statistics over the receptive-field bounding box.
struct Coverage {
    std::int64_t touched = 0;
    std::int64_t rf_cells = 0;
    double lost_fraction = 0.0;
};

inline Coverage coverage(const DilationPath& path, int dims) {
    if (dims != 1 && dims != 2) throw ContractError("coverage: dims must be 1 or 2");
    const std::vector<std::uint8_t> mask = dims == 1 ? support_mask_1d(path) : support_mask_2d(path);
    Coverage cov;
    cov.rf_cells = static_cast<std::int64_t>(mask.size());
    for (std::uint8_t m : mask) cov.touched += m;
    cov.lost_fraction =
        1.0 - static_cast<double>(cov.touched) / static_cast<double>(cov.rf_cells);
    return cov;
}

/// Connectivity patterns for path enumeration.
struct Sequential {};
struct Dense {};
struct DenseResidualBlocks {
    int blocks = 3;
};
using Connectivity = std::variant<Sequential, Dense, DenseResidualBlocks>;

/// Receptive-field enumeration result.
struct RFReport {
    std::vector<std::pair<DilationPath, std::int64_t>> paths;  // sorted by K, then dilations
    std::vector<std::int64_t> distinct_sizes;                  // ascending
    std::int64_t max_gap = 0;                                  // max consecutive gap
    Coverage full_composition;                                 // 2-D coverage of the longest path
    double coverage_fraction = 1.0;                            // 1 - full_composition.lost_fraction
};

namespace detail {

constexpr std::int64_t kPathCountCap = std::int64_t(1) << 20;

inline std::vector<std::vector<DilationPath::Layer>> dense_subsets(
    const std::vector<DilationPath::Layer>& layers, bool include_empty) {
    if (layers.size() >= 63 ||
        (std::int64_t(1) << layers.size()) > kPathCountCap) {
        throw ConfigError("dense enumeration: 2^" + std::to_string(layers.size()) +
                          " subsets exceed the 2^20 cap");
    }
    std::vector<std::vector<DilationPath::Layer>> out;
    const std::uint64_t total = std::uint64_t(1) << layers.size();
    for (std::uint64_t bits = include_empty ? 0 : 1; bits < total; ++bits) {
        std::vector<DilationPath::Layer> subset;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (bits & (std::uint64_t(1) << i)) subset.push_back(layers[i]);
        }
        out.push_back(std::move(subset));
    }
    return out;
}

inline bool path_lex_less(const DilationPath& a, const DilationPath& b) {
    const std::size_t n = std::min(a.layers.size(), b.layers.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (a.layers[i].dilation != b.layers[i].dilation)
            return a.layers[i].dilation < b.layers[i].dilation;
    }
    return a.layers.size() < b.layers.size();
}

}  // namespace detail

/// Enumerate the receptive-field sizes reachable through a dilation stack.
/// Dense connectivity treats skip connections as layer omission with order
/// preserved (all non-empty ordered subsets); dense_residual_blocks(b)
/// additionally composes up to b whole-block passes where each block may be
/// skipped entirely through its identity link.
inline RFReport enumerate_dense_paths(const std::vector<std::int64_t>& dilations,
                                      const Connectivity& connectivity,
                                      std::int64_t kernel = 3) {
    const DilationPath base = DilationPath::from_dilations(dilations, kernel);
    base.validate();

    std::vector<DilationPath> paths;
    if (std::holds_alternative<Sequential>(connectivity)) {
        paths.push_back(base);
    } else if (std::holds_alternative<Dense>(connectivity)) {
        for (auto& subset : detail::dense_subsets(base.layers, /*include_empty=*/false)) {
            paths.push_back(DilationPath{std::move(subset)});
        }
    } else {
        const int blocks = std::get<DenseResidualBlocks>(connectivity).blocks;
        if (blocks <= 0) throw ConfigError("enumerate_dense_paths: block count must be positive");
        const auto block_choices = detail::dense_subsets(base.layers, /*include_empty=*/true);
        double estimate = 1.0;
        for (int bi = 0; bi < blocks; ++bi) estimate *= static_cast<double>(block_choices.size());
        if (estimate > static_cast<double>(detail::kPathCountCap)) {
            throw ConfigError("enumerate_dense_paths: block composition exceeds the 2^20 path cap");
        }
        std::vector<std::vector<DilationPath::Layer>> acc{{}};
        for (int bi = 0; bi < blocks; ++bi) {
            std::vector<std::vector<DilationPath::Layer>> next;
            next.reserve(acc.size() * block_choices.size());
            for (const auto& prefix : acc) {
                for (const auto& choice : block_choices) {
                    std::vector<DilationPath::Layer> combined = prefix;
                    combined.insert(combined.end(), choice.begin(), choice.end());
                    next.push_back(std::move(combined));
                }
            }
            acc.swap(next);
        }
        for (auto& layers : acc) {
            if (!layers.empty()) paths.push_back(DilationPath{std::move(layers)});
        }
    }

    RFReport report;
    std::set<std::int64_t> sizes;
    report.paths.reserve(paths.size());
    for (DilationPath& p : paths) {
        const std::int64_t k = rf_size(p);
        sizes.insert(k);
        report.paths.emplace_back(std::move(p), k);
    }
    std::sort(report.paths.begin(), report.paths.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return detail::path_lex_less(a.first, b.first);
    });
    report.distinct_sizes.assign(sizes.begin(), sizes.end());
    for (std::size_t i = 1; i < report.distinct_sizes.size(); ++i) {
        report.max_gap =
            std::max(report.max_gap, report.distinct_sizes[i] - report.distinct_sizes[i - 1]);
    }
    report.full_composition = coverage(base, 2);
    report.coverage_fraction = 1.0 - report.full_composition.lost_fraction;
    return report;
}

/// One audited composition with its pass/fail flag.
struct AuditEntry {
    std::string label;
    DilationPath path;
    std::int64_t rf = 0;
    Coverage cov_1d;
    Coverage cov_2d;
    bool full_coverage = false;
};

/// Gridding audit over a set of compositions: flags every path whose
/// 2-D lost fraction is > 0.
struct GriddingReport {
    std::vector<AuditEntry> entries;
    bool pass = true;

    std::string text() const;
};

inline GriddingReport gridding_audit(const std::vector<DilationPath>& paths) {
    GriddingReport report;
    report.entries.reserve(paths.size());
    for (const DilationPath& p : paths) {
        AuditEntry e;
        e.label = p.str();
        e.path = p;
        e.rf = rf_size(p);
        e.cov_1d = coverage(p, 1);
        e.cov_2d = coverage(p, 2);
        e.full_coverage = e.cov_2d.lost_fraction == 0.0;
        if (!e.full_coverage) report.pass = false;
        report.entries.push_back(std::move(e));
    }
    return report;
}

/// Dense paths through a DDCB as audited compositions: every non-empty
/// ordered subset of the dilated layers with the trailing 3x3 fusion conv
/// appended, plus the block-input-to-fusion direct path. The 1x1
/// bottlenecks contribute nothing to the receptive field and are omitted.
inline std::vector<DilationPath> ddcb_audit_paths(const std::vector<std::int64_t>& dilations,
                                                  std::int64_t kernel = 3,
                                                  std::int64_t fusion_kernel = 3) {
    const DilationPath base = DilationPath::from_dilations(dilations, kernel);
    base.validate();
    std::vector<DilationPath> out;
    for (auto& subset : detail::dense_subsets(base.layers, /*include_empty=*/true)) {
        subset.push_back({fusion_kernel, 1});
        out.push_back(DilationPath{std::move(subset)});
    }
    std::sort(out.begin(), out.end(), [](const DilationPath& a, const DilationPath& b) {
        const std::int64_t ka = rf_size(a), kb = rf_size(b);
        if (ka != kb) return ka < kb;
        return detail::path_lex_less(a, b);
    });
    return out;
}

namespace detail {

inline std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", fraction * 100.0);
    return buf;
}

}  // namespace detail

inline std::string GriddingReport::text() const {
    std::string out;
    for (const AuditEntry& e : entries) {
        out += "path " + e.label + "  K=" + std::to_string(e.rf) + "  1-D touched " +
               std::to_string(e.cov_1d.touched) + " of " + std::to_string(e.cov_1d.rf_cells) +
               "  2-D touched " + std::to_string(e.cov_2d.touched) + " of " +
               std::to_string(e.cov_2d.rf_cells) + "  lost " +
               detail::format_percent(e.cov_2d.lost_fraction) + "%" +
               (e.full_coverage ? "" : "  GRIDDING") + "\n";
    }
    out += entries.empty() ? "no compositions audited\n"
                           : (pass ? "verdict: PASS (full pixel coverage on every path)\n"
                                   : "verdict: FAIL (gridding artifacts present)\n");
    return out;
}

/// Render a 2-D support mask as a graymap image (white = touched).
inline ImageU8 support_heatmap(const DilationPath& path) {
    const std::vector<std::uint8_t> mask = support_mask_2d(path);
    const std::int64_t k = rf_size(path);
    ImageU8 img = ImageU8::filled(k, k, 1, 0);
    for (std::size_t i = 0; i < mask.size(); ++i) img.pixels[i] = mask[i] ? 255 : 32;
    return img;
}

}  // namespace dsnet
