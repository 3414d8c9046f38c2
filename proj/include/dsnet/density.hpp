#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dsnet/common.hpp"
#include "dsnet/image.hpp"

namespace dsnet {

/// Sub-pixel head annotation; x in [0, W), y in [0, H).
struct Head {
    double x = 0.0;
    double y = 0.0;
};

/// An image with head annotations and an optional region-of-interest mask
/// (nonzero = inside).
struct AnnotatedScene {
    ImageU8 image;
    std::vector<Head> heads;
    std::optional<std::vector<std::uint8_t>> roi;  // H*W row-major when present

    std::int64_t width() const { return image.width; }
    std::int64_t height() const { return image.height; }

    /// Bounds and ROI-dimension checks. Error messages list offending heads.
    void validate() const {
        std::string bad;
        for (std::size_t i = 0; i < heads.size(); ++i) {
            const Head& h = heads[i];
            if (!(h.x >= 0.0 && h.x < static_cast<double>(width()) && h.y >= 0.0 &&
                  h.y < static_cast<double>(height()))) {
                if (!bad.empty()) bad += ", ";
                bad += std::to_string(i);
            }
        }
        if (!bad.empty()) {
            throw ContractError("scene: head indices [" + bad + "] fall outside " +
                                std::to_string(width()) + "x" + std::to_string(height()) +
                                " image bounds");
        }
        if (roi && static_cast<std::int64_t>(roi->size()) != width() * height()) {
            throw ContractError("scene: ROI size " + std::to_string(roi->size()) +
                                " does not match image " + std::to_string(width()) + "x" +
                                std::to_string(height()));
        }
    }
};

/// Non-negative H x W grid whose sum is the (possibly fractional) count.
struct DensityMap {
    std::int64_t width = 0;
    std::int64_t height = 0;
    std::vector<double> grid;  // row-major

    static DensityMap zeros(std::int64_t w, std::int64_t h) {
        DensityMap m;
        m.width = w;
        m.height = h;
        m.grid.assign(static_cast<std::size_t>(w * h), 0.0);
        return m;
    }

    double& at(std::int64_t y, std::int64_t x) {
        return grid[static_cast<std::size_t>(y * width + x)];
    }
    double at(std::int64_t y, std::int64_t x) const {
        return grid[static_cast<std::size_t>(y * width + x)];
    }

    /// Compensated (Kahan) sum of all cells.
    double sum() const {
        double s = 0.0, comp = 0.0;
        for (double v : grid) {
            const double t = v - comp;
            const double u = s + t;
            comp = (u - s) - t;
            s = u;
        }
        return s;
    }
};

/// Geometry-adaptive kernel settings: sigma_i = beta * mean distance to the
/// k nearest other heads.
struct AdaptiveKernelConfig {
    double beta = 0.3;
    int k = 3;
    double truncation_radius_sigmas = 4.0;
    double fallback_sigma = 15.0;  // single-head scenes

    void validate() const {
        if (beta <= 0.0) throw ConfigError("adaptive kernel: beta must be > 0");
        if (k < 1) throw ConfigError("adaptive kernel: k must be >= 1");
        if (truncation_radius_sigmas < 2.0) {
            throw ConfigError("adaptive kernel: truncation radius must be >= 2 sigmas");
        }
    }
};

/// Density-map generation mode: one sigma for every head, or per-head
/// geometry-adaptive sigmas.
struct FixedKernel {
    double sigma = 15.0;
};
using KernelMode = std::variant<FixedKernel, AdaptiveKernelConfig>;

/// Add one head as a discretized isotropic Gaussian. The kernel is
/// evaluated at integer pixel coordinates, truncated to a square window of
/// half-width trunc_sigmas*sigma, clipped to the map, then renormalized so
/// the added mass is exactly 1 — heads near borders still contribute one
/// full count.
inline void gaussian_splat(DensityMap& map, double cx, double cy, double sigma,
                           double trunc_sigmas = 4.0) {
    if (sigma <= 0.0) throw ConfigError("gaussian_splat: sigma must be > 0, got " +
                                        std::to_string(sigma));
    const double radius = trunc_sigmas * sigma;
    const std::int64_t x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(cx - radius)));
    const std::int64_t x1 = std::min(map.width - 1, static_cast<std::int64_t>(std::floor(cx + radius)));
    const std::int64_t y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(cy - radius)));
    const std::int64_t y1 = std::min(map.height - 1, static_cast<std::int64_t>(std::floor(cy + radius)));
    if (x0 > x1 || y0 > y1) return;  // window entirely off-map; nothing to add

    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    std::vector<double> window(static_cast<std::size_t>((x1 - x0 + 1) * (y1 - y0 + 1)));
    double mass = 0.0;
    std::size_t i = 0;
    for (std::int64_t y = y0; y <= y1; ++y) {
        const double dy = static_cast<double>(y) - cy;
        for (std::int64_t x = x0; x <= x1; ++x, ++i) {
            const double dx = static_cast<double>(x) - cx;
            const double v = std::exp(-(dx * dx + dy * dy) * inv2s2);
            window[i] = v;
            mass += v;
        }
    }
    if (mass <= 0.0) return;
    const double inv_mass = 1.0 / mass;
    i = 0;
    for (std::int64_t y = y0; y <= y1; ++y) {
        for (std::int64_t x = x0; x <= x1; ++x, ++i) {
            map.at(y, x) += window[i] * inv_mass;
        }
    }
}

/// Per-head sigma = beta * mean Euclidean distance to the min(k, n-1)
/// nearest other heads; a lone head falls back to fallback_sigma.
inline std::vector<double> adaptive_sigmas(const std::vector<Head>& heads,
                                           const AdaptiveKernelConfig& cfg) {
    cfg.validate();
    const std::size_t n = heads.size();
    std::vector<double> sigmas(n, cfg.fallback_sigma);
    if (n <= 1) return sigmas;
    const std::size_t use = std::min<std::size_t>(static_cast<std::size_t>(cfg.k), n - 1);
    std::vector<double> dists;
    dists.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        dists.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = heads[i].x - heads[j].x;
            const double dy = heads[i].y - heads[j].y;
            dists.push_back(std::sqrt(dx * dx + dy * dy));
        }
        std::partial_sort(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(use),
                          dists.end());
        double mean = 0.0;
        for (std::size_t j = 0; j < use; ++j) mean += dists[j];
        mean /= static_cast<double>(use);
        sigmas[i] = cfg.beta * mean;
    }
    return sigmas;
}

/// Ground-truth density map for a scene: one normalized Gaussian per head,
/// then ROI masking (outside-ROI mass is removed, not redistributed).
inline DensityMap build_density_map(const AnnotatedScene& scene, const KernelMode& mode) {
    scene.validate();
    DensityMap map = DensityMap::zeros(scene.width(), scene.height());
    if (!scene.heads.empty()) {
        if (std::holds_alternative<FixedKernel>(mode)) {
            const FixedKernel& fixed = std::get<FixedKernel>(mode);
            for (const Head& h : scene.heads) {
                gaussian_splat(map, h.x, h.y, fixed.sigma);
            }
        } else {
            const AdaptiveKernelConfig& cfg = std::get<AdaptiveKernelConfig>(mode);
            const std::vector<double> sigmas = adaptive_sigmas(scene.heads, cfg);
            for (std::size_t i = 0; i < scene.heads.size(); ++i) {
                gaussian_splat(map, scene.heads[i].x, scene.heads[i].y, sigmas[i],
                               cfg.truncation_radius_sigmas);
            }
        }
    }
    if (scene.roi) {
        const std::vector<std::uint8_t>& roi = *scene.roi;
        for (std::size_t i = 0; i < map.grid.size(); ++i) {
            if (roi[i] == 0) map.grid[i] = 0.0;
        }
    }
    return map;
}

/// Sum-pool downsampling by an integer factor; the total count is
/// preserved exactly up to float association order.
inline DensityMap sum_pool_downsample(const DensityMap& map, std::int64_t factor) {
    if (factor <= 0) throw ContractError("sum_pool_downsample: factor must be positive");
    if (map.height % factor != 0 || map.width % factor != 0) {
        throw ContractError("sum_pool_downsample: dims " + std::to_string(map.width) + "x" +
                            std::to_string(map.height) + " not divisible by " +
                            std::to_string(factor));
    }
    DensityMap out = DensityMap::zeros(map.width / factor, map.height / factor);
    for (std::int64_t y = 0; y < out.height; ++y) {
        for (std::int64_t x = 0; x < out.width; ++x) {
            double acc = 0.0, comp = 0.0;
            for (std::int64_t dy = 0; dy < factor; ++dy) {
                for (std::int64_t dx = 0; dx < factor; ++dx) {
                    const double t = map.at(y * factor + dy, x * factor + dx) - comp;
                    const double u = acc + t;
                    comp = (u - acc) - t;
                    acc = u;
                }
            }
            out.at(y, x) = acc;
        }
    }
    return out;
}

}  // namespace dsnet
