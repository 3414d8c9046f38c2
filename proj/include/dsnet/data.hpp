#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsnet/density.hpp"
#include "dsnet/image.hpp"
#include "dsnet/rng.hpp"
#include "dsnet/tensor.hpp"

namespace dsnet {

/// Augmentation settings; probabilities follow the training recipe
/// (flip 0.5, gamma 0.3 over [0.5, 1.5], grayscale 0.1).
struct AugmentConfig {
    double flip_prob = 0.5;
    double gamma_prob = 0.3;
    double gamma_lo = 0.5;
    double gamma_hi = 1.5;
    double gray_prob = 0.1;
    std::int64_t random_crops_per_image = 5;
    std::uint64_t seed = 0;

    void validate() const {
        auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!prob(flip_prob) || !prob(gamma_prob) || !prob(gray_prob)) {
            throw ConfigError("AugmentConfig: probabilities must lie in [0, 1]");
        }
        if (gamma_lo <= 0.0 || gamma_hi < gamma_lo) {
            throw ConfigError("AugmentConfig: gamma range must be positive and ordered");
        }
        if (random_crops_per_image < 0) {
            throw ConfigError("AugmentConfig: random_crops_per_image must be >= 0");
        }
    }
};

/// Synthetic crowd-scene settings. vertical_scale_gradient > 0 makes lower
/// image rows denser with larger rendered blobs (a perspective proxy).
struct SyntheticSceneSpec {
    std::int64_t width = 64;
    std::int64_t height = 64;
    std::int64_t count_min = 4;
    std::int64_t count_max = 16;
    double vertical_scale_gradient = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (width < 32 || height < 32) throw ConfigError("SyntheticSceneSpec: dims must be >= 32");
        if (count_min < 0 || count_max < count_min) {
            throw ConfigError("SyntheticSceneSpec: invalid head count range");
        }
        if (vertical_scale_gradient < 0.0) {
            throw ConfigError("SyntheticSceneSpec: gradient must be >= 0");
        }
    }
};

// ---------------------------------------------------------------------------
// Scene files
// ---------------------------------------------------------------------------

/// Read a scene document: JSON {"image_path": ..., "heads": [[x, y], ...],
/// "roi_path": optional}. Relative paths resolve against the scene file's
/// directory. Head coordinates are validated half-open against the image.
inline AnnotatedScene load_scene(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open scene file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError("scene " + path + ": " + e.what());
    }
    if (!doc.is_object()) throw IoError("scene " + path + ": top level must be an object");
    for (const auto& [key, value] : doc.items()) {
        if (key != "image_path" && key != "heads" && key != "roi_path") {
            throw IoError("scene " + path + ": unknown field '" + key + "'");
        }
    }
    if (!doc.contains("image_path") || !doc["image_path"].is_string()) {
        throw IoError("scene " + path + ": missing string field 'image_path'");
    }
    if (!doc.contains("heads") || !doc["heads"].is_array()) {
        throw IoError("scene " + path + ": missing array field 'heads'");
    }

    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto resolve = [&base](const std::string& p) {
        const std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };

    AnnotatedScene scene;
    scene.image = load_image(resolve(doc["image_path"].get<std::string>()));
    for (std::size_t i = 0; i < doc["heads"].size(); ++i) {
        const auto& entry = doc["heads"][i];
        if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number() ||
            !entry[1].is_number()) {
            throw IoError("scene " + path + ": heads[" + std::to_string(i) +
                          "] must be a [x, y] number pair");
        }
        scene.heads.push_back({entry[0].get<double>(), entry[1].get<double>()});
    }
    if (doc.contains("roi_path")) {
        if (!doc["roi_path"].is_string()) {
            throw IoError("scene " + path + ": 'roi_path' must be a string");
        }
        const ImageU8 roi_img = load_image(resolve(doc["roi_path"].get<std::string>()));
        if (roi_img.width != scene.image.width || roi_img.height != scene.image.height) {
            throw IoError("scene " + path + ": ROI dims " + std::to_string(roi_img.width) + "x" +
                          std::to_string(roi_img.height) + " do not match image");
        }
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(roi_img.width * roi_img.height));
        for (std::int64_t y = 0; y < roi_img.height; ++y) {
            for (std::int64_t x = 0; x < roi_img.width; ++x) {
                mask[static_cast<std::size_t>(y * roi_img.width + x)] =
                    roi_img.at(y, x, 0) != 0 ? 1 : 0;
            }
        }
        scene.roi = std::move(mask);
    }
    scene.validate();
    return scene;
}

/// Write a scene's image (PNG) and JSON document next to each other.
/// `stem` names both files: <stem>.png and <stem>.json.
inline void save_scene(const std::string& dir, const std::string& stem,
                       const AnnotatedScene& scene) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::string image_name = stem + ".png";
    save_image((fs::path(dir) / image_name).string(), scene.image);
    nlohmann::json doc;
    doc["image_path"] = image_name;
    nlohmann::json heads = nlohmann::json::array();
    for (const Head& h : scene.heads) heads.push_back({h.x, h.y});
    doc["heads"] = std::move(heads);
    if (scene.roi) {
        const std::string roi_name = stem + "_roi.png";
        ImageU8 roi_img = ImageU8::filled(scene.width(), scene.height(), 1, 0);
        for (std::size_t i = 0; i < scene.roi->size(); ++i) {
            roi_img.pixels[i] = (*scene.roi)[i] ? 255 : 0;
        }
        save_image((fs::path(dir) / roi_name).string(), roi_img);
        doc["roi_path"] = roi_name;
    }
    std::ofstream out((fs::path(dir) / (stem + ".json")).string(), std::ios::trunc);
    if (!out) throw IoError("cannot write scene json in " + dir);
    out << doc.dump(2) << "\n";
}

/// Scene files (sorted) in a dataset directory.
inline std::vector<std::string> list_scene_files(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path().string());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

// ---------------------------------------------------------------------------
// Geometric transforms
// ---------------------------------------------------------------------------

/// Crop a window; heads inside [x0, x0+w) x [y0, y0+h) are kept and re-based.
inline AnnotatedScene crop_scene(const AnnotatedScene& scene, std::int64_t x0, std::int64_t y0,
                                 std::int64_t w, std::int64_t h) {
    if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > scene.width() || y0 + h > scene.height()) {
        throw ContractError("crop_scene: window (" + std::to_string(x0) + "," + std::to_string(y0) +
                            ")+" + std::to_string(w) + "x" + std::to_string(h) +
                            " outside scene " + std::to_string(scene.width()) + "x" +
                            std::to_string(scene.height()));
    }
    AnnotatedScene out;
    out.image = ImageU8::filled(w, h, scene.image.channels, 0);
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            for (std::int64_t c = 0; c < scene.image.channels; ++c) {
                out.image.at(y, x, c) = scene.image.at(y0 + y, x0 + x, c);
            }
        }
    }
    for (const Head& head : scene.heads) {
        if (head.x >= static_cast<double>(x0) && head.x < static_cast<double>(x0 + w) &&
            head.y >= static_cast<double>(y0) && head.y < static_cast<double>(y0 + h)) {
            out.heads.push_back({head.x - static_cast<double>(x0), head.y - static_cast<double>(y0)});
        }
    }
    if (scene.roi) {
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(w * h));
        for (std::int64_t y = 0; y < h; ++y) {
            for (std::int64_t x = 0; x < w; ++x) {
                mask[static_cast<std::size_t>(y * w + x)] =
                    (*scene.roi)[static_cast<std::size_t>((y0 + y) * scene.width() + (x0 + x))];
            }
        }
        out.roi = std::move(mask);
    }
    return out;
}

/// Four non-overlapping (W/2)x(H/2) corner patches (floor sizes; for odd
/// dims the right/bottom patches hug the right/bottom edge, leaving a
/// one-pixel seam uncovered).
inline std::vector<AnnotatedScene> quarter_crops(const AnnotatedScene& scene) {
    const std::int64_t w2 = scene.width() / 2;
    const std::int64_t h2 = scene.height() / 2;
    if (w2 < 1 || h2 < 1) throw ContractError("quarter_crops: scene too small");
    const std::int64_t rx = scene.width() - w2;
    const std::int64_t by = scene.height() - h2;
    return {
        crop_scene(scene, 0, 0, w2, h2),
        crop_scene(scene, rx, 0, w2, h2),
        crop_scene(scene, 0, by, w2, h2),
        crop_scene(scene, rx, by, w2, h2),
    };
}

/// Random (W/2)x(H/2) patch; offsets drawn uniformly over valid positions.
inline AnnotatedScene random_crop(const AnnotatedScene& scene, Rng& rng) {
    const std::int64_t w2 = scene.width() / 2;
    const std::int64_t h2 = scene.height() / 2;
    if (w2 < 1 || h2 < 1) throw ContractError("random_crop: scene too small");
    const std::int64_t x0 = rng.uniform_int(0, scene.width() - w2);
    const std::int64_t y0 = rng.uniform_int(0, scene.height() - h2);
    return crop_scene(scene, x0, y0, w2, h2);
}

/// Horizontal mirror; head x maps to (W-1) - x. Applying twice is the identity.
inline AnnotatedScene mirror_horizontal(const AnnotatedScene& scene) {
    AnnotatedScene out;
    out.image = ImageU8::filled(scene.width(), scene.height(), scene.image.channels, 0);
    for (std::int64_t y = 0; y < scene.height(); ++y) {
        for (std::int64_t x = 0; x < scene.width(); ++x) {
            for (std::int64_t c = 0; c < scene.image.channels; ++c) {
                out.image.at(y, x, c) = scene.image.at(y, scene.width() - 1 - x, c);
            }
        }
    }
    for (const Head& head : scene.heads) {
        out.heads.push_back({static_cast<double>(scene.width() - 1) - head.x, head.y});
    }
    if (scene.roi) {
        std::vector<std::uint8_t> mask(scene.roi->size());
        for (std::int64_t y = 0; y < scene.height(); ++y) {
            for (std::int64_t x = 0; x < scene.width(); ++x) {
                mask[static_cast<std::size_t>(y * scene.width() + x)] =
                    (*scene.roi)[static_cast<std::size_t>(y * scene.width() + scene.width() - 1 - x)];
            }
        }
        out.roi = std::move(mask);
    }
    return out;
}

/// Per-channel gamma curve v -> 255*(v/255)^gamma, rounded to nearest.
inline AnnotatedScene apply_gamma(const AnnotatedScene& scene, double gamma) {
    AnnotatedScene out = scene;
    std::uint8_t lut[256];
    for (int v = 0; v < 256; ++v) {
        const double mapped = 255.0 * std::pow(static_cast<double>(v) / 255.0, gamma);
        lut[v] = static_cast<std::uint8_t>(std::lround(std::clamp(mapped, 0.0, 255.0)));
    }
    for (std::uint8_t& v : out.image.pixels) v = lut[v];
    return out;
}

/// Luma grayscale (0.299/0.587/0.114) replicated to all channels. Images
/// with equal channels are fixed points.
inline AnnotatedScene to_grayscale(const AnnotatedScene& scene) {
    AnnotatedScene out = scene;
    if (scene.image.channels == 1) return out;
    for (std::int64_t y = 0; y < scene.height(); ++y) {
        for (std::int64_t x = 0; x < scene.width(); ++x) {
            const double luma = 0.299 * scene.image.at(y, x, 0) + 0.587 * scene.image.at(y, x, 1) +
                                0.114 * scene.image.at(y, x, 2);
            const std::uint8_t g =
                static_cast<std::uint8_t>(std::lround(std::clamp(luma, 0.0, 255.0)));
            for (std::int64_t c = 0; c < scene.image.channels; ++c) out.image.at(y, x, c) = g;
        }
    }
    return out;
}

/// One augmented training sample. Draw order per sample is fixed: crop
/// offsets (random crops only), flip coin, gamma coin then value, gray coin.
inline AnnotatedScene augment_sample(const AnnotatedScene& patch_or_scene, const AugmentConfig& cfg,
                                     Rng& rng, bool draw_crop) {
    cfg.validate();
    AnnotatedScene sample =
        draw_crop ? random_crop(patch_or_scene, rng) : patch_or_scene;
    if (rng.bernoulli(cfg.flip_prob)) sample = mirror_horizontal(sample);
    if (rng.bernoulli(cfg.gamma_prob)) {
        sample = apply_gamma(sample, rng.uniform(cfg.gamma_lo, cfg.gamma_hi));
    }
    if (rng.bernoulli(cfg.gray_prob)) sample = to_grayscale(sample);
    return sample;
}

/// Epoch sample stream for one scene: the four quarter patches followed by
/// cfg.random_crops_per_image random patches, each independently augmented.
/// Patch i uses rng substream i of the supplied per-scene generator, so the
/// stream is reproducible and parallelizable.
inline std::vector<AnnotatedScene> epoch_samples(const AnnotatedScene& scene,
                                                 const AugmentConfig& cfg, const Rng& scene_rng) {
    cfg.validate();
    std::vector<AnnotatedScene> samples;
    const std::vector<AnnotatedScene> quarters = quarter_crops(scene);
    std::uint64_t patch_index = 0;
    for (const AnnotatedScene& q : quarters) {
        Rng r = scene_rng.substream(patch_index++);
        samples.push_back(augment_sample(q, cfg, r, /*draw_crop=*/false));
    }
    for (std::int64_t j = 0; j < cfg.random_crops_per_image; ++j) {
        Rng r = scene_rng.substream(patch_index++);
        samples.push_back(augment_sample(scene, cfg, r, /*draw_crop=*/true));
    }
    return samples;
}

// ---------------------------------------------------------------------------
// Resolution rules and padding
// ---------------------------------------------------------------------------

/// Dataset-specific resize policy applied at ingestion, before any
/// augmentation or density-map generation.
enum class DatasetProfile { kNone, kQnrf, kUcsd };

inline DatasetProfile dataset_profile_from_string(const std::string& s) {
    if (s == "none") return DatasetProfile::kNone;
    if (s == "qnrf") return DatasetProfile::kQnrf;
    if (s == "ucsd") return DatasetProfile::kUcsd;
    throw ConfigError("unknown dataset profile '" + s + "' (expected none|qnrf|ucsd)");
}

namespace detail {

inline AnnotatedScene resize_scene(const AnnotatedScene& scene, std::int64_t new_w,
                                   std::int64_t new_h) {
    const double sx = static_cast<double>(new_w) / static_cast<double>(scene.width());
    const double sy = static_cast<double>(new_h) / static_cast<double>(scene.height());
    AnnotatedScene out;
    out.image = resize_bilinear(scene.image, new_w, new_h);
    for (const Head& h : scene.heads) {
        out.heads.push_back({std::min(h.x * sx, static_cast<double>(new_w) * (1.0 - 1e-12)),
                             std::min(h.y * sy, static_cast<double>(new_h) * (1.0 - 1e-12))});
    }
    if (scene.roi) {
        // Nearest-neighbor for the binary mask.
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(new_w * new_h));
        for (std::int64_t y = 0; y < new_h; ++y) {
            const std::int64_t sy0 = std::min<std::int64_t>(
                scene.height() - 1, static_cast<std::int64_t>(static_cast<double>(y) / sy));
            for (std::int64_t x = 0; x < new_w; ++x) {
                const std::int64_t sx0 = std::min<std::int64_t>(
                    scene.width() - 1, static_cast<std::int64_t>(static_cast<double>(x) / sx));
                mask[static_cast<std::size_t>(y * new_w + x)] =
                    (*scene.roi)[static_cast<std::size_t>(sy0 * scene.width() + sx0)];
            }
        }
        out.roi = std::move(mask);
    }
    return out;
}

}  // namespace detail

/// qnrf: images larger than 1280x720 are scaled down uniformly until they
/// fit. ucsd: every frame is enlarged to exactly 952x632. Head coordinates
/// follow the same factors. Density maps must be regenerated afterwards,
/// never resampled.
inline AnnotatedScene resolution_rules(const AnnotatedScene& scene, DatasetProfile profile) {
    switch (profile) {
        case DatasetProfile::kNone:
            return scene;
        case DatasetProfile::kQnrf: {
            if (scene.height() <= 720 && scene.width() <= 1280) return scene;
            const double s = std::min(1280.0 / static_cast<double>(scene.width()),
                                      720.0 / static_cast<double>(scene.height()));
            const std::int64_t nw = static_cast<std::int64_t>(std::llround(scene.width() * s));
            const std::int64_t nh = static_cast<std::int64_t>(std::llround(scene.height() * s));
            return detail::resize_scene(scene, nw, nh);
        }
        case DatasetProfile::kUcsd:
            return detail::resize_scene(scene, 952, 632);
    }
    throw ConfigError("resolution_rules: unhandled profile");
}

/// Scene zero-padded on the bottom/right to multiples of m, with the
/// original extent recorded. Heads are unchanged (the pad region is empty).
struct PaddedScene {
    AnnotatedScene scene;
    std::int64_t orig_width = 0;
    std::int64_t orig_height = 0;
};

inline PaddedScene pad_to_multiple(const AnnotatedScene& scene, std::int64_t m = 8) {
    if (m <= 0) throw ContractError("pad_to_multiple: m must be positive");
    PaddedScene out;
    out.orig_width = scene.width();
    out.orig_height = scene.height();
    const std::int64_t pw = (scene.width() + m - 1) / m * m;
    const std::int64_t ph = (scene.height() + m - 1) / m * m;
    if (pw == scene.width() && ph == scene.height()) {
        out.scene = scene;
        return out;
    }
    AnnotatedScene padded;
    padded.image = ImageU8::filled(pw, ph, scene.image.channels, 0);
    for (std::int64_t y = 0; y < scene.height(); ++y) {
        for (std::int64_t x = 0; x < scene.width(); ++x) {
            for (std::int64_t c = 0; c < scene.image.channels; ++c) {
                padded.image.at(y, x, c) = scene.image.at(y, x, c);
            }
        }
    }
    padded.heads = scene.heads;
    if (scene.roi) {
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(pw * ph), 0);
        for (std::int64_t y = 0; y < scene.height(); ++y) {
            for (std::int64_t x = 0; x < scene.width(); ++x) {
                mask[static_cast<std::size_t>(y * pw + x)] =
                    (*scene.roi)[static_cast<std::size_t>(y * scene.width() + x)];
            }
        }
        padded.roi = std::move(mask);
    }
    out.scene = std::move(padded);
    return out;
}

/// Density map analogue of pad_to_multiple (zero fill, sum unchanged).
inline DensityMap pad_density_to_multiple(const DensityMap& map, std::int64_t m = 8) {
    const std::int64_t pw = (map.width + m - 1) / m * m;
    const std::int64_t ph = (map.height + m - 1) / m * m;
    if (pw == map.width && ph == map.height) return map;
    DensityMap out = DensityMap::zeros(pw, ph);
    for (std::int64_t y = 0; y < map.height; ++y) {
        for (std::int64_t x = 0; x < map.width; ++x) out.at(y, x) = map.at(y, x);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic scenes
// ---------------------------------------------------------------------------

/// Deterministic synthetic crowd scene: dark anti-aliased disks on a light
/// noisy background. Head count is uniform in [count_min, count_max]; the
/// vertical position distribution and blob radius both follow
/// vertical_scale_gradient so lower rows are denser with larger blobs.
/// Draw order: count, then (y, x, shade) per head, then background noise.
inline AnnotatedScene synth_scene(const SyntheticSceneSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const double w = static_cast<double>(spec.width);
    const double h = static_cast<double>(spec.height);

    AnnotatedScene scene;
    scene.image = ImageU8::filled(spec.width, spec.height, 3, 235);
    const std::int64_t count = rng.uniform_int(spec.count_min, spec.count_max);

    struct Blob {
        double x, y, radius, ink;
    };
    std::vector<Blob> blobs;
    const double g = spec.vertical_scale_gradient;
    const double base_radius = std::max(1.2, std::min(w, h) / 40.0);
    for (std::int64_t i = 0; i < count; ++i) {
        // Density proportional to (y/h)^g: CDF inversion of u^(1/(1+g)).
        const double y = h * std::pow(rng.uniform(), 1.0 / (1.0 + g));
        const double x = rng.uniform(0.0, w);
        const double radius = base_radius * (1.0 + g * (y / h));
        const double ink = rng.uniform(15.0, 70.0);
        scene.heads.push_back({x, y});
        blobs.push_back({x, y, radius, ink});
    }
    // Mild background noise so the renderer never emits a constant image.
    for (std::uint8_t& v : scene.image.pixels) {
        const double n = rng.uniform(-8.0, 8.0);
        v = static_cast<std::uint8_t>(std::clamp(static_cast<double>(v) + n, 0.0, 255.0));
    }
    for (const Blob& b : blobs) {
        const std::int64_t x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(b.x - b.radius - 1));
        const std::int64_t x1 =
            std::min(spec.width - 1, static_cast<std::int64_t>(b.x + b.radius + 1));
        const std::int64_t y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(b.y - b.radius - 1));
        const std::int64_t y1 =
            std::min(spec.height - 1, static_cast<std::int64_t>(b.y + b.radius + 1));
        for (std::int64_t y = y0; y <= y1; ++y) {
            for (std::int64_t x = x0; x <= x1; ++x) {
                const double dx = static_cast<double>(x) - b.x;
                const double dy = static_cast<double>(y) - b.y;
                const double dist = std::sqrt(dx * dx + dy * dy);
                const double alpha = std::clamp(b.radius - dist + 0.5, 0.0, 1.0);
                if (alpha <= 0.0) continue;
                for (std::int64_t c = 0; c < 3; ++c) {
                    const double v = scene.image.at(y, x, c);
                    scene.image.at(y, x, c) =
                        static_cast<std::uint8_t>(std::lround(v * (1.0 - alpha) + b.ink * alpha));
                }
            }
        }
    }
    scene.validate();
    return scene;
}

// ---------------------------------------------------------------------------
// Tensor bridges
// ---------------------------------------------------------------------------

/// (1, 3, H, W) tensor in [0, 1]; grayscale input is replicated to 3 channels.
inline Tensor image_to_tensor(const ImageU8& img) {
    Tensor t = Tensor::zeros({1, 3, img.height, img.width});
    for (std::int64_t y = 0; y < img.height; ++y) {
        for (std::int64_t x = 0; x < img.width; ++x) {
            for (std::int64_t c = 0; c < 3; ++c) {
                const std::int64_t src_c = img.channels == 1 ? 0 : c;
                t.at(0, c, y, x) = static_cast<double>(img.at(y, x, src_c)) / 255.0;
            }
        }
    }
    return t;
}

inline Tensor density_to_tensor(const DensityMap& map) {
    return Tensor::from_data({1, 1, map.height, map.width}, map.grid);
}

inline DensityMap tensor_to_density(const Tensor& t) {
    const Shape4 s = t.shape();
    if (s.n != 1 || s.c != 1) {
        throw ContractError("tensor_to_density: expected (1,1,h,w), got " + s.str());
    }
    DensityMap map = DensityMap::zeros(s.w, s.h);
    map.grid = t.vec();
    return map;
}

}  // namespace dsnet
