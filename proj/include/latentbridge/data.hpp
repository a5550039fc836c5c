#pragma once

// Procedural paired-scene generator plus the on-disk dataset layout.
//
// A scene is a ground plane under a sky with a handful of simple objects
// standing on the ground.  Depth follows a projective ground-plane falloff;
// each object carries the constant depth of its contact row.  The sim
// rendering uses flat per-class colors; the real rendering reuses the exact
// same geometry but applies an appearance shift (per-class texture noise, a
// warm color matrix, and a vignette).  Labels and depth are therefore
// identical across domains while rgb differs — the domain gap lives entirely
// in appearance, which is what makes transfer measurable on generated data.
//
// Disk layout: root/{sim,real}/rgb/NNNNNN.png, root/sim/depth/NNNNNN.png
// (16-bit gray), root/{sim,real}/seg/NNNNNN.png (8-bit indexed), and
// root/meta.json with depth range, class names, and counts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "latentbridge/model.hpp"
#include "latentbridge/png_io.hpp"
#include "latentbridge/rng.hpp"
#include "latentbridge/tensor.hpp"
#include "latentbridge/trainer.hpp"

namespace lb {

inline constexpr double kDepthMinDefault = 1.0;
inline constexpr double kDepthMaxDefault = 80.0;
inline constexpr int32_t kLabelSky = 0;
inline constexpr int32_t kLabelGround = 1;

inline const std::vector<std::string>& desk_class_names() {
    static const std::vector<std::string> names = {"sky", "ground", "box",
                                                   "ball", "post", "slab"};
    return names;
}

struct ShiftConfig {
    double texture_noise = 0.15;  // per-class appearance noise amplitude
    double warmth = 0.25;         // global color-matrix strength
    double vignette = 0.35;       // corner darkening strength
};

struct SceneConfig {
    double d_min = kDepthMinDefault;
    double d_max = kDepthMaxDefault;
    int min_objects = 3;
    int max_objects = 8;
    ShiftConfig shift;
};

template <typename T>
struct SceneSample {
    Tensor<T> rgb{Shape{0}};           // (3,H,W) in [-1,1]
    Tensor<T> depth{Shape{0}};         // (1,H,W) meters in [d_min,d_max]
    Tensor<int32_t> labels{Shape{0}};  // (H,W) class ids
    Domain domain = Domain::sim;
};

template <typename T>
struct ScenePair {
    SceneSample<T> sim, real;
};

// --- depth <-> tanh-range coding ---------------------------------------------

template <typename T>
Tensor<T> normalize_depth(const Tensor<T>& d, double d_min, double d_max) {
    if (!(d_max > d_min)) throw ConfigError("depth range requires d_max > d_min");
    Tensor<T> out(d.shape);
    const double s = 2.0 / (d_max - d_min);
    for (int64_t i = 0; i < d.numel(); ++i)
        out[i] = static_cast<T>((static_cast<double>(d[i]) - d_min) * s - 1.0);
    return out;
}

template <typename T>
Tensor<T> denormalize_depth(const Tensor<T>& v, double d_min, double d_max) {
    if (!(d_max > d_min)) throw ConfigError("depth range requires d_max > d_min");
    Tensor<T> out(v.shape);
    const double s = (d_max - d_min) / 2.0;
    for (int64_t i = 0; i < v.numel(); ++i)
        out[i] = static_cast<T>((static_cast<double>(v[i]) + 1.0) * s + d_min);
    return out;
}

// --- class remapping ----------------------------------------------------------

struct ClassMap {
    std::vector<int32_t> target;  // source class id -> target id or `ignore`
    int32_t ignore = -1;
    int32_t target_classes = 0;

    static ClassMap identity(int32_t c) {
        ClassMap cm;
        cm.target.resize(static_cast<size_t>(c));
        for (int32_t i = 0; i < c; ++i) cm.target[static_cast<size_t>(i)] = i;
        cm.target_classes = c;
        return cm;
    }

    // The 14 source classes with two folded away: "tree" joins "vegetation"
    // and "misc" is dropped, leaving 12 dense target classes.
    static ClassMap vkitti14_to_common12() {
        ClassMap cm;
        // terrain, sky, tree, vegetation, building, road, guard rail,
        // traffic sign, traffic light, pole, misc, truck, car, van
        cm.target = {0, 1, 2, 2, 3, 4, 5, 6, 7, 8, cm.ignore, 9, 10, 11};
        cm.target_classes = 12;
        return cm;
    }
};

inline Tensor<int32_t> remap_classes(const Tensor<int32_t>& labels, const ClassMap& cm) {
    Tensor<int32_t> out(labels.shape);
    const auto n_src = static_cast<int32_t>(cm.target.size());
    for (int64_t i = 0; i < labels.numel(); ++i) {
        const int32_t v = labels[i];
        if (v < 0 || v >= n_src)
            throw DataError("label " + std::to_string(v) + " at pixel " + std::to_string(i) +
                            " is outside the " + std::to_string(n_src) + "-class source range");
        out[i] = cm.target[static_cast<size_t>(v)];
    }
    return out;
}

// --- scene generation ---------------------------------------------------------

namespace detail {

struct SceneObject {
    int32_t cls;
    double depth;
    int64_t x_center, y_bottom, height_px, width_px;
    double brightness;
    bool round;
};

// flat per-class colors in [-1,1]
inline const double kSimPalette[6][3] = {
    {-0.10, 0.30, 0.80},   // sky
    {-0.20, 0.05, -0.45},  // ground
    {0.70, 0.15, -0.50},   // box
    {-0.60, -0.55, 0.70},  // ball
    {0.05, 0.05, 0.05},    // post
    {0.60, 0.55, -0.70},   // slab
};

// relative appearance-noise amplitude per class in the real rendering
inline const double kClassNoiseAmp[6] = {0.25, 0.90, 0.60, 0.50, 0.40, 0.70};

}  // namespace detail

// Deterministic in (seed, size, config): geometry and appearance use two
// independent derived streams consumed in fixed order.
template <typename T>
ScenePair<T> generate_scene(uint64_t seed, int64_t h, int64_t w, const SceneConfig& cfg = {}) {
    if (h < 8 || w < 8) throw ConfigError("scene size must be at least 8x8");
    if (!(cfg.d_max > cfg.d_min)) throw ConfigError("depth range requires d_max > d_min");
    Rng geom(derive_seed(seed, {0}));
    Rng look(derive_seed(seed, {1}));

    const int64_t horizon =
        std::clamp<int64_t>(h * 2 / 5 + geom.uniform_int(-static_cast<int>(h / 16),
                                                         static_cast<int>(h / 16)),
                            1, h - 4);
    const double ground_scale = 2.0 * static_cast<double>(h - horizon);
    auto ground_depth = [&](int64_t y) {
        const double d = ground_scale / (static_cast<double>(y - horizon) + 0.5);
        return std::clamp(d, cfg.d_min, cfg.d_max);
    };

    Tensor<T> depth(Shape{1, h, w});
    Tensor<int32_t> labels(Shape{h, w});
    Tensor<T> sim_rgb(Shape{3, h, w});
    auto put_px = [&](int64_t y, int64_t x, int32_t cls, double d, double brightness) {
        depth[y * w + x] = static_cast<T>(d);
        labels[y * w + x] = cls;
        for (int64_t c = 0; c < 3; ++c)
            sim_rgb[(c * h + y) * w + x] = static_cast<T>(
                std::clamp(detail::kSimPalette[cls][c] + brightness, -1.0, 1.0));
    };

    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            if (y < horizon)
                put_px(y, x, kLabelSky, cfg.d_max, 0.0);
            else
                put_px(y, x, kLabelGround, ground_depth(y), 0.0);
        }

    const int n_obj = geom.uniform_int(cfg.min_objects, cfg.max_objects);
    std::vector<detail::SceneObject> objects;
    for (int i = 0; i < n_obj; ++i) {
        detail::SceneObject o;
        o.cls = geom.uniform_int(2, 5);
        o.y_bottom = geom.uniform_int(static_cast<int>(horizon + 2), static_cast<int>(h - 1));
        o.depth = ground_depth(o.y_bottom);
        const double height_m = (o.cls == 2   ? 1.2
                                 : o.cls == 3 ? 0.9
                                 : o.cls == 4 ? 2.6
                                              : 0.5) *
                                geom.uniform(0.8, 1.25);
        o.height_px = std::clamp<int64_t>(
            static_cast<int64_t>(std::lround(height_m * ground_scale / o.depth)), 2, h * 3 / 4);
        switch (o.cls) {
            case 2: o.width_px = std::max<int64_t>(2, static_cast<int64_t>(std::lround(
                        static_cast<double>(o.height_px) * geom.uniform(0.8, 1.2)))); break;
            case 3: o.width_px = o.height_px; break;
            case 4: o.width_px = std::max<int64_t>(1, o.height_px / 6); break;
            default: o.width_px = o.height_px * 3; break;
        }
        o.x_center = geom.uniform_int(0, static_cast<int>(w - 1));
        o.brightness = geom.uniform(-0.1, 0.1);
        o.round = o.cls == 3;
        objects.push_back(o);
    }
    // painter's order: far to near, so nearer objects overwrite
    std::stable_sort(objects.begin(), objects.end(),
                     [](const auto& a, const auto& b) { return a.depth > b.depth; });
    for (const auto& o : objects) {
        const int64_t y0 = o.y_bottom - o.height_px + 1;
        for (int64_t y = std::max<int64_t>(0, y0); y <= o.y_bottom; ++y)
            for (int64_t x = std::max<int64_t>(0, o.x_center - o.width_px / 2);
                 x <= std::min<int64_t>(w - 1, o.x_center + o.width_px / 2); ++x) {
                if (o.round) {
                    const double ry =
                        static_cast<double>(y) - static_cast<double>(y0 + o.y_bottom) / 2.0;
                    const double rx = static_cast<double>(x - o.x_center);
                    const double rr = static_cast<double>(o.height_px) / 2.0;
                    if (rx * rx + ry * ry > rr * rr) continue;
                }
                put_px(y, x, o.cls, o.depth, o.brightness);
            }
    }

    ScenePair<T> pair;
    pair.sim.rgb = sim_rgb;
    pair.sim.depth = depth;
    pair.sim.labels = labels;
    pair.sim.domain = Domain::sim;

    // real: same geometry, shifted appearance
    Tensor<T> real_rgb(Shape{3, h, w});
    const double cx = static_cast<double>(w - 1) / 2.0, cy = static_cast<double>(h - 1) / 2.0;
    const double corner = cx * cx + cy * cy;
    const double wm = cfg.shift.warmth;
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            const int32_t cls = labels[y * w + x];
            const double n = look.normal();
            const double grain =
                cfg.shift.texture_noise * detail::kClassNoiseAmp[cls] * n * 0.5;
            const double fall =
                1.0 - cfg.shift.vignette *
                          ((static_cast<double>(x) - cx) * (static_cast<double>(x) - cx) +
                           (static_cast<double>(y) - cy) * (static_cast<double>(y) - cy)) /
                          corner;
            double u[3];
            for (int64_t c = 0; c < 3; ++c)
                u[c] = (static_cast<double>(sim_rgb[(c * h + y) * w + x]) + 1.0) / 2.0;
            double r = u[0] * (1.0 + 0.20 * wm) + 0.10 * wm;
            double g = u[1] * (1.0 - 0.05 * wm) + 0.02 * wm;
            double b = u[2] * (1.0 - 0.25 * wm) - 0.08 * wm;
            const double shifted[3] = {r, g, b};
            for (int64_t c = 0; c < 3; ++c) {
                const double v = std::clamp((shifted[c] + grain) * fall, 0.0, 1.0);
                real_rgb[(c * h + y) * w + x] = static_cast<T>(v * 2.0 - 1.0);
            }
        }
    pair.real.rgb = real_rgb;
    pair.real.depth = depth;
    pair.real.labels = labels;
    pair.real.domain = Domain::real;
    return pair;
}

// A set of scenes with per-index derived seeds.  With real_offset > 0 the
// real split is taken from differently seeded scenes, so no sim/real pair
// shares content at any index (truly unpaired splits for stage-1 training;
// note the index-paired depth/label identity then no longer holds).
template <typename T>
std::vector<ScenePair<T>> generate_scene_set(uint64_t seed, int64_t count, int64_t h, int64_t w,
                                             const SceneConfig& cfg = {},
                                             uint64_t real_offset = 0) {
    std::vector<ScenePair<T>> out;
    out.reserve(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) {
        auto p = generate_scene<T>(derive_seed(seed, {static_cast<uint64_t>(i)}), h, w, cfg);
        if (real_offset != 0)
            p.real = generate_scene<T>(derive_seed(seed, {real_offset + static_cast<uint64_t>(i)}),
                                       h, w, cfg)
                         .real;
        out.push_back(std::move(p));
    }
    return out;
}

// --- pixel codecs -------------------------------------------------------------

template <typename T>
std::vector<uint8_t> rgb_to_bytes(const Tensor<T>& rgb) {
    if (rgb.shape.size() != 3 || rgb.dim(0) != 3)
        throw ShapeError("rgb tensor must be (3,H,W)");
    const int64_t h = rgb.dim(1), w = rgb.dim(2);
    std::vector<uint8_t> out(static_cast<size_t>(h * w * 3));
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
            for (int64_t c = 0; c < 3; ++c) {
                const double u = (static_cast<double>(rgb[(c * h + y) * w + x]) + 1.0) / 2.0;
                out[static_cast<size_t>((y * w + x) * 3 + c)] =
                    static_cast<uint8_t>(std::clamp(std::lround(u * 255.0), 0l, 255l));
            }
    return out;
}

template <typename T>
Tensor<T> bytes_to_rgb(const Rgb8Image& img) {
    Tensor<T> out(Shape{3, img.height, img.width});
    const int64_t h = img.height, w = img.width;
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
            for (int64_t c = 0; c < 3; ++c)
                out[(c * h + y) * w + x] = static_cast<T>(
                    static_cast<double>(img.pixels[static_cast<size_t>((y * w + x) * 3 + c)]) /
                        255.0 * 2.0 -
                    1.0);
    return out;
}

template <typename T>
std::vector<uint16_t> depth_to_u16(const Tensor<T>& depth, double d_min, double d_max) {
    if (!(d_max > d_min)) throw ConfigError("depth range requires d_max > d_min");
    std::vector<uint16_t> out(static_cast<size_t>(depth.numel()));
    for (int64_t i = 0; i < depth.numel(); ++i) {
        const double u = (static_cast<double>(depth[i]) - d_min) / (d_max - d_min);
        out[static_cast<size_t>(i)] =
            static_cast<uint16_t>(std::clamp(std::lround(u * 65535.0), 0l, 65535l));
    }
    return out;
}

template <typename T>
Tensor<T> u16_to_depth(const Gray16Image& img, double d_min, double d_max) {
    if (!(d_max > d_min)) throw ConfigError("depth range requires d_max > d_min");
    Tensor<T> out(Shape{1, img.height, img.width});
    for (int64_t i = 0; i < out.numel(); ++i)
        out[i] = static_cast<T>(d_min + static_cast<double>(img.pixels[static_cast<size_t>(i)]) /
                                            65535.0 * (d_max - d_min));
    return out;
}

inline std::vector<uint8_t> labels_to_bytes(const Tensor<int32_t>& labels) {
    std::vector<uint8_t> out(static_cast<size_t>(labels.numel()));
    for (int64_t i = 0; i < labels.numel(); ++i) {
        if (labels[i] < 0 || labels[i] > 255)
            throw DataError("label " + std::to_string(labels[i]) +
                            " cannot be stored in an 8-bit index");
        out[static_cast<size_t>(i)] = static_cast<uint8_t>(labels[i]);
    }
    return out;
}

inline Tensor<int32_t> bytes_to_labels(const Indexed8Image& img) {
    Tensor<int32_t> out(Shape{img.height, img.width});
    for (int64_t i = 0; i < out.numel(); ++i)
        out[i] = static_cast<int32_t>(img.pixels[static_cast<size_t>(i)]);
    return out;
}

// distinct, inspectable palette colors for label images
inline std::vector<std::array<uint8_t, 3>> label_palette(int32_t classes) {
    std::vector<std::array<uint8_t, 3>> p;
    for (int32_t i = 0; i < std::max(classes, 1); ++i) {
        const double hue = std::fmod(0.12 + 0.618033988749895 * i, 1.0) * 6.0;
        const int sector = static_cast<int>(hue);
        const double f = hue - sector;
        const double v = 0.92, s = 0.78;
        const double q = v * (1 - s * f), t = v * (1 - s * (1 - f)), lo = v * (1 - s);
        double r, g, b;
        switch (sector % 6) {
            case 0: r = v, g = t, b = lo; break;
            case 1: r = q, g = v, b = lo; break;
            case 2: r = lo, g = v, b = t; break;
            case 3: r = lo, g = q, b = v; break;
            case 4: r = t, g = lo, b = v; break;
            default: r = v, g = lo, b = q; break;
        }
        p.push_back({static_cast<uint8_t>(std::lround(r * 255)),
                     static_cast<uint8_t>(std::lround(g * 255)),
                     static_cast<uint8_t>(std::lround(b * 255))});
    }
    return p;
}

// --- dataset on disk ----------------------------------------------------------

struct DatasetMeta {
    double d_min = kDepthMinDefault;
    double d_max = kDepthMaxDefault;
    std::vector<std::string> class_names;
    int64_t sim_count = 0;
    int64_t real_count = 0;
    int64_t height = 0;
    int64_t width = 0;

    nlohmann::json to_json() const {
        return {{"d_min", d_min},
                {"d_max", d_max},
                {"class_names", class_names},
                {"counts", {{"sim", sim_count}, {"real", real_count}}},
                {"height", height},
                {"width", width}};
    }
    static DatasetMeta from_json(const nlohmann::json& j) {
        try {
            DatasetMeta m;
            m.d_min = j.at("d_min").get<double>();
            m.d_max = j.at("d_max").get<double>();
            m.class_names = j.at("class_names").get<std::vector<std::string>>();
            m.sim_count = j.at("counts").at("sim").get<int64_t>();
            m.real_count = j.at("counts").at("real").get<int64_t>();
            m.height = j.at("height").get<int64_t>();
            m.width = j.at("width").get<int64_t>();
            return m;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("malformed dataset meta: ") + e.what());
        }
    }
};

namespace detail {

inline std::string sample_name(int64_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(index));
    return std::string(buf) + ".png";
}

}  // namespace detail

template <typename T>
void write_dataset(const std::string& root, const std::vector<ScenePair<T>>& pairs,
                   const SceneConfig& cfg = {},
                   const std::vector<std::string>& class_names = desk_class_names()) {
    if (pairs.empty()) throw DataError("refusing to write an empty dataset");
    namespace fs = std::filesystem;
    for (const char* sub : {"sim/rgb", "sim/depth", "sim/seg", "real/rgb", "real/seg"})
        fs::create_directories(fs::path(root) / sub);

    const auto palette = label_palette(static_cast<int32_t>(class_names.size()));
    const int64_t h = pairs.front().sim.rgb.dim(1), w = pairs.front().sim.rgb.dim(2);
    for (size_t i = 0; i < pairs.size(); ++i) {
        const auto name = detail::sample_name(static_cast<int64_t>(i));
        const auto& p = pairs[i];
        write_png_rgb8((fs::path(root) / "sim/rgb" / name).string(), h, w,
                       rgb_to_bytes(p.sim.rgb));
        write_png_gray16((fs::path(root) / "sim/depth" / name).string(), h, w,
                         depth_to_u16(p.sim.depth, cfg.d_min, cfg.d_max));
        write_png_indexed8((fs::path(root) / "sim/seg" / name).string(), h, w,
                           labels_to_bytes(p.sim.labels), palette);
        write_png_rgb8((fs::path(root) / "real/rgb" / name).string(), h, w,
                       rgb_to_bytes(p.real.rgb));
        write_png_indexed8((fs::path(root) / "real/seg" / name).string(), h, w,
                           labels_to_bytes(p.real.labels), palette);
    }

    DatasetMeta meta;
    meta.d_min = cfg.d_min;
    meta.d_max = cfg.d_max;
    meta.class_names = class_names;
    meta.sim_count = static_cast<int64_t>(pairs.size());
    meta.real_count = static_cast<int64_t>(pairs.size());
    meta.height = h;
    meta.width = w;
    std::ofstream out(fs::path(root) / "meta.json");
    if (!out) throw DataError("cannot write '" + root + "/meta.json'");
    out << meta.to_json().dump(2) << "\n";
}

// Lazily loads samples from the on-disk layout.  The real split's depth maps
// fall back to the sim split's file at the same index when the real split has
// none of its own (index-paired generation keeps geometry identical across
// domains, so the fallback is exact there).
template <typename T>
class DirectoryDataset {
  public:
    explicit DirectoryDataset(std::string root) : root_(std::move(root)) {
        std::ifstream in(std::filesystem::path(root_) / "meta.json");
        if (!in) throw DataError("missing dataset meta '" + root_ + "/meta.json'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw DataError("malformed dataset meta '" + root_ + "/meta.json': " + e.what());
        }
        meta_ = DatasetMeta::from_json(j);
    }

    const DatasetMeta& meta() const { return meta_; }
    const std::string& root() const { return root_; }
    int64_t count(Domain d) const { return d == Domain::sim ? meta_.sim_count : meta_.real_count; }

    // rgb is always loaded; depth/labels are loaded when their files exist
    // (with_ground_truth=false skips them entirely).
    SceneSample<T> load(Domain d, int64_t index, bool with_ground_truth = true) const {
        namespace fs = std::filesystem;
        const std::string split = d == Domain::sim ? "sim" : "real";
        if (index < 0 || index >= count(d))
            throw DataError("sample index " + std::to_string(index) + " out of range for the " +
                            split + " split of '" + root_ + "'");
        const auto name = detail::sample_name(index);
        SceneSample<T> s;
        s.domain = d;
        s.rgb = bytes_to_rgb<T>(read_png_rgb8((fs::path(root_) / split / "rgb" / name).string()));
        if (!with_ground_truth) return s;

        fs::path depth_path = fs::path(root_) / split / "depth" / name;
        if (d == Domain::real && !fs::exists(depth_path) && index < meta_.sim_count)
            depth_path = fs::path(root_) / "sim" / "depth" / name;
        if (d == Domain::sim || fs::exists(depth_path))
            s.depth = u16_to_depth<T>(read_png_gray16(depth_path.string()), meta_.d_min,
                                      meta_.d_max);
        const fs::path seg_path = fs::path(root_) / split / "seg" / name;
        if (d == Domain::sim || fs::exists(seg_path))
            s.labels = bytes_to_labels(read_png_indexed8(seg_path.string()));
        return s;
    }

  private:
    std::string root_;
    DatasetMeta meta_;
};

// Stack a dataset into in-memory training arrays.  Training consumes real rgb
// only — real ground truth stays on disk for the evaluator.
template <typename T>
TrainingData<T> load_training_data(const DirectoryDataset<T>& ds, int64_t max_real = -1,
                                   int64_t max_sim = -1) {
    const int64_t n_real =
        max_real < 0 ? ds.count(Domain::real) : std::min(max_real, ds.count(Domain::real));
    const int64_t n_sim =
        max_sim < 0 ? ds.count(Domain::sim) : std::min(max_sim, ds.count(Domain::sim));
    if (n_real < 1 || n_sim < 1)
        throw DataError("dataset '" + ds.root() + "' has an empty split");

    const int64_t h = ds.meta().height, w = ds.meta().width;
    TrainingData<T> td;
    td.real_rgb = Tensor<T>(Shape{n_real, 3, h, w});
    td.sim_rgb = Tensor<T>(Shape{n_sim, 3, h, w});
    td.sim_depth = Tensor<T>(Shape{n_sim, 1, h, w});
    td.sim_seg = Tensor<int32_t>(Shape{n_sim, h, w});
    for (int64_t i = 0; i < n_real; ++i) {
        auto s = ds.load(Domain::real, i, /*with_ground_truth=*/false);
        require_shape(s.rgb, Shape{3, h, w}, "real rgb sample");
        std::copy(s.rgb.data.begin(), s.rgb.data.end(), td.real_rgb.data.begin() + i * 3 * h * w);
    }
    for (int64_t i = 0; i < n_sim; ++i) {
        auto s = ds.load(Domain::sim, i);
        require_shape(s.rgb, Shape{3, h, w}, "sim rgb sample");
        require_shape(s.depth, Shape{1, h, w}, "sim depth sample");
        require_shape(s.labels, Shape{h, w}, "sim label sample");
        std::copy(s.rgb.data.begin(), s.rgb.data.end(), td.sim_rgb.data.begin() + i * 3 * h * w);
        auto nd = normalize_depth(s.depth, ds.meta().d_min, ds.meta().d_max);
        std::copy(nd.data.begin(), nd.data.end(), td.sim_depth.data.begin() + i * h * w);
        std::copy(s.labels.data.begin(), s.labels.data.end(),
                  td.sim_seg.data.begin() + i * h * w);
    }
    return td;
}

// used by data-producing commands to reject sizes a preset cannot process
inline void require_size_divisible(int64_t h, int64_t w, int64_t divisor) {
    if (divisor > 0 && (h % divisor || w % divisor))
        throw ConfigError("image size " + std::to_string(h) + "x" + std::to_string(w) +
                          " is not divisible by the preset downsample factor " +
                          std::to_string(divisor) + "; pick a multiple of " +
                          std::to_string(divisor));
}

}  // namespace lb
