#pragma once

// Static plot rendering: per-field loss curves from a JSONL training log and
// side-by-side rgb / depth / class-map prediction panels.  Everything draws
// onto a plain byte canvas and saves as PNG, so outputs are deterministic.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "latentbridge/data.hpp"
#include "latentbridge/metrics.hpp"
#include "latentbridge/png_io.hpp"

namespace lb {

struct Canvas {
    int64_t height, width;
    std::vector<uint8_t> rgb;

    Canvas(int64_t h, int64_t w, std::array<uint8_t, 3> bg = {255, 255, 255})
        : height(h), width(w), rgb(static_cast<size_t>(h * w * 3)) {
        for (int64_t i = 0; i < h * w; ++i)
            for (int64_t c = 0; c < 3; ++c) rgb[static_cast<size_t>(i * 3 + c)] = bg[static_cast<size_t>(c)];
    }

    void set(int64_t y, int64_t x, std::array<uint8_t, 3> color) {
        if (y < 0 || y >= height || x < 0 || x >= width) return;
        for (int64_t c = 0; c < 3; ++c)
            rgb[static_cast<size_t>((y * width + x) * 3 + c)] = color[static_cast<size_t>(c)];
    }

    void line(int64_t y0, int64_t x0, int64_t y1, int64_t x1, std::array<uint8_t, 3> color) {
        const int64_t steps = std::max<int64_t>({std::abs(x1 - x0), std::abs(y1 - y0), 1});
        for (int64_t i = 0; i <= steps; ++i) {
            const double t = static_cast<double>(i) / static_cast<double>(steps);
            set(std::llround(std::lerp(static_cast<double>(y0), static_cast<double>(y1), t)),
                std::llround(std::lerp(static_cast<double>(x0), static_cast<double>(x1), t)),
                color);
        }
    }

    void blit(int64_t y, int64_t x, int64_t h, int64_t w, const std::vector<uint8_t>& tile) {
        for (int64_t ty = 0; ty < h; ++ty)
            for (int64_t tx = 0; tx < w; ++tx)
                set(y + ty, x + tx,
                    {tile[static_cast<size_t>((ty * w + tx) * 3)],
                     tile[static_cast<size_t>((ty * w + tx) * 3 + 1)],
                     tile[static_cast<size_t>((ty * w + tx) * 3 + 2)]});
    }

    void save(const std::string& path) const { write_png_rgb8(path, height, width, rgb); }
};

// Numeric per-step series from a JSONL training log; bookkeeping keys are not
// loss fields.
struct LossLog {
    std::vector<std::string> fields;  // first-seen order
    std::map<std::string, std::vector<double>> series;
    int64_t steps = 0;
};

inline LossLog parse_train_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open training log '" + path + "'");
    static const std::vector<std::string> skip = {"plan", "epoch", "step", "wall_ms", "skipped"};
    LossLog log;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("training log '" + path + "' line " + std::to_string(line_no) +
                            " is not valid JSON: " + e.what());
        }
        for (const auto& [key, value] : j.items()) {
            if (!value.is_number()) continue;
            if (std::find(skip.begin(), skip.end(), key) != skip.end()) continue;
            if (!log.series.count(key)) log.fields.push_back(key);
            log.series[key].push_back(value.get<double>());
        }
        ++log.steps;
    }
    if (log.steps == 0) throw DataError("training log '" + path + "' holds no steps");
    return log;
}

// One curve image per loss field: loss_<field>.png under out_dir.
inline std::vector<std::string> plot_loss_curves(const LossLog& log, const std::string& out_dir,
                                                 int64_t h = 240, int64_t w = 640) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::vector<std::string> written;
    const int64_t margin = 8;
    for (const auto& field : log.fields) {
        const auto& ys = log.series.at(field);
        double lo = ys[0], hi = ys[0];
        for (double v : ys) lo = std::min(lo, v), hi = std::max(hi, v);
        if (hi - lo < 1e-12) hi = lo + 1.0;

        Canvas c(h, w);
        c.line(h - margin, margin, h - margin, w - margin, {160, 160, 160});
        c.line(margin, margin, h - margin, margin, {160, 160, 160});
        const int64_t n = static_cast<int64_t>(ys.size());
        auto px = [&](int64_t i) {
            return margin + (n == 1 ? 0
                                    : (w - 2 * margin) * i / std::max<int64_t>(1, n - 1));
        };
        auto py = [&](double v) {
            return h - margin -
                   static_cast<int64_t>((v - lo) / (hi - lo) * static_cast<double>(h - 2 * margin));
        };
        for (int64_t i = 0; i + 1 < n; ++i)
            c.line(py(ys[static_cast<size_t>(i)]), px(i), py(ys[static_cast<size_t>(i + 1)]),
                   px(i + 1), {30, 60, 200});
        if (n == 1) c.set(py(ys[0]), px(0), {30, 60, 200});

        std::string name = field;
        std::replace(name.begin(), name.end(), '/', '_');
        const std::string path = (fs::path(out_dir) / ("loss_" + name + ".png")).string();
        c.save(path);
        written.push_back(path);
    }
    return written;
}

namespace detail {

template <typename T>
std::vector<uint8_t> depth_tile(const Tensor<T>& meters /*(1,h,w)*/, double d_min, double d_max,
                                int64_t tile) {
    auto r = resize_bilinear(meters, tile, tile);
    std::vector<uint8_t> out(static_cast<size_t>(tile * tile * 3));
    for (int64_t i = 0; i < tile * tile; ++i) {
        const double u =
            std::clamp((static_cast<double>(r[i]) - d_min) / (d_max - d_min), 0.0, 1.0);
        const auto v = static_cast<uint8_t>(std::lround((1.0 - u) * 255.0));  // near is bright
        out[static_cast<size_t>(i * 3)] = v;
        out[static_cast<size_t>(i * 3 + 1)] = v;
        out[static_cast<size_t>(i * 3 + 2)] = v;
    }
    return out;
}

inline std::vector<uint8_t> label_tile(const Tensor<int32_t>& labels, int32_t classes,
                                       int64_t tile) {
    const auto palette = label_palette(classes);
    auto r = resize_nearest(labels, tile, tile);
    std::vector<uint8_t> out(static_cast<size_t>(tile * tile * 3));
    for (int64_t i = 0; i < tile * tile; ++i) {
        const auto& c = palette[static_cast<size_t>(std::clamp<int32_t>(r[i], 0, classes - 1))];
        out[static_cast<size_t>(i * 3)] = c[0];
        out[static_cast<size_t>(i * 3 + 1)] = c[1];
        out[static_cast<size_t>(i * 3 + 2)] = c[2];
    }
    return out;
}

template <typename T>
std::vector<uint8_t> rgb_tile(const Tensor<T>& rgb /*(3,h,w)*/, int64_t tile) {
    return rgb_to_bytes(resize_bilinear(rgb, tile, tile));
}

}  // namespace detail

// N rows of [input rgb | predicted depth | predicted class map], one row per
// sample; the image is (n*tile) x (3*tile).
template <typename T>
void render_prediction_panels(const ModelBundle<T>& model, const DirectoryDataset<T>& ds,
                              Domain domain, int64_t n, int64_t tile, const std::string& path) {
    if (n < 1 || n > ds.count(domain))
        throw ConfigError("panel row count " + std::to_string(n) + " exceeds the " +
                          std::string(domain == Domain::sim ? "sim" : "real") + " split");
    if (tile < 8) throw ConfigError("panel tile size must be at least 8");
    const int64_t ms = model.arch.image_size;
    Canvas canvas(n * tile, 3 * tile);
    for (int64_t i = 0; i < n; ++i) {
        auto s = ds.load(domain, i, /*with_ground_truth=*/false);
        Tensor<T> x = s.rgb;
        if (x.dim(1) != ms || x.dim(2) != ms) x = resize_bilinear(x, ms, ms);
        Tensor<T> input(Shape{1, 3, ms, ms});
        input.data = x.data;

        Graph<T> g;
        ModelForward<T> f(g, model);
        LatentVars lat = f.encode(g.leaf(input), domain, Mode::mean, nullptr);
        Tensor<T> depth_out = g.val(f.decode(lat.z, Head::depth));
        Tensor<T> seg_out = g.val(f.decode(lat.z, Head::seg));

        Tensor<T> d(Shape{1, depth_out.dim(2), depth_out.dim(3)});
        d.data = depth_out.data;
        const auto meters = denormalize_depth(d, ds.meta().d_min, ds.meta().d_max);
        const auto labels = detail::argmax_labels(seg_out);

        canvas.blit(i * tile, 0, tile, tile, detail::rgb_tile(s.rgb, tile));
        canvas.blit(i * tile, tile, tile, tile,
                    detail::depth_tile(meters, ds.meta().d_min, ds.meta().d_max, tile));
        canvas.blit(i * tile, 2 * tile, tile, tile,
                    detail::label_tile(labels, static_cast<int32_t>(model.arch.seg_classes),
                                       tile));
    }
    canvas.save(path);
}

}  // namespace lb
