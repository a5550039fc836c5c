#pragma once

// Evaluation suite: four standard depth-error metrics, mean IoU, and pixel
// accuracy, plus whole-dataset model evaluation with the resize protocol
// (bilinear for depth, nearest for labels).  Datasets are scored per image
// and the per-image reports averaged arithmetically.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "latentbridge/data.hpp"
#include "latentbridge/model.hpp"

namespace lb {

struct MetricReport {
    double abs_rel = 0.0;
    double sq_rel = 0.0;
    double rmse = 0.0;
    double log_rmse = 0.0;
    double miou = 0.0;
    double pixel_accuracy = 0.0;
    int64_t n_images = 0;

    nlohmann::json to_json() const {
        return {{"abs_rel", abs_rel}, {"sq_rel", sq_rel},
                {"rmse", rmse},       {"log_rmse", log_rmse},
                {"miou", miou},       {"pixel_accuracy", pixel_accuracy},
                {"n_images", n_images}};
    }

    // header + one row in the conventional results-table column order
    std::string to_csv() const {
        auto num = [](double v) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.6g", v);
            return std::string(buf);
        };
        return "Abs. Rel.,Sq. Rel.,RMSE,log RMSE,mIOU,Accuracy\n" + num(abs_rel) + "," +
               num(sq_rel) + "," + num(rmse) + "," + num(log_rmse) + "," + num(miou) + "," +
               num(pixel_accuracy) + "\n";
    }
};

// Depth errors over the valid mask gt > 0 (supports sparse ground truth).
// Predictions enter the log metric clamped to [d_min, d_max]; the linear
// metrics use them as-is.
template <typename T>
MetricReport depth_metrics(const Tensor<T>& pred, const Tensor<T>& gt, double d_min,
                           double d_max) {
    require_shape(pred, gt.shape, "depth metric inputs");
    if (!(d_max > d_min)) throw ConfigError("depth range requires d_max > d_min");
    double abs_rel = 0, sq_rel = 0, sq = 0, log_sq = 0;
    int64_t valid = 0;
    for (int64_t i = 0; i < gt.numel(); ++i) {
        const double t = static_cast<double>(gt[i]);
        if (!(t > 0)) continue;
        const double p = static_cast<double>(pred[i]);
        const double diff = t - p;
        abs_rel += std::abs(diff) / t;
        sq_rel += diff * diff / t;
        sq += diff * diff;
        const double lp = std::log(std::clamp(p, d_min, d_max));
        log_sq += (std::log(t) - lp) * (std::log(t) - lp);
        ++valid;
    }
    if (valid == 0) throw DataError("depth metrics need at least one pixel with gt > 0");
    MetricReport r;
    r.abs_rel = abs_rel / static_cast<double>(valid);
    r.sq_rel = sq_rel / static_cast<double>(valid);
    r.rmse = std::sqrt(sq / static_cast<double>(valid));
    r.log_rmse = std::sqrt(log_sq / static_cast<double>(valid));
    r.n_images = 1;
    return r;
}

// Pixel accuracy and mean IoU.  Pixels whose ground truth is `ignore` are
// excluded everywhere; the IoU mean runs over classes present in the ground
// truth or the prediction (absent classes are not averaged in).
inline MetricReport segmentation_metrics(const Tensor<int32_t>& pred, const Tensor<int32_t>& gt,
                                         int32_t classes, int32_t ignore = -1) {
    require_shape(pred, gt.shape, "segmentation metric inputs");
    if (classes < 1) throw ConfigError("segmentation metrics need at least one class");
    std::vector<int64_t> tp(static_cast<size_t>(classes), 0);
    std::vector<int64_t> in_pred(static_cast<size_t>(classes), 0);
    std::vector<int64_t> in_gt(static_cast<size_t>(classes), 0);
    int64_t valid = 0, correct = 0;
    for (int64_t i = 0; i < gt.numel(); ++i) {
        const int32_t t = gt[i], p = pred[i];
        if (p != ignore && (p < 0 || p >= classes))
            throw DataError("predicted label " + std::to_string(p) + " at pixel " +
                            std::to_string(i) + " is outside [0," + std::to_string(classes) + ")");
        if (t == ignore) continue;
        if (t < 0 || t >= classes)
            throw DataError("ground-truth label " + std::to_string(t) + " at pixel " +
                            std::to_string(i) + " is outside [0," + std::to_string(classes) + ")");
        ++valid;
        ++in_gt[static_cast<size_t>(t)];
        if (p != ignore) ++in_pred[static_cast<size_t>(p)];
        if (p == t) {
            ++correct;
            ++tp[static_cast<size_t>(t)];
        }
    }
    if (valid == 0) throw DataError("segmentation metrics need at least one non-ignored pixel");

    double iou_sum = 0;
    int present = 0;
    for (int32_t c = 0; c < classes; ++c) {
        const int64_t uni = in_gt[static_cast<size_t>(c)] + in_pred[static_cast<size_t>(c)] -
                            tp[static_cast<size_t>(c)];
        if (uni == 0) continue;  // class absent from both maps
        iou_sum += static_cast<double>(tp[static_cast<size_t>(c)]) / static_cast<double>(uni);
        ++present;
    }
    MetricReport r;
    r.miou = iou_sum / static_cast<double>(present);
    r.pixel_accuracy = static_cast<double>(correct) / static_cast<double>(valid);
    r.n_images = 1;
    return r;
}

inline MetricReport aggregate(const std::vector<MetricReport>& per_image) {
    if (per_image.empty()) throw DataError("cannot aggregate an empty report list");
    MetricReport out;
    for (const auto& r : per_image) {
        out.abs_rel += r.abs_rel;
        out.sq_rel += r.sq_rel;
        out.rmse += r.rmse;
        out.log_rmse += r.log_rmse;
        out.miou += r.miou;
        out.pixel_accuracy += r.pixel_accuracy;
        out.n_images += r.n_images;
    }
    const double n = static_cast<double>(per_image.size());
    out.abs_rel /= n;
    out.sq_rel /= n;
    out.rmse /= n;
    out.log_rmse /= n;
    out.miou /= n;
    out.pixel_accuracy /= n;
    return out;
}

// --- resize protocol ----------------------------------------------------------

// (C,H,W) -> (C,oh,ow), half-pixel-centered sampling with edge clamping
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, int64_t oh, int64_t ow) {
    if (x.shape.size() != 3) throw ShapeError("resize_bilinear expects a (C,H,W) tensor");
    const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (oh < 1 || ow < 1) throw ConfigError("resize target must be positive");
    if (oh == h && ow == w) return x;
    Tensor<T> out(Shape{c, oh, ow});
    const double sy = static_cast<double>(h) / static_cast<double>(oh);
    const double sx = static_cast<double>(w) / static_cast<double>(ow);
    for (int64_t y = 0; y < oh; ++y) {
        const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                     static_cast<double>(h - 1));
        const int64_t y0 = static_cast<int64_t>(fy), y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - static_cast<double>(y0);
        for (int64_t xo = 0; xo < ow; ++xo) {
            const double fx = std::clamp((static_cast<double>(xo) + 0.5) * sx - 0.5, 0.0,
                                         static_cast<double>(w - 1));
            const int64_t x0 = static_cast<int64_t>(fx), x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - static_cast<double>(x0);
            for (int64_t ch = 0; ch < c; ++ch) {
                const double a = static_cast<double>(x[(ch * h + y0) * w + x0]);
                const double b = static_cast<double>(x[(ch * h + y0) * w + x1]);
                const double d = static_cast<double>(x[(ch * h + y1) * w + x0]);
                const double e = static_cast<double>(x[(ch * h + y1) * w + x1]);
                out[(ch * oh + y) * ow + xo] = static_cast<T>(
                    (a * (1 - wx) + b * wx) * (1 - wy) + (d * (1 - wx) + e * wx) * wy);
            }
        }
    }
    return out;
}

// (H,W) integer map -> (oh,ow), nearest sample so labels stay valid ids
inline Tensor<int32_t> resize_nearest(const Tensor<int32_t>& x, int64_t oh, int64_t ow) {
    if (x.shape.size() != 2) throw ShapeError("resize_nearest expects a (H,W) tensor");
    const int64_t h = x.dim(0), w = x.dim(1);
    if (oh < 1 || ow < 1) throw ConfigError("resize target must be positive");
    if (oh == h && ow == w) return x;
    Tensor<int32_t> out(Shape{oh, ow});
    for (int64_t y = 0; y < oh; ++y) {
        const int64_t sy = std::min<int64_t>(
            static_cast<int64_t>((static_cast<double>(y) + 0.5) * static_cast<double>(h) /
                                 static_cast<double>(oh)),
            h - 1);
        for (int64_t xo = 0; xo < ow; ++xo) {
            const int64_t sx = std::min<int64_t>(
                static_cast<int64_t>((static_cast<double>(xo) + 0.5) * static_cast<double>(w) /
                                     static_cast<double>(ow)),
                w - 1);
            out[y * ow + xo] = x[sy * w + sx];
        }
    }
    return out;
}

// --- whole-dataset evaluation ---------------------------------------------------

enum class Task { depth, seg };

inline const char* task_tag(Task t) { return t == Task::depth ? "depth" : "seg"; }

namespace detail {

// mean-mode inference through one head
template <typename T>
Tensor<T> infer_head(const ModelBundle<T>& m, const Tensor<T>& x, Domain d, Head head) {
    Graph<T> g;
    ModelForward<T> f(g, m);
    LatentVars lat = f.encode(g.leaf(x), d, Mode::mean, nullptr);
    return g.val(f.decode(lat.z, head));
}

inline Tensor<int32_t> argmax_labels(const auto& logits /*(1,C,H,W)*/) {
    const int64_t c = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
    Tensor<int32_t> out(Shape{h, w});
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            int32_t best = 0;
            auto best_v = logits[(0 * h + y) * w + x];
            for (int64_t k = 1; k < c; ++k) {
                const auto v = logits[(k * h + y) * w + x];
                if (v > best_v) best_v = v, best = static_cast<int32_t>(k);
            }
            out[y * w + x] = best;
        }
    return out;
}

}  // namespace detail

// Mean-mode inference over a dataset split, resize, per-image metrics, mean.
// `resize` of 0 compares at the ground truth's native size.
template <typename T>
MetricReport evaluate_model(const ModelBundle<T>& model, const DirectoryDataset<T>& ds, Task task,
                            Domain domain = Domain::real, int64_t resize = 0,
                            int64_t max_images = -1) {
    const int64_t n = max_images < 0 ? ds.count(domain) : std::min(max_images, ds.count(domain));
    if (n < 1) throw DataError("no " + std::string(domain == Domain::real ? "real" : "sim") +
                               " images to evaluate in '" + ds.root() + "'");
    const int64_t ms = model.arch.image_size;
    std::vector<MetricReport> per_image;
    for (int64_t i = 0; i < n; ++i) {
        const auto s = ds.load(domain, i);
        Tensor<T> x = s.rgb;
        if (x.dim(1) != ms || x.dim(2) != ms) x = resize_bilinear(x, ms, ms);
        Tensor<T> input(Shape{1, 3, ms, ms});
        input.data = x.data;

        if (task == Task::depth) {
            if (s.depth.numel() == 0)
                throw DataError("sample " + std::to_string(i) + " of '" + ds.root() +
                                "' has no depth ground truth");
            Tensor<T> out = detail::infer_head(model, input, domain, Head::depth);
            Tensor<T> pred(Shape{1, out.dim(2), out.dim(3)});
            pred.data = out.data;
            pred = denormalize_depth(pred, ds.meta().d_min, ds.meta().d_max);
            const int64_t th = resize > 0 ? resize : s.depth.dim(1);
            const int64_t tw = resize > 0 ? resize : s.depth.dim(2);
            pred = resize_bilinear(pred, th, tw);
            Tensor<T> gt = resize_bilinear(s.depth, th, tw);
            per_image.push_back(depth_metrics(pred, gt, ds.meta().d_min, ds.meta().d_max));
        } else {
            if (s.labels.numel() == 0)
                throw DataError("sample " + std::to_string(i) + " of '" + ds.root() +
                                "' has no segmentation ground truth");
            Tensor<T> logits = detail::infer_head(model, input, domain, Head::seg);
            Tensor<int32_t> pred = detail::argmax_labels(logits);
            const int64_t th = resize > 0 ? resize : s.labels.dim(0);
            const int64_t tw = resize > 0 ? resize : s.labels.dim(1);
            pred = resize_nearest(pred, th, tw);
            Tensor<int32_t> gt = resize_nearest(s.labels, th, tw);
            per_image.push_back(
                segmentation_metrics(pred, gt, static_cast<int32_t>(model.arch.seg_classes)));
        }
    }
    return aggregate(per_image);
}

}  // namespace lb
