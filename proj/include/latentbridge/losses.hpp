#pragma once

// Training objectives: VAE terms (KL to the standard-normal prior, Gaussian
// reconstruction likelihood), reconstruction MSE, batch MMD against prior or
// cross-domain latents, L1 cycle consistency, pixel-wise cross entropy, and
// the three stage totals that wire them to the twin-network forward paths.
//
// All primitives exist at graph level (differentiable) and as eager tensor
// overloads returning doubles.  Stage totals consume randomness in a fixed,
// documented order so runs are reproducible from a single seed.

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "latentbridge/model.hpp"
#include "latentbridge/ops.hpp"

namespace lb {

// Gaussian kernel k(x,y) = exp(-|x-y|^2 / (2 sigma^2)).  sigma <= 0 selects
// the default bandwidth sqrt(D/2) for D-dimensional vectors, which makes the
// exponent -|x-y|^2 / D.
struct MmdKernel {
    double sigma = 0.0;
    double bandwidth(int64_t dim) const {
        if (sigma > 0) return sigma;
        return std::sqrt(static_cast<double>(dim) / 2.0);
    }
};

struct LossOptions {
    MmdKernel kernel;
    // MMD compares flattened posterior means by default; true switches to the
    // sampled latents.
    bool mmd_on_sample = false;
    // Treat generated cross-domain images as pseudo-data: block gradients
    // from flowing back through the generator that produced them.
    bool stop_pseudo_grad = true;
    // sample = reparameterized draws in every forward pass (training);
    // mean = deterministic paths (useful for analysis and exact symmetry).
    Mode mode = Mode::sample;
    // Per-term scale factors; missing names default to 1.  Reported fields
    // store the scaled contributions, so total == sum(fields) always holds.
    std::map<std::string, double> weights;

    double weight_of(const std::string& name) const {
        auto it = weights.find(name);
        return it == weights.end() ? 1.0 : it->second;
    }
};

// Ordered named scalars plus their sum.  Field order is fixed per stage so
// logs and tests can rely on it.
struct LossReport {
    std::vector<std::pair<std::string, double>> terms;
    double total = 0.0;

    double term(const std::string& name) const {
        for (const auto& [k, v] : terms)
            if (k == name) return v;
        throw ConfigError("loss report has no term '" + name + "'");
    }
    std::optional<std::string> first_non_finite() const {
        for (const auto& [k, v] : terms)
            if (!std::isfinite(v)) return k;
        if (!std::isfinite(total)) return std::string("total");
        return std::nullopt;
    }
    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, v] : terms) j[k] = v;
        j["total"] = total;
        return j;
    }
};

namespace loss {

// --- primitives -------------------------------------------------------

// Sum over non-batch elements of 0.5 (mu^2 + e^logvar - 1 - logvar),
// averaged over the leading (batch) dimension.
template <typename T>
Var kl_to_standard_normal(Graph<T>& g, Var mu, Var logvar) {
    const Tensor<T>& m = g.val(mu);
    const Tensor<T>& lv = g.val(logvar);
    require_shape(lv, m.shape, "kl_to_standard_normal");
    if (!m.all_finite() || !lv.all_finite())
        throw NumericError("kl_to_standard_normal: non-finite input");
    const T batch = static_cast<T>(m.ndim() >= 1 ? m.dim(0) : 1);
    T acc = 0;
    for (int64_t i = 0; i < m.numel(); ++i)
        acc += T(0.5) * (m[i] * m[i] + std::exp(lv[i]) - T(1) - lv[i]);
    Tensor<T> y({1});
    y[0] = acc / batch;
    auto bw = [mu, logvar, batch](Graph<T>& gg, int self) {
        const T go = gg.grad_buf(self)[0];
        const Tensor<T>& mv = gg.val(mu);
        const Tensor<T>& lvv = gg.val(logvar);
        if (gg.requires_grad(mu)) {
            Tensor<T>& dm = gg.grad_buf(mu.id);
            for (int64_t i = 0; i < mv.numel(); ++i) dm[i] += go * mv[i] / batch;
        }
        if (gg.requires_grad(logvar)) {
            Tensor<T>& dl = gg.grad_buf(logvar.id);
            for (int64_t i = 0; i < lvv.numel(); ++i)
                dl[i] += go * (std::exp(lvv[i]) - T(1)) / (T(2) * batch);
        }
    };
    return g.make(std::move(y), g.requires_grad(mu) || g.requires_grad(logvar), bw,
                  "kl_to_standard_normal");
}

// Mean over elements of the squared difference.
template <typename T>
Var recon_mse(Graph<T>& g, Var x, Var recon) {
    const Tensor<T>& a = g.val(x);
    const Tensor<T>& b = g.val(recon);
    require_shape(b, a.shape, "recon_mse");
    const T n = static_cast<T>(a.numel());
    T acc = 0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        const T d = a[i] - b[i];
        acc += d * d;
    }
    Tensor<T> y({1});
    y[0] = acc / n;
    auto bw = [x, recon, n](Graph<T>& gg, int self) {
        const T go = gg.grad_buf(self)[0];
        const Tensor<T>& a = gg.val(x);
        const Tensor<T>& b = gg.val(recon);
        if (gg.requires_grad(x)) {
            Tensor<T>& dx = gg.grad_buf(x.id);
            for (int64_t i = 0; i < a.numel(); ++i) dx[i] += go * T(2) * (a[i] - b[i]) / n;
        }
        if (gg.requires_grad(recon)) {
            Tensor<T>& dr = gg.grad_buf(recon.id);
            for (int64_t i = 0; i < a.numel(); ++i) dr[i] -= go * T(2) * (a[i] - b[i]) / n;
        }
    };
    return g.make(std::move(y), g.requires_grad(x) || g.requires_grad(recon), bw, "recon_mse");
}

// Negative log-likelihood under a unit-variance Gaussian decoder, additive
// constant dropped: exactly half the MSE.
template <typename T>
Var gaussian_nll(Graph<T>& g, Var x, Var recon) {
    return ops::scale(g, recon_mse(g, x, recon), T(0.5));
}

// Mean absolute difference; subgradient 0 where the difference is 0.
template <typename T>
Var cycle_consistency(Graph<T>& g, Var x, Var cycled) {
    const Tensor<T>& a = g.val(x);
    const Tensor<T>& b = g.val(cycled);
    require_shape(b, a.shape, "cycle_consistency");
    const T n = static_cast<T>(a.numel());
    T acc = 0;
    for (int64_t i = 0; i < a.numel(); ++i) acc += std::abs(a[i] - b[i]);
    Tensor<T> y({1});
    y[0] = acc / n;
    auto bw = [x, cycled, n](Graph<T>& gg, int self) {
        const T go = gg.grad_buf(self)[0];
        const Tensor<T>& a = gg.val(x);
        const Tensor<T>& b = gg.val(cycled);
        auto sign = [](T v) { return v > 0 ? T(1) : (v < 0 ? T(-1) : T(0)); };
        if (gg.requires_grad(x)) {
            Tensor<T>& dx = gg.grad_buf(x.id);
            for (int64_t i = 0; i < a.numel(); ++i) dx[i] += go * sign(a[i] - b[i]) / n;
        }
        if (gg.requires_grad(cycled)) {
            Tensor<T>& dc = gg.grad_buf(cycled.id);
            for (int64_t i = 0; i < a.numel(); ++i) dc[i] -= go * sign(a[i] - b[i]) / n;
        }
    };
    return g.make(std::move(y), g.requires_grad(x) || g.requires_grad(cycled), bw,
                  "cycle_consistency");
}

// Biased V-statistic MMD^2 between two batches of row vectors (N,D)/(M,D):
// mean k(a,a') - 2 mean k(a,b) + mean k(b,b').  Zero when the batches are
// identical; always >= 0.
template <typename T>
Var mmd(Graph<T>& g, Var a, Var b, const MmdKernel& kernel = {}) {
    const Tensor<T>& av = g.val(a);
    const Tensor<T>& bv = g.val(b);
    if (av.ndim() != 2 || bv.ndim() != 2)
        throw ShapeError("mmd: expected (batch, dim) inputs, got " + shape_str(av.shape) +
                         " and " + shape_str(bv.shape));
    if (av.dim(1) != bv.dim(1))
        throw ShapeError("mmd: vector dimensions differ: " + shape_str(av.shape) + " vs " +
                         shape_str(bv.shape));
    if (av.dim(0) < 1 || bv.dim(0) < 1) throw ShapeError("mmd: empty batch");
    const int64_t n = av.dim(0), m = bv.dim(0), d = av.dim(1);
    const T sigma = static_cast<T>(kernel.bandwidth(d));
    const T inv2s2 = T(1) / (T(2) * sigma * sigma);

    auto kmat = [&](const Tensor<T>& p, const Tensor<T>& q, int64_t np, int64_t nq) {
        auto k = std::make_shared<std::vector<T>>(static_cast<size_t>(np * nq));
        for (int64_t i = 0; i < np; ++i)
            for (int64_t j = 0; j < nq; ++j) {
                T sq = 0;
                for (int64_t c = 0; c < d; ++c) {
                    const T diff = p[i * d + c] - q[j * d + c];
                    sq += diff * diff;
                }
                (*k)[static_cast<size_t>(i * nq + j)] = std::exp(-sq * inv2s2);
            }
        return k;
    };
    auto kaa = kmat(av, av, n, n);
    auto kab = kmat(av, bv, n, m);
    auto kbb = kmat(bv, bv, m, m);
    auto msum = [](const std::vector<T>& k) {
        T s = 0;
        for (T v : k) s += v;
        return s;
    };
    const T taa = msum(*kaa) / static_cast<T>(n * n);
    const T tab = T(2) * (msum(*kab) / static_cast<T>(n * m));
    const T tbb = msum(*kbb) / static_cast<T>(m * m);
    Tensor<T> y({1});
    y[0] = (taa - tab) + tbb;

    const T invs2 = T(1) / (sigma * sigma);
    auto bw = [a, b, kaa, kab, kbb, n, m, d, invs2](Graph<T>& gg, int self) {
        const T go = gg.grad_buf(self)[0];
        const Tensor<T>& av = gg.val(a);
        const Tensor<T>& bv = gg.val(b);
        if (gg.requires_grad(a)) {
            Tensor<T>& da = gg.grad_buf(a.id);
            for (int64_t i = 0; i < n; ++i)
                for (int64_t c = 0; c < d; ++c) {
                    T acc = 0;
                    for (int64_t j = 0; j < n; ++j)
                        acc += T(2) / static_cast<T>(n * n) *
                               (*kaa)[static_cast<size_t>(i * n + j)] *
                               (av[j * d + c] - av[i * d + c]);
                    for (int64_t j = 0; j < m; ++j)
                        acc -= T(2) / static_cast<T>(n * m) *
                               (*kab)[static_cast<size_t>(i * m + j)] *
                               (bv[j * d + c] - av[i * d + c]);
                    da[i * d + c] += go * acc * invs2;
                }
        }
        if (gg.requires_grad(b)) {
            Tensor<T>& db = gg.grad_buf(b.id);
            for (int64_t i = 0; i < m; ++i)
                for (int64_t c = 0; c < d; ++c) {
                    T acc = 0;
                    for (int64_t j = 0; j < m; ++j)
                        acc += T(2) / static_cast<T>(m * m) *
                               (*kbb)[static_cast<size_t>(i * m + j)] *
                               (bv[j * d + c] - bv[i * d + c]);
                    for (int64_t j = 0; j < n; ++j)
                        acc -= T(2) / static_cast<T>(n * m) *
                               (*kab)[static_cast<size_t>(j * m + i)] *
                               (av[j * d + c] - bv[i * d + c]);
                    db[i * d + c] += go * acc * invs2;
                }
        }
    };
    return g.make(std::move(y), g.requires_grad(a) || g.requires_grad(b), bw, "mmd");
}

// Mean over valid pixels of -log softmax(logits)[label].  Labels are (N,H,W)
// or (N,1,H,W) integer maps in [0, C); `ignore_index` pixels are excluded.
template <typename T>
Var pixelwise_cross_entropy(Graph<T>& g, Var logits, const Tensor<int32_t>& labels,
                            int32_t ignore_index = -1) {
    const Tensor<T>& lg = g.val(logits);
    ops::check4d(lg, "pixelwise_cross_entropy");
    const int64_t n = lg.dim(0), c = lg.dim(1), h = lg.dim(2), w = lg.dim(3);
    Shape expect3{n, h, w};
    Shape expect4{n, 1, h, w};
    if (labels.shape != expect3 && labels.shape != expect4)
        throw ShapeError("pixelwise_cross_entropy: labels " + shape_str(labels.shape) +
                         " do not match logits " + shape_str(lg.shape));

    const int64_t hw = h * w;
    int64_t valid = 0;
    T acc = 0;
    for (int64_t ni = 0; ni < n; ++ni)
        for (int64_t p = 0; p < hw; ++p) {
            const int32_t lab = labels[ni * hw + p];
            if (lab == ignore_index) continue;
            if (lab < 0 || lab >= c)
                throw DataError("pixelwise_cross_entropy: label " + std::to_string(lab) +
                                " outside [0," + std::to_string(c) + ") at sample " +
                                std::to_string(ni) + " pixel " + std::to_string(p));
            T mx = lg[(ni * c) * hw + p];
            for (int64_t ci = 1; ci < c; ++ci)
                mx = std::max(mx, lg[(ni * c + ci) * hw + p]);
            T lse = 0;
            for (int64_t ci = 0; ci < c; ++ci)
                lse += std::exp(lg[(ni * c + ci) * hw + p] - mx);
            lse = mx + std::log(lse);
            acc += lse - lg[(ni * c + lab) * hw + p];
            ++valid;
        }
    if (valid == 0) throw DataError("pixelwise_cross_entropy: no valid pixels");
    Tensor<T> y({1});
    y[0] = acc / static_cast<T>(valid);

    auto labs = std::make_shared<Tensor<int32_t>>(labels);
    auto bw = [logits, labs, ignore_index, valid](Graph<T>& gg, int self) {
        if (!gg.requires_grad(logits)) return;
        const T go = gg.grad_buf(self)[0];
        const Tensor<T>& lg = gg.val(logits);
        Tensor<T>& dl = gg.grad_buf(logits.id);
        const int64_t n = lg.dim(0), c = lg.dim(1), hw = lg.dim(2) * lg.dim(3);
        const T inv = T(1) / static_cast<T>(valid);
        for (int64_t ni = 0; ni < n; ++ni)
            for (int64_t p = 0; p < hw; ++p) {
                const int32_t lab = (*labs)[ni * hw + p];
                if (lab == ignore_index) continue;
                T mx = lg[(ni * c) * hw + p];
                for (int64_t ci = 1; ci < c; ++ci)
                    mx = std::max(mx, lg[(ni * c + ci) * hw + p]);
                T denom = 0;
                for (int64_t ci = 0; ci < c; ++ci)
                    denom += std::exp(lg[(ni * c + ci) * hw + p] - mx);
                for (int64_t ci = 0; ci < c; ++ci) {
                    const T soft = std::exp(lg[(ni * c + ci) * hw + p] - mx) / denom;
                    dl[(ni * c + ci) * hw + p] +=
                        go * (soft - (ci == lab ? T(1) : T(0))) * inv;
                }
            }
    };
    return g.make(std::move(y), g.requires_grad(logits), bw, "pixelwise_cross_entropy");
}

// --- eager overloads ----------------------------------------------------

template <typename T>
double kl_to_standard_normal(const Tensor<T>& mu, const Tensor<T>& logvar) {
    Graph<T> g;
    return static_cast<double>(g.scalar(kl_to_standard_normal(g, g.leaf(mu), g.leaf(logvar))));
}
template <typename T>
double recon_mse(const Tensor<T>& x, const Tensor<T>& recon) {
    Graph<T> g;
    return static_cast<double>(g.scalar(recon_mse(g, g.leaf(x), g.leaf(recon))));
}
template <typename T>
double gaussian_nll(const Tensor<T>& x, const Tensor<T>& recon) {
    Graph<T> g;
    return static_cast<double>(g.scalar(gaussian_nll(g, g.leaf(x), g.leaf(recon))));
}
template <typename T>
double cycle_consistency(const Tensor<T>& x, const Tensor<T>& cycled) {
    Graph<T> g;
    return static_cast<double>(g.scalar(cycle_consistency(g, g.leaf(x), g.leaf(cycled))));
}
template <typename T>
double mmd(const Tensor<T>& a, const Tensor<T>& b, const MmdKernel& kernel = {}) {
    Graph<T> g;
    return static_cast<double>(g.scalar(mmd(g, g.leaf(a), g.leaf(b), kernel)));
}
template <typename T>
double pixelwise_cross_entropy(const Tensor<T>& logits, const Tensor<int32_t>& labels,
                               int32_t ignore_index = -1) {
    Graph<T> g;
    return static_cast<double>(
        g.scalar(pixelwise_cross_entropy(g, g.leaf(logits), labels, ignore_index)));
}

// --- stage totals ---------------------------------------------------------

struct StageLoss {
    LossReport report;
    Var total;
};

namespace detail {

// Accumulate named scalar terms into a report plus a single graph total.
template <typename T>
StageLoss finish(Graph<T>& g, const std::vector<std::pair<std::string, Var>>& named,
                 const LossOptions& opt) {
    std::vector<Var> vars;
    std::vector<T> weights;
    LossReport rep;
    for (const auto& [name, v] : named) {
        const double w = opt.weight_of(name);
        vars.push_back(v);
        weights.push_back(static_cast<T>(w));
        rep.terms.emplace_back(name, static_cast<T>(w) * g.scalar(v));
    }
    Var total = ops::weighted_sum(g, vars, weights);
    rep.total = static_cast<double>(g.scalar(total));
    return {std::move(rep), total};
}

// Flattened (batch, dim) view of the latent code entering MMD.
template <typename T>
Var mmd_vec(Graph<T>& g, const LatentVars& lat, const LossOptions& opt) {
    Var v = opt.mmd_on_sample ? lat.z : lat.mu;
    const Shape& s = g.val(v).shape;
    return ops::reshape(g, v, {s[0], shape_numel(s) / s[0]});
}

}  // namespace detail

// Unpaired stage: within-domain VAE terms, latent-vs-prior MMD, and L1 cycle
// consistency through the opposite domain.
//
// Randomness order under `seed`: eps for the two input encodings (real, then
// sim), eps for the two cycle re-encodings (real path, then sim path), then
// one prior batch shared by both MMD terms.  Mean mode consumes only the
// prior batch.
template <typename T>
StageLoss stage1_terms(Graph<T>& g, ModelForward<T>& f, Var x_r, Var x_s, Rng& rng,
                       const LossOptions& opt = {}) {
    const Mode mode = opt.mode;
    LatentVars lat_r = f.encode(x_r, Domain::real, mode, &rng);
    LatentVars lat_s = f.encode(x_s, Domain::sim, mode, &rng);

    Var recon_r = f.decode(lat_r.z, Head::real);
    Var recon_s = f.decode(lat_s.z, Head::sim);

    // cycle: translate, re-encode (fresh eps), translate back
    Var fake_s = f.decode(lat_r.z, Head::sim);
    LatentVars lat_r_cycle = f.encode(fake_s, Domain::sim, mode, &rng);
    Var cycled_r = f.decode(lat_r_cycle.z, Head::real);

    Var fake_r = f.decode(lat_s.z, Head::real);
    LatentVars lat_s_cycle = f.encode(fake_r, Domain::real, mode, &rng);
    Var cycled_s = f.decode(lat_s_cycle.z, Head::sim);

    Var vec_r = detail::mmd_vec(g, lat_r, opt);
    Var vec_s = detail::mmd_vec(g, lat_s, opt);
    const Shape& vs = g.val(vec_r).shape;
    Var prior = g.leaf(draw_gaussian<T>(rng, vs), false);

    Var kl_r = ops::add(g, kl_to_standard_normal(g, lat_r.mu, lat_r.logvar),
                        gaussian_nll(g, x_r, recon_r));
    Var kl_s = ops::add(g, kl_to_standard_normal(g, lat_s.mu, lat_s.logvar),
                        gaussian_nll(g, x_s, recon_s));

    return detail::finish(g,
                          {{"kl_r", kl_r},
                           {"kl_s", kl_s},
                           {"mse_r", recon_mse(g, x_r, recon_r)},
                           {"mse_s", recon_mse(g, x_s, recon_s)},
                           {"mmd_r", mmd(g, vec_r, prior, opt.kernel)},
                           {"mmd_s", mmd(g, vec_s, prior, opt.kernel)},
                           {"cc_r", cycle_consistency(g, x_r, cycled_r)},
                           {"cc_s", cycle_consistency(g, x_s, cycled_s)},
                          },
                          opt);
}

namespace detail {

// Shared stage-2 plumbing: encode the paired sim image and the unpaired real
// image, translate each across domains, and re-encode the translations as
// pseudo-data.  Randomness order under `seed`: eps for encoding x_S, eps for
// re-encoding the translated real image, eps for encoding x_R, eps for
// re-encoding the translated sim image.  Mean mode consumes nothing.
template <typename T>
struct Stage2Paths {
    LatentVars lat_s;        // E_S(x_S)
    LatentVars lat_r;        // E_R(x_R)
    LatentVars lat_r_trans;  // E_R(translated x_S)
    LatentVars lat_s_trans;  // E_S(translated x_R)
    Var x_r_trans;
    Var x_s_trans;
};

template <typename T>
Stage2Paths<T> stage2_paths(Graph<T>& g, ModelForward<T>& f, Var x_s, Var x_r, Rng& rng,
                            const LossOptions& opt) {
    Stage2Paths<T> p;
    const Mode mode = opt.mode;
    p.lat_s = f.encode(x_s, Domain::sim, mode, &rng);
    p.x_r_trans = f.decode(p.lat_s.z, Head::real);
    if (opt.stop_pseudo_grad) p.x_r_trans = ops::detach(g, p.x_r_trans);
    p.lat_r_trans = f.encode(p.x_r_trans, Domain::real, mode, &rng);

    p.lat_r = f.encode(x_r, Domain::real, mode, &rng);
    p.x_s_trans = f.decode(p.lat_r.z, Head::sim);
    if (opt.stop_pseudo_grad) p.x_s_trans = ops::detach(g, p.x_s_trans);
    p.lat_s_trans = f.encode(p.x_s_trans, Domain::sim, mode, &rng);
    return p;
}

// The four stage-2 terms common to both supervised heads.
template <typename T>
std::vector<std::pair<std::string, Var>> stage2_common_terms(Graph<T>& g, ModelForward<T>& f,
                                                             Var x_s,
                                                             const Stage2Paths<T>& p,
                                                             const LossOptions& opt) {
    Var recon_r_trans = f.decode(p.lat_r_trans.z, Head::real);
    Var recon_s = f.decode(p.lat_s.z, Head::sim);
    Var kl_rd = ops::add(g, kl_to_standard_normal(g, p.lat_r_trans.mu, p.lat_r_trans.logvar),
                         gaussian_nll(g, p.x_r_trans, recon_r_trans));
    Var kl_sd = ops::add(g, kl_to_standard_normal(g, p.lat_s.mu, p.lat_s.logvar),
                         gaussian_nll(g, x_s, recon_s));
    Var mmd_sr = mmd(g, mmd_vec(g, p.lat_s, opt), mmd_vec(g, p.lat_r_trans, opt), opt.kernel);
    Var mmd_rs = mmd(g, mmd_vec(g, p.lat_s_trans, opt), mmd_vec(g, p.lat_r, opt), opt.kernel);
    return {{"kl_rd", kl_rd}, {"kl_sd", kl_sd}, {"mmd_sr", mmd_sr}, {"mmd_rs", mmd_rs}};
}

}  // namespace detail

// Paired depth stage: the common KL/MMD terms plus depth regressions from the
// paired sim latent and from the translated pseudo-real latent, both against
// the same target map (in the depth head's output coding).
template <typename T>
StageLoss stage2_depth_terms(Graph<T>& g, ModelForward<T>& f, Var x_s, Var d_t, Var x_r,
                             Rng& rng, const LossOptions& opt = {}) {
    auto p = detail::stage2_paths(g, f, x_s, x_r, rng, opt);
    auto named = detail::stage2_common_terms(g, f, x_s, p, opt);
    Var depth_s = f.decode(p.lat_s.z, Head::depth);
    Var depth_r = f.decode(p.lat_r_trans.z, Head::depth);
    named.emplace_back("mse_r_depth", recon_mse(g, d_t, depth_r));
    named.emplace_back("mse_s_depth", recon_mse(g, d_t, depth_s));
    return detail::finish(g, named, opt);
}

// Paired class-map stage: the common KL/MMD terms plus pixel-wise cross
// entropy from both latent paths against the same label map.
template <typename T>
StageLoss stage2_seg_terms(Graph<T>& g, ModelForward<T>& f, Var x_s,
                           const Tensor<int32_t>& seg_t, Var x_r, Rng& rng,
                           const LossOptions& opt = {}) {
    auto p = detail::stage2_paths(g, f, x_s, x_r, rng, opt);
    auto named = detail::stage2_common_terms(g, f, x_s, p, opt);
    Var logits_s = f.decode(p.lat_s.z, Head::seg);
    Var logits_r = f.decode(p.lat_r_trans.z, Head::seg);
    named.emplace_back("ce_s", pixelwise_cross_entropy(g, logits_s, seg_t));
    named.emplace_back("ce_r", pixelwise_cross_entropy(g, logits_r, seg_t));
    return detail::finish(g, named, opt);
}

// --- eager stage entry points ----------------------------------------------

template <typename T>
LossReport stage1_total(const ModelBundle<T>& m, const Tensor<T>& x_r, const Tensor<T>& x_s,
                        const LossOptions& opt = {}, uint64_t seed = 0) {
    Graph<T> g;
    ModelForward<T> f(g, m);
    Rng rng(seed);
    return stage1_terms(g, f, g.leaf(x_r), g.leaf(x_s), rng, opt).report;
}

template <typename T>
LossReport stage2_depth_total(const ModelBundle<T>& m, const Tensor<T>& x_s,
                              const Tensor<T>& d_t, const Tensor<T>& x_r,
                              const LossOptions& opt = {}, uint64_t seed = 0) {
    Graph<T> g;
    ModelForward<T> f(g, m);
    Rng rng(seed);
    return stage2_depth_terms(g, f, g.leaf(x_s), g.leaf(d_t), g.leaf(x_r), rng, opt).report;
}

template <typename T>
LossReport stage2_seg_total(const ModelBundle<T>& m, const Tensor<T>& x_s,
                            const Tensor<int32_t>& seg_t, const Tensor<T>& x_r,
                            const LossOptions& opt = {}, uint64_t seed = 0) {
    Graph<T> g;
    ModelForward<T> f(g, m);
    Rng rng(seed);
    return stage2_seg_terms(g, f, g.leaf(x_s), seg_t, g.leaf(x_r), rng, opt).report;
}

}  // namespace loss
}  // namespace lb
