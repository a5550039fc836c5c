#pragma once

// Twin autoencoder pair with a shared latent block.
//
// Two encoder/decoder pairs (one per visual domain) plus auxiliary decoders
// for depth and class maps.  The deepest encoder rows, the latent heads, and
// the earliest decoder rows are shared between the two domain pairs by
// aliasing parameter storage; auxiliary decoders own their full stacks.
//
// Parameters live in a ModelBundle as named shared tensors.  ModelForward
// binds each distinct storage buffer to exactly one graph leaf, so a shared
// parameter accumulates gradient from every path that touches it.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "latentbridge/arch.hpp"
#include "latentbridge/common.hpp"
#include "latentbridge/graph.hpp"
#include "latentbridge/ops.hpp"
#include "latentbridge/rng.hpp"
#include "latentbridge/tensor.hpp"

namespace lb {

enum class Domain { real, sim };
enum class Head { real, sim, depth, seg };
enum class Mode { sample, mean };

inline const char* domain_tag(Domain d) { return d == Domain::real ? "r" : "s"; }

inline Head head_of(Domain d) { return d == Domain::real ? Head::real : Head::sim; }

template <typename T>
struct ModelBundle {
    ArchConfig arch;
    // Canonical parameter names in creation order; aliases are not listed.
    std::vector<std::string> order;
    // Name -> storage.  Contains canonical names and aliases; an alias maps
    // to the same shared_ptr as its canonical entry.
    std::unordered_map<std::string, std::shared_ptr<Tensor<T>>> params;
    // (alias, canonical) pairs describing the sharing pattern.
    std::vector<std::pair<std::string, std::string>> sharing;
    // Storage pointer -> canonical name.
    std::unordered_map<const void*, std::string> canonical_by_ptr;

    Tensor<T>& at(const std::string& name) {
        auto it = params.find(name);
        if (it == params.end()) throw ConfigError("unknown parameter: " + name);
        return *it->second;
    }
    const Tensor<T>& at(const std::string& name) const {
        auto it = params.find(name);
        if (it == params.end()) throw ConfigError("unknown parameter: " + name);
        return *it->second;
    }

    const std::string& canonical_name(const void* storage) const {
        auto it = canonical_by_ptr.find(storage);
        if (it == canonical_by_ptr.end()) throw ConfigError("storage is not a model parameter");
        return it->second;
    }

    // Prefix before the first '/': enc_r, enc_s, dec_r, dec_s, dec_depth,
    // dec_seg, or shared.
    static std::string group_of(const std::string& name) {
        auto pos = name.find('/');
        return pos == std::string::npos ? name : name.substr(0, pos);
    }

    int64_t param_count() const {
        int64_t n = 0;
        for (const auto& name : order) n += params.at(name)->numel();
        return n;
    }

    template <typename U>
    ModelBundle<U> cast() const {
        ModelBundle<U> out;
        out.arch = arch;
        out.order = order;
        out.sharing = sharing;
        for (const auto& name : order) {
            auto p = std::make_shared<Tensor<U>>(params.at(name)->template cast<U>());
            out.params.emplace(name, p);
            out.canonical_by_ptr.emplace(p.get(), name);
        }
        for (const auto& [alias, canon] : sharing) out.params.emplace(alias, out.params.at(canon));
        return out;
    }
};

namespace detail {

// Leaf names for one layer's parameters: (suffix, shape, init as weight).
struct ParamLeaf {
    std::string suffix;
    Shape shape;
    bool is_weight;
};

inline std::vector<ParamLeaf> layer_leaves(const LayerSpec& spec) {
    const int64_t k = spec.kernel;
    const int64_t r2 = kPackFactor * kPackFactor;
    switch (spec.kind) {
        case LayerSpec::Kind::conv:
            return {{"w", {spec.out_ch, spec.in_ch, k, k}, true}, {"b", {spec.out_ch}, false}};
        case LayerSpec::Kind::convt:
            return {{"w", {spec.in_ch, spec.out_ch, k, k}, true}, {"b", {spec.out_ch}, false}};
        case LayerSpec::Kind::pack:
            return {{"w3", {r2, k, k}, true},
                    {"b3", {1}, false},
                    {"w", {spec.out_ch, spec.in_ch * r2, k, k}, true},
                    {"b", {spec.out_ch}, false}};
        case LayerSpec::Kind::unpack:
            return {{"w", {spec.out_ch * r2, spec.in_ch, k, k}, true},
                    {"b", {spec.out_ch * r2}, false},
                    {"w3", {r2, k, k}, true},
                    {"b3", {1}, false}};
        case LayerSpec::Kind::res:
            return {{"wa", {spec.out_ch, spec.in_ch, k, k}, true},
                    {"ba", {spec.out_ch}, false},
                    {"wb", {spec.out_ch, spec.in_ch, k, k}, true},
                    {"bb", {spec.out_ch}, false}};
    }
    throw ConfigError("unknown layer kind");
}

template <typename T>
void add_param(ModelBundle<T>& m, const std::string& name, const Shape& shape, bool is_weight,
               uint64_t seed) {
    std::shared_ptr<Tensor<T>> p;
    if (is_weight) {
        const uint64_t s = derive_seed(seed, {fnv1a(name)});
        p = std::make_shared<Tensor<T>>(Tensor<T>::gaussian(shape, s, T(0), T(0.02)));
    } else {
        p = std::make_shared<Tensor<T>>(Tensor<T>::zeros(shape));
    }
    m.order.push_back(name);
    m.params.emplace(name, p);
    m.canonical_by_ptr.emplace(p.get(), name);
}

template <typename T>
void add_alias(ModelBundle<T>& m, const std::string& alias, const std::string& canonical) {
    m.params.emplace(alias, m.params.at(canonical));
    m.sharing.emplace_back(alias, canonical);
}

template <typename T>
void add_layer(ModelBundle<T>& m, const std::string& prefix, const LayerSpec& spec,
               uint64_t seed) {
    for (const auto& leaf : layer_leaves(spec))
        add_param(m, prefix + "/" + spec.name + "/" + leaf.suffix, leaf.shape, leaf.is_weight,
                  seed);
}

template <typename T>
void alias_layer(ModelBundle<T>& m, const std::string& alias_prefix,
                 const std::string& canonical_prefix, const LayerSpec& spec) {
    for (const auto& leaf : layer_leaves(spec))
        add_alias(m, alias_prefix + "/" + spec.name + "/" + leaf.suffix,
                  canonical_prefix + "/" + spec.name + "/" + leaf.suffix);
}

// Latent heads hang off the encoder output and are always shared.
inline std::vector<LayerSpec> latent_head_layers(const ArchConfig& a) {
    return {{LayerSpec::Kind::conv, "mu", a.latent_channels, a.latent_channels, 1},
            {LayerSpec::Kind::conv, "logvar", a.latent_channels, a.latent_channels, 1}};
}

}  // namespace detail

// Number of trailing encoder layers (and latent heads) plus leading decoder
// layers whose parameters are shared between the two domain pairs.
template <typename T>
ModelBundle<T> build_model(const ArchConfig& arch, uint64_t seed) {
    arch.validate();
    ModelBundle<T> m;
    m.arch = arch;

    const auto enc = encoder_layers(arch);
    const auto heads = detail::latent_head_layers(arch);
    const size_t enc_shared_from = enc.size() - static_cast<size_t>(arch.shared_enc_rows);

    // Encoders: domain-owned rows, then canonical shared rows (created once,
    // aliased from both domain prefixes).
    for (const char* d : {"r", "s"}) {
        const std::string prefix = std::string("enc_") + d;
        for (size_t i = 0; i < enc_shared_from; ++i)
            detail::add_layer(m, prefix, enc[i], seed);
    }
    for (size_t i = enc_shared_from; i < enc.size(); ++i)
        detail::add_layer(m, "shared/enc", enc[i], seed);
    for (const auto& h : heads) detail::add_layer(m, "shared/enc", h, seed);
    for (const char* d : {"r", "s"}) {
        const std::string prefix = std::string("enc_") + d;
        for (size_t i = enc_shared_from; i < enc.size(); ++i)
            detail::alias_layer(m, prefix, "shared/enc", enc[i]);
        for (const auto& h : heads) detail::alias_layer(m, prefix, "shared/enc", h);
    }

    // Domain decoders: canonical shared leading rows, then owned rows.
    const auto dec_rgb = decoder_layers(arch, arch.image_channels);
    const size_t dec_shared_to = static_cast<size_t>(arch.shared_dec_rows);
    for (size_t i = 0; i < dec_shared_to; ++i)
        detail::add_layer(m, "shared/dec", dec_rgb[i], seed);
    for (const char* d : {"r", "s"}) {
        const std::string prefix = std::string("dec_") + d;
        for (size_t i = 0; i < dec_shared_to; ++i)
            detail::alias_layer(m, prefix, "shared/dec", dec_rgb[i]);
        for (size_t i = dec_shared_to; i < dec_rgb.size(); ++i)
            detail::add_layer(m, prefix, dec_rgb[i], seed);
    }

    // Auxiliary decoders share nothing: full owned stacks.
    for (const auto& [prefix, out_ch] :
         std::vector<std::pair<std::string, int64_t>>{{"dec_depth", 1},
                                                      {"dec_seg", arch.seg_classes}}) {
        for (const auto& spec : decoder_layers(arch, out_ch))
            detail::add_layer(m, prefix, spec, seed);
    }
    return m;
}

template <typename T>
struct LatentCode {
    Tensor<T> mu;
    Tensor<T> logvar;
    Tensor<T> z;
};

// Latent code as graph variables; valid while the graph that produced it
// lives.
struct LatentVars {
    Var mu;
    Var logvar;
    Var z;
};

// Per-layer output taps for shape inspection: (layer name, output shape).
using ShapeTrace = std::vector<std::pair<std::string, Shape>>;

// Predicate over canonical parameter names; parameters it rejects become
// non-differentiable leaves (frozen).
using TrainablePred = std::function<bool(const std::string&)>;

template <typename T>
class ModelForward {
  public:
    ModelForward(Graph<T>& g, const ModelBundle<T>& m, TrainablePred trainable = {})
        : g_(g), m_(m), trainable_(std::move(trainable)) {}

    // One graph leaf per distinct storage buffer, so aliased parameters
    // accumulate gradient from every use.
    Var bind(const std::string& name) {
        const auto& p = m_.params.at(name);
        auto it = leaf_by_ptr_.find(p.get());
        if (it != leaf_by_ptr_.end()) return it->second;
        const std::string& canon = m_.canonical_name(p.get());
        const bool rg = trainable_ ? trainable_(canon) : true;
        Var v = g_.leaf(*p, rg);
        leaf_by_ptr_.emplace(p.get(), v);
        bound_.emplace(canon, v);
        return v;
    }

    // Canonical name -> bound leaf, for gradient readout after backward().
    const std::map<std::string, Var>& bound() const { return bound_; }

    LatentVars encode(Var x, Domain d, Mode mode, Rng* rng, ShapeTrace* trace = nullptr) {
        const auto& a = m_.arch;
        const std::string prefix = std::string("enc_") + domain_tag(d);
        Var h = x;
        for (const auto& spec : encoder_layers(a)) h = run_layer(h, prefix, spec, trace);

        Var mu = ops::conv2d(g_, h, bind(prefix + "/mu/w"), bind(prefix + "/mu/b"));
        Var logvar = ops::conv2d(g_, h, bind(prefix + "/logvar/w"), bind(prefix + "/logvar/b"));
        logvar = ops::clamp(g_, logvar, T(-a.logvar_clamp), T(a.logvar_clamp));
        if (trace) trace->emplace_back(prefix + "/mu", g_.val(mu).shape);

        Var z;
        if (mode == Mode::sample) {
            if (!rng) throw ConfigError("sampling mode requires a random stream");
            Tensor<T> eps = draw_gaussian<T>(*rng, g_.val(mu).shape);
            z = ops::gauss_sample(g_, mu, logvar, eps);
        } else {
            z = mu;
        }
        return {mu, logvar, z};
    }

    Var decode(Var z, Head head, ShapeTrace* trace = nullptr) {
        const auto& a = m_.arch;
        std::string prefix;
        int64_t out_ch = a.image_channels;
        switch (head) {
            case Head::real: prefix = "dec_r"; break;
            case Head::sim: prefix = "dec_s"; break;
            case Head::depth: prefix = "dec_depth"; out_ch = 1; break;
            case Head::seg: prefix = "dec_seg"; out_ch = a.seg_classes; break;
        }
        Var h = z;
        for (const auto& spec : decoder_layers(a, out_ch))
            h = run_layer(h, prefix, spec, trace, head);
        return h;
    }

  private:
    Var run_layer(Var h, const std::string& prefix, const LayerSpec& spec, ShapeTrace* trace,
                  Head head = Head::real) {
        const auto& a = m_.arch;
        const Norm norm = a.use_norm ? Norm::instance : Norm::none;
        const Norm latent_norm = a.use_norm ? Norm::batch : Norm::none;
        const std::string base = prefix + "/" + spec.name + "/";
        switch (spec.kind) {
            case LayerSpec::Kind::conv: {
                h = ops::conv2d(g_, h, bind(base + "w"), bind(base + "b"));
                if (spec.name == "stem") {
                    h = ops::leaky_relu(g_, h, T(kLeakySlope));
                } else {  // latent row
                    h = ops::norm_layer(g_, h, latent_norm);
                    h = ops::relu(g_, h);
                }
                break;
            }
            case LayerSpec::Kind::convt: {
                h = ops::conv_transpose2d(g_, h, bind(base + "w"), bind(base + "b"));
                if (spec.name == "latent") {
                    h = ops::norm_layer(g_, h, latent_norm);
                    h = ops::relu(g_, h);
                } else if (a.output_tanh && head != Head::seg) {  // image output row
                    h = ops::tanh_act(g_, h);
                }
                break;
            }
            case LayerSpec::Kind::pack: {
                PackParams p{bind(base + "w3"), bind(base + "b3"), bind(base + "w"),
                             bind(base + "b")};
                LayerConfig cfg;
                cfg.kernel_size = static_cast<int>(spec.kernel);
                cfg.in_channels = spec.in_ch;
                cfg.out_channels = spec.out_ch;
                cfg.norm = norm;
                cfg.activation = Act::relu;
                cfg.pack_factor = kPackFactor;
                h = pack_layer(g_, h, p, cfg);
                break;
            }
            case LayerSpec::Kind::unpack: {
                PackParams p{bind(base + "w3"), bind(base + "b3"), bind(base + "w"),
                             bind(base + "b")};
                LayerConfig cfg;
                cfg.kernel_size = static_cast<int>(spec.kernel);
                cfg.in_channels = spec.in_ch;
                cfg.out_channels = spec.out_ch;
                cfg.norm = norm;
                cfg.activation = Act::relu;
                cfg.pack_factor = kPackFactor;
                h = unpack_layer(g_, h, p, cfg);
                break;
            }
            case LayerSpec::Kind::res: {
                Var t = ops::conv2d(g_, h, bind(base + "wa"), bind(base + "ba"));
                t = ops::norm_layer(g_, t, norm);
                t = ops::relu(g_, t);
                t = ops::conv2d(g_, t, bind(base + "wb"), bind(base + "bb"));
                t = ops::norm_layer(g_, t, norm);
                h = a.residual ? ops::add(g_, h, t) : t;
                break;
            }
        }
        if (trace) trace->emplace_back(prefix + "/" + spec.name, g_.val(h).shape);
        return h;
    }

    Graph<T>& g_;
    const ModelBundle<T>& m_;
    TrainablePred trainable_;
    std::unordered_map<const void*, Var> leaf_by_ptr_;
    std::map<std::string, Var> bound_;
};

// --- eager wrappers -------------------------------------------------------

template <typename T>
LatentCode<T> encode(const ModelBundle<T>& m, const Tensor<T>& x, Domain d, Mode mode,
                     uint64_t seed = 0) {
    Graph<T> g;
    ModelForward<T> f(g, m);
    Rng rng(seed);
    LatentVars lat = f.encode(g.leaf(x), d, mode, &rng);
    return {g.val(lat.mu), g.val(lat.logvar), g.val(lat.z)};
}

template <typename T>
Tensor<T> decode(const ModelBundle<T>& m, const Tensor<T>& z, Head head) {
    Graph<T> g;
    ModelForward<T> f(g, m);
    return g.val(f.decode(g.leaf(z), head));
}

// Encode in one domain, decode through the other domain's image head.
template <typename T>
Tensor<T> cross_domain(const ModelBundle<T>& m, const Tensor<T>& x, Domain from, Domain to,
                       Mode mode, uint64_t seed = 0) {
    Graph<T> g;
    ModelForward<T> f(g, m);
    Rng rng(seed);
    LatentVars lat = f.encode(g.leaf(x), from, mode, &rng);
    return g.val(f.decode(lat.z, head_of(to)));
}

}  // namespace lb
