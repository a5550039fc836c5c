#pragma once

#include <string>
#include <vector>

#include "latentbridge/common.hpp"

// Network shape description. The reference network is a mirror-symmetric
// encoder/decoder pair: a stem convolution, a chain of packing stages (each
// halves H and W), a pair of constant-shape residual rows before the last
// packing stage, and a latent head; decoders run the mirror image. Presets
// scale the same topology down for fast tests.

namespace lb {

// Every packing/unpacking stage resamples by this spatial factor.
inline constexpr int kPackFactor = 2;

struct ArchConfig {
    int image_size = 256;
    int image_channels = 3;
    int stem_channels = 64;
    // output channels of each packing stage, in encoder order; the residual
    // rows sit between the second-to-last and last stage
    std::vector<int> pack_channels = {76, 88, 100, 128, 200, 250};
    int res_rows = 2;
    int latent_channels = 300;
    int seg_classes = 15;
    int stem_kernel = 7;  // first encoder / last decoder convolution
    int kernel = 3;       // everything else
    double logvar_clamp = 10.0;
    // how many trailing encoder rows / leading decoder rows the two domains
    // share (1 = the latent rows only; the mu/logvar heads are always shared)
    int shared_enc_rows = 1;
    int shared_dec_rows = 1;
    bool residual = true;     // additive skip on the double-conv rows
    bool use_norm = true;     // disable for identity-configured toy models
    bool output_tanh = true;  // rgb/depth heads bound outputs to [-1,1]

    int downsample() const { return 1 << static_cast<int>(pack_channels.size()); }
    int latent_hw() const { return image_size / downsample(); }

    void validate() const {
        if (pack_channels.size() < 2)
            throw ConfigError("arch: at least two packing stages required");
        if (image_size % downsample() != 0 || latent_hw() < 1)
            throw ConfigError("arch: image size " + std::to_string(image_size) +
                              " not divisible by total downsample factor " +
                              std::to_string(downsample()));
        if (stem_kernel % 2 == 0 || kernel % 2 == 0)
            throw ConfigError("arch: kernels must be odd");
        if (image_channels < 1 || stem_channels < 1 || latent_channels < 1 || seg_classes < 2)
            throw ConfigError("arch: channel counts out of range");
        for (int c : pack_channels)
            if (c < 1) throw ConfigError("arch: pack channel out of range");
        const int enc_rows = 1 + static_cast<int>(pack_channels.size()) + res_rows + 1;
        if (shared_enc_rows < 1 || shared_enc_rows > enc_rows)
            throw ConfigError("arch: shared encoder rows out of range");
        if (shared_dec_rows < 1 || shared_dec_rows > enc_rows)
            throw ConfigError("arch: shared decoder rows out of range");
        if (res_rows < 0) throw ConfigError("arch: negative residual row count");
    }
};

// Named presets: the full-size reference network plus two desk-scale ones.
inline ArchConfig arch_preset(const std::string& name) {
    ArchConfig a;
    if (name == "paper-256") {
        // defaults above
    } else if (name == "desk-32") {
        a.image_size = 32;
        a.stem_channels = 6;
        a.pack_channels = {8, 12, 16};
        a.res_rows = 1;
        a.latent_channels = 24;
        a.seg_classes = 6;
    } else if (name == "desk-64") {
        a.image_size = 64;
        a.stem_channels = 6;
        a.pack_channels = {8, 12, 16, 20};
        a.res_rows = 1;
        a.latent_channels = 32;
        a.seg_classes = 6;
    } else {
        throw ConfigError("unknown arch preset '" + name +
                          "' (expected paper-256, desk-32, or desk-64)");
    }
    a.validate();
    return a;
}

// Flat per-layer schedule shared by the parameter builder and the forward
// pass, so names and channel counts can never drift apart.
struct LayerSpec {
    enum class Kind { conv, convt, pack, unpack, res };
    Kind kind;
    std::string name;
    int in_ch;
    int out_ch;
    int kernel;
};

inline std::vector<LayerSpec> encoder_layers(const ArchConfig& a) {
    std::vector<LayerSpec> out;
    const auto& p = a.pack_channels;
    const int m = static_cast<int>(p.size());
    out.push_back({LayerSpec::Kind::conv, "stem", a.image_channels, a.stem_channels,
                   a.stem_kernel});
    int prev = a.stem_channels;
    for (int i = 0; i + 1 < m; ++i) {
        out.push_back({LayerSpec::Kind::pack, "pack" + std::to_string(i), prev, p[size_t(i)],
                       a.kernel});
        prev = p[size_t(i)];
    }
    for (int r = 0; r < a.res_rows; ++r)
        out.push_back({LayerSpec::Kind::res, "res" + std::to_string(r), prev, prev, a.kernel});
    out.push_back({LayerSpec::Kind::pack, "pack" + std::to_string(m - 1), prev,
                   p[size_t(m - 1)], a.kernel});
    out.push_back({LayerSpec::Kind::conv, "latent", p[size_t(m - 1)], a.latent_channels,
                   a.kernel});
    return out;
}

inline std::vector<LayerSpec> decoder_layers(const ArchConfig& a, int out_channels) {
    std::vector<LayerSpec> out;
    const auto& p = a.pack_channels;
    const int m = static_cast<int>(p.size());
    out.push_back({LayerSpec::Kind::convt, "latent", a.latent_channels, p[size_t(m - 1)],
                   a.kernel});
    out.push_back({LayerSpec::Kind::unpack, "unpack0", p[size_t(m - 1)], p[size_t(m - 2)],
                   a.kernel});
    for (int r = 0; r < a.res_rows; ++r)
        out.push_back({LayerSpec::Kind::res, "res" + std::to_string(r), p[size_t(m - 2)],
                       p[size_t(m - 2)], a.kernel});
    int prev = p[size_t(m - 2)];
    int idx = 1;
    for (int i = m - 2; i >= 1; --i) {
        out.push_back({LayerSpec::Kind::unpack, "unpack" + std::to_string(idx++), prev,
                       p[size_t(i - 1)], a.kernel});
        prev = p[size_t(i - 1)];
    }
    out.push_back({LayerSpec::Kind::unpack, "unpack" + std::to_string(idx), prev,
                   a.stem_channels, a.kernel});
    out.push_back({LayerSpec::Kind::convt, "out", a.stem_channels, out_channels,
                   a.stem_kernel});
    return out;
}

}  // namespace lb
