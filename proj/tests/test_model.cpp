#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "latentbridge/checkpoint.hpp"
#include "latentbridge/model.hpp"

namespace fs = std::filesystem;
using lb::ArchConfig;
using lb::Domain;
using lb::Head;
using lb::Mode;
using lb::Shape;
using lb::Tensor;
using lb::Var;

namespace {

// Smallest architecture that exercises every layer kind.
ArchConfig tiny_arch() {
    ArchConfig a;
    a.image_size = 8;
    a.image_channels = 1;
    a.stem_channels = 2;
    a.pack_channels = {4, 8};
    a.res_rows = 0;
    a.latent_channels = 4;
    a.seg_classes = 2;
    a.validate();
    return a;
}

// Channels chosen so every weight is square across its channel axes, which
// makes an exact identity configuration possible: pack stages quadruple
// channels while halving H and W, and norms/tanh are switched off.
ArchConfig identity_arch() {
    ArchConfig a;
    a.image_size = 8;
    a.image_channels = 1;
    a.stem_channels = 1;
    a.pack_channels = {4, 16};
    a.res_rows = 1;
    a.latent_channels = 16;
    a.seg_classes = 2;
    a.use_norm = false;
    a.output_tanh = false;
    a.validate();
    return a;
}

template <typename T>
void configure_identity(lb::ModelBundle<T>& m) {
    for (const auto& name : m.order) {
        Tensor<T>& t = m.at(name);
        std::fill(t.data.begin(), t.data.end(), T(0));
        const bool is_w = name.size() > 2 && name.rfind("/w") == name.size() - 2;
        const bool is_w3 = name.size() > 3 && name.rfind("/w3") == name.size() - 3;
        if (name.find("logvar") != std::string::npos) continue;
        if (is_w3) {
            // shared 3-d filter (depth, k, k): delta at (pad_front, center)
            const int64_t depth = t.dim(0), k = t.dim(1);
            t[((depth - 1) / 2 * k + k / 2) * k + k / 2] = T(1);
        } else if (is_w) {
            // (out, in, k, k): per-channel delta at the spatial center
            const int64_t k = t.dim(3), c = std::min(t.dim(0), t.dim(1));
            for (int64_t i = 0; i < c; ++i) t.at(i, i, k / 2, k / 2) = T(1);
        }
    }
}

fs::path temp_dir() {
    auto d = fs::temp_directory_path() / "lb_model_test";
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST(BuildModel, ParamCountMatchesHandComputation) {
    // desk-32 counted layer by layer from the channel plan: two encoders own
    // 15747 each, the shared latent rows and heads hold 4680, the shared
    // decoder row 3472, the two image decoders own 15812 each, and the depth
    // and class-map decoders hold 18694 and 20169.
    auto m = lb::build_model<double>(lb::arch_preset("desk-32"), 1);
    EXPECT_EQ(m.param_count(), 110133);

    std::set<std::string> names(m.order.begin(), m.order.end());
    EXPECT_EQ(names.size(), m.order.size()) << "duplicate canonical names";
    for (const auto& [alias, canon] : m.sharing) {
        EXPECT_EQ(names.count(alias), 0u) << alias << " is both alias and canonical";
        EXPECT_EQ(names.count(canon), 1u);
    }
}

TEST(BuildModel, GroupPrefixes) {
    auto m = lb::build_model<double>(tiny_arch(), 1);
    std::set<std::string> groups;
    for (const auto& n : m.order) groups.insert(lb::ModelBundle<double>::group_of(n));
    EXPECT_EQ(groups, (std::set<std::string>{"enc_r", "enc_s", "dec_r", "dec_s", "dec_depth",
                                             "dec_seg", "shared"}));
}

TEST(Sharing, AliasesPointAtCanonicalStorage) {
    auto m = lb::build_model<double>(lb::arch_preset("desk-32"), 1);
    // latent row (w,b) + mu (w,b) + logvar (w,b) per encoder, latent row
    // (w,b) per image decoder
    EXPECT_EQ(m.sharing.size(), 16u);
    for (const char* leaf : {"latent/w", "latent/b", "mu/w", "mu/b", "logvar/w", "logvar/b"}) {
        EXPECT_EQ(&m.at(std::string("enc_r/") + leaf), &m.at(std::string("enc_s/") + leaf));
        EXPECT_EQ(&m.at(std::string("enc_r/") + leaf),
                  &m.at(std::string("shared/enc/") + leaf));
    }
    for (const char* leaf : {"latent/w", "latent/b"}) {
        EXPECT_EQ(&m.at(std::string("dec_r/") + leaf), &m.at(std::string("dec_s/") + leaf));
        EXPECT_EQ(&m.at(std::string("dec_r/") + leaf),
                  &m.at(std::string("shared/dec/") + leaf));
    }
    // auxiliary decoders share nothing
    for (const auto& [alias, canon] : m.sharing) {
        EXPECT_TRUE(alias.rfind("enc_", 0) == 0 || alias.rfind("dec_r", 0) == 0 ||
                    alias.rfind("dec_s", 0) == 0)
            << alias;
        EXPECT_EQ(canon.rfind("shared/", 0), 0u) << canon;
    }
    EXPECT_NE(&m.at("dec_depth/latent/w"), &m.at("dec_seg/latent/w"));
    EXPECT_NE(&m.at("dec_depth/latent/w"), &m.at("shared/dec/latent/w"));
}

TEST(Sharing, WiderSharingPullsInMoreRows) {
    auto a = lb::arch_preset("desk-32");
    a.shared_enc_rows = 3;  // res0 + pack2 + latent, plus the heads
    a.shared_dec_rows = 3;  // latent + unpack0 + res0
    auto m = lb::build_model<double>(a, 1);
    // encoder side: (4 + 4 + 2 + 4) leaves x 2 domains; decoder side:
    // (2 + 4 + 4) x 2 image decoders
    EXPECT_EQ(m.sharing.size(), 28u + 20u);
    EXPECT_EQ(&m.at("enc_r/res0/wa"), &m.at("enc_s/res0/wa"));
    EXPECT_EQ(&m.at("dec_r/unpack0/w3"), &m.at("dec_s/unpack0/w3"));
    // depth/seg decoders still own their rows
    EXPECT_NE(&m.at("dec_depth/unpack0/w"), &m.at("dec_r/unpack0/w"));
}

TEST(Init, SeededAndDeterministic) {
    auto a = lb::arch_preset("desk-32");
    auto m1 = lb::build_model<double>(a, 42);
    auto m2 = lb::build_model<double>(a, 42);
    auto m3 = lb::build_model<double>(a, 43);
    bool any_diff_seed43 = false;
    for (const auto& name : m1.order) {
        const auto& t1 = m1.at(name);
        ASSERT_EQ(t1.shape, m2.at(name).shape);
        EXPECT_EQ(t1.data, m2.at(name).data) << name;
        if (t1.data != m3.at(name).data) any_diff_seed43 = true;
        const std::string leaf = name.substr(name.rfind('/') + 1);
        if (leaf[0] == 'b')  // b, b3, ba, bb
            for (double v : t1.data) ASSERT_EQ(v, 0.0) << name;
    }
    EXPECT_TRUE(any_diff_seed43);
}

TEST(Forward, LatentAndHeadShapes) {
    auto m = lb::build_model<double>(lb::arch_preset("desk-32"), 7);
    auto x = Tensor<double>::gaussian({2, 3, 32, 32}, 11, 0.0, 0.5);
    auto lat = lb::encode(m, x, Domain::real, Mode::sample, 5);
    EXPECT_EQ(lat.mu.shape, (Shape{2, 24, 4, 4}));
    EXPECT_EQ(lat.logvar.shape, (Shape{2, 24, 4, 4}));
    EXPECT_EQ(lat.z.shape, (Shape{2, 24, 4, 4}));
    EXPECT_NE(lat.z.data, lat.mu.data) << "sampling should perturb the mean";

    auto lat_mean = lb::encode(m, x, Domain::real, Mode::mean);
    EXPECT_EQ(lat_mean.z.data, lat_mean.mu.data);
    EXPECT_EQ(lat_mean.mu.data, lat.mu.data) << "mean must not depend on sampling";

    EXPECT_EQ(lb::decode(m, lat.z, Head::real).shape, (Shape{2, 3, 32, 32}));
    EXPECT_EQ(lb::decode(m, lat.z, Head::depth).shape, (Shape{2, 1, 32, 32}));
    EXPECT_EQ(lb::decode(m, lat.z, Head::seg).shape, (Shape{2, 6, 32, 32}));
}

TEST(Forward, SampleSeedReproducible) {
    auto m = lb::build_model<double>(lb::arch_preset("desk-32"), 7);
    auto x = Tensor<double>::gaussian({1, 3, 32, 32}, 11, 0.0, 0.5);
    auto a = lb::encode(m, x, Domain::sim, Mode::sample, 99);
    auto b = lb::encode(m, x, Domain::sim, Mode::sample, 99);
    auto c = lb::encode(m, x, Domain::sim, Mode::sample, 100);
    EXPECT_EQ(a.z.data, b.z.data);
    EXPECT_NE(a.z.data, c.z.data);
}

// Full-size network, batch 1: every row's output shape, checked against the
// channel/resolution plan the architecture was built to.
TEST(Paper256, LayerOutputShapesMatchPlan) {
    auto m = lb::build_model<float>(lb::arch_preset("paper-256"), 3);
    auto x = Tensor<float>::gaussian({1, 3, 256, 256}, 5, 0.0f, 0.5f);

    const std::vector<std::pair<std::string, Shape>> want_enc = {
        {"enc_r/stem", {1, 64, 256, 256}},   {"enc_r/pack0", {1, 76, 128, 128}},
        {"enc_r/pack1", {1, 88, 64, 64}},    {"enc_r/pack2", {1, 100, 32, 32}},
        {"enc_r/pack3", {1, 128, 16, 16}},   {"enc_r/pack4", {1, 200, 8, 8}},
        {"enc_r/res0", {1, 200, 8, 8}},      {"enc_r/res1", {1, 200, 8, 8}},
        {"enc_r/pack5", {1, 250, 4, 4}},     {"enc_r/latent", {1, 300, 4, 4}},
        {"enc_r/mu", {1, 300, 4, 4}},
    };
    Tensor<float> z({1, 300, 4, 4});
    {
        lb::Graph<float> g;
        lb::ModelForward<float> f(g, m);
        lb::ShapeTrace trace;
        lb::Rng rng(1);
        auto lat = f.encode(g.leaf(x), Domain::real, Mode::sample, &rng, &trace);
        ASSERT_EQ(trace.size(), want_enc.size());
        for (size_t i = 0; i < want_enc.size(); ++i) {
            EXPECT_EQ(trace[i].first, want_enc[i].first);
            EXPECT_EQ(trace[i].second, want_enc[i].second) << trace[i].first;
        }
        ASSERT_TRUE(g.val(lat.z).all_finite());
        z = g.val(lat.z);
    }

    const std::vector<std::pair<std::string, Shape>> want_dec = {
        {"dec_r/latent", {1, 250, 4, 4}},     {"dec_r/unpack0", {1, 200, 8, 8}},
        {"dec_r/res0", {1, 200, 8, 8}},       {"dec_r/res1", {1, 200, 8, 8}},
        {"dec_r/unpack1", {1, 128, 16, 16}},  {"dec_r/unpack2", {1, 100, 32, 32}},
        {"dec_r/unpack3", {1, 88, 64, 64}},   {"dec_r/unpack4", {1, 76, 128, 128}},
        {"dec_r/unpack5", {1, 64, 256, 256}}, {"dec_r/out", {1, 3, 256, 256}},
    };
    {
        lb::Graph<float> g;
        lb::ModelForward<float> f(g, m);
        lb::ShapeTrace trace;
        Var y = f.decode(g.leaf(z), Head::real, &trace);
        ASSERT_EQ(trace.size(), want_dec.size());
        for (size_t i = 0; i < want_dec.size(); ++i) {
            EXPECT_EQ(trace[i].first, want_dec[i].first);
            EXPECT_EQ(trace[i].second, want_dec[i].second) << trace[i].first;
        }
        const auto& yv = g.val(y);
        ASSERT_TRUE(yv.all_finite());
        for (int64_t i = 0; i < yv.numel(); ++i)
            ASSERT_TRUE(yv[i] >= -1.0f && yv[i] <= 1.0f) << "tanh bound violated";
    }
    {
        lb::Graph<float> g;
        lb::ModelForward<float> f(g, m);
        Var y = f.decode(g.leaf(z), Head::seg);
        EXPECT_EQ(g.val(y).shape, (Shape{1, 15, 256, 256}));
        // class-map head emits raw scores, not tanh-squashed values
        bool outside = false;
        for (int64_t i = 0; i < g.val(y).numel() && !outside; ++i)
            outside = g.val(y)[i] < -1.0f || g.val(y)[i] > 1.0f;
        SUCCEED();  // range is unconstrained; shape is the contract
    }
}

TEST(ToyIdentity, EncodeDecodeRoundTripIsExact) {
    auto m = lb::build_model<double>(identity_arch(), 1);
    configure_identity(m);
    lb::Rng rng(9);
    Tensor<double> x({1, 1, 8, 8});
    for (auto& v : x.data) v = rng.uniform(0.1, 0.9);  // positive: relu-transparent

    auto lat = lb::encode(m, x, Domain::real, Mode::mean);
    EXPECT_EQ(lat.z.shape, (Shape{1, 16, 2, 2}));
    auto y = lb::decode(m, lat.z, Head::real);
    ASSERT_EQ(y.shape, x.shape);
    EXPECT_EQ(y.data, x.data) << "identity-configured network must reproduce input bitwise";
}

TEST(ToyIdentity, CrossDomainTranslationIsExact) {
    auto m = lb::build_model<double>(identity_arch(), 1);
    configure_identity(m);
    lb::Rng rng(10);
    Tensor<double> x({2, 1, 8, 8});
    for (auto& v : x.data) v = rng.uniform(0.1, 0.9);
    auto y = lb::cross_domain(m, x, Domain::sim, Domain::real, Mode::mean);
    EXPECT_EQ(y.data, x.data);
}

// A parameter aliased into both encoders must collect gradient from both
// paths when both run in one graph.
TEST(Sharing, SharedLeafAccumulatesAcrossDomains) {
    auto m = lb::build_model<double>(tiny_arch(), 21);
    auto x = Tensor<double>::gaussian({1, 1, 8, 8}, 4, 0.0, 0.5);
    const std::string wname = "shared/enc/mu/w";

    auto grad_of = [&](bool use_r, bool use_s) {
        lb::Graph<double> g;
        lb::ModelForward<double> f(g, m);
        Var x_in = g.leaf(x);
        std::vector<Var> losses;
        if (use_r)
            losses.push_back(lb::ops::sum(g, f.encode(x_in, Domain::real, Mode::mean, nullptr).mu));
        if (use_s)
            losses.push_back(lb::ops::sum(g, f.encode(x_in, Domain::sim, Mode::mean, nullptr).mu));
        Var total = losses.size() == 1 ? losses[0] : lb::ops::add(g, losses[0], losses[1]);
        g.backward(total);
        EXPECT_EQ(f.bound().count(wname), 1u);
        return g.grad(f.bound().at(wname));
    };

    auto gr = grad_of(true, false);
    auto gs = grad_of(false, true);
    auto gboth = grad_of(true, true);
    double worst = 0;
    for (int64_t i = 0; i < gboth.numel(); ++i)
        worst = std::max(worst, std::abs(gboth[i] - (gr[i] + gs[i])));
    EXPECT_LT(worst, 1e-12) << "shared leaf must sum gradients from both encoders";
}

TEST(Sharing, TrainablePredicateFreezesLeaves) {
    auto m = lb::build_model<double>(tiny_arch(), 21);
    auto x = Tensor<double>::gaussian({1, 1, 8, 8}, 4, 0.0, 0.5);
    lb::Graph<double> g;
    lb::ModelForward<double> f(g, m, [](const std::string& name) {
        return lb::ModelBundle<double>::group_of(name) == "shared";
    });
    auto lat = f.encode(g.leaf(x), Domain::real, Mode::mean, nullptr);
    g.backward(lb::ops::sum(g, lat.mu));
    EXPECT_TRUE(g.requires_grad(f.bound().at("shared/enc/mu/w")));
    EXPECT_FALSE(g.requires_grad(f.bound().at("enc_r/stem/w")));
}

TEST(Checkpoint, RoundTripIsBitwise) {
    auto dir = temp_dir();
    auto path = (dir / "roundtrip.ckpt").string();
    auto m = lb::build_model<double>(lb::arch_preset("desk-32"), 17);
    std::map<std::string, Tensor<double>> extras;
    extras.emplace("optim/m/enc_r/stem/w", Tensor<double>::gaussian({6, 3, 7, 7}, 2, 0.0, 1.0));
    nlohmann::json meta = {{"stage", "one"}, {"epoch", 3}};
    lb::save_checkpoint(m, path, extras, meta);

    auto ck = lb::load_checkpoint<double>(path);
    EXPECT_EQ(ck.model.order, m.order);
    for (const auto& name : m.order) EXPECT_EQ(ck.model.at(name).data, m.at(name).data) << name;
    ASSERT_EQ(ck.extras.count("optim/m/enc_r/stem/w"), 1u);
    EXPECT_EQ(ck.extras.at("optim/m/enc_r/stem/w").data, extras.at("optim/m/enc_r/stem/w").data);
    EXPECT_EQ(ck.meta.at("epoch").get<int>(), 3);
    // sharing survives the rebuild
    EXPECT_EQ(&ck.model.at("enc_r/mu/w"), &ck.model.at("enc_s/mu/w"));
}

TEST(Checkpoint, LoadIntoRestoresInPlace) {
    auto dir = temp_dir();
    auto path = (dir / "restore.ckpt").string();
    auto m = lb::build_model<double>(lb::arch_preset("desk-32"), 17);
    lb::save_checkpoint(m, path);
    const auto snapshot = m.at("dec_s/out/w").data;
    for (auto& v : m.at("dec_s/out/w").data) v += 1.0;
    lb::load_checkpoint_into(m, path);
    EXPECT_EQ(m.at("dec_s/out/w").data, snapshot);
}

TEST(Checkpoint, FloatPayloadsLoadIntoDouble) {
    auto dir = temp_dir();
    auto path = (dir / "f32.ckpt").string();
    auto md = lb::build_model<double>(lb::arch_preset("desk-32"), 8);
    auto mf = md.cast<float>();
    lb::save_checkpoint(mf, path);
    auto ck = lb::load_checkpoint<double>(path);
    for (const auto& name : md.order) {
        const auto& a = ck.model.at(name);
        const auto& b = md.at(name);
        for (int64_t i = 0; i < a.numel(); ++i)
            ASSERT_NEAR(a[i], b[i], 1e-6) << name;
    }
}

TEST(Checkpoint, RejectsArchitectureMismatch) {
    auto dir = temp_dir();
    auto path = (dir / "mismatch.ckpt").string();
    auto m32 = lb::build_model<double>(lb::arch_preset("desk-32"), 1);
    lb::save_checkpoint(m32, path);
    auto m64 = lb::build_model<double>(lb::arch_preset("desk-64"), 1);
    EXPECT_THROW(lb::load_checkpoint_into(m64, path), lb::CheckpointError);
}

TEST(Checkpoint, RejectsTruncatedAndGarbageFiles) {
    auto dir = temp_dir();
    auto path = (dir / "trunc.ckpt").string();
    auto m = lb::build_model<double>(tiny_arch(), 1);
    lb::save_checkpoint(m, path);
    fs::resize_file(path, fs::file_size(path) / 2);
    try {
        auto ck = lb::load_checkpoint<double>(path);
        FAIL() << "expected CheckpointError";
    } catch (const lb::CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
    }

    auto bad = (dir / "garbage.ckpt").string();
    std::ofstream(bad, std::ios::binary) << "not a checkpoint at all";
    EXPECT_THROW(lb::load_checkpoint<double>(bad), lb::CheckpointError);
    EXPECT_THROW(lb::load_checkpoint<double>((dir / "missing.ckpt").string()),
                 lb::CheckpointError);
}

TEST(Arch, PresetAndValidation) {
    EXPECT_THROW(lb::arch_preset("desk-128"), lb::ConfigError);
    auto a = lb::arch_preset("desk-32");
    a.image_size = 20;  // not divisible by 2^3
    EXPECT_THROW(a.validate(), lb::ConfigError);
    a = lb::arch_preset("desk-32");
    a.kernel = 4;
    EXPECT_THROW(a.validate(), lb::ConfigError);
}
