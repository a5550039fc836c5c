#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "latentbridge/plot.hpp"

using lb::Canvas;
using lb::Domain;
using lb::Shape;
using lb::Tensor;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& leaf) {
    fs::path p = fs::temp_directory_path() / "lb_plot_test" / leaf;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<uint8_t> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_log(const fs::path& p, int steps) {
    std::ofstream out(p);
    for (int i = 0; i < steps; ++i)
        out << "{\"stage\":\"stage1\",\"epoch\":0,\"step\":" << i << ",\"kl_r\":" << 2.0 - 0.01 * i
            << ",\"mse_s\":" << 1.0 / (1 + i) << ",\"total\":" << 3.0 - 0.01 * i
            << ",\"wall_ms\":5.0,\"skipped\":0}\n";
}

}  // namespace

TEST(Canvas, PixelsLinesAndClipping) {
    Canvas c(4, 6);
    EXPECT_EQ(c.rgb.size(), 4u * 6u * 3u);
    for (const auto v : c.rgb) EXPECT_EQ(v, 255);

    c.set(1, 2, {10, 20, 30});
    EXPECT_EQ(c.rgb[(1 * 6 + 2) * 3 + 0], 10);
    EXPECT_EQ(c.rgb[(1 * 6 + 2) * 3 + 2], 30);
    c.set(-1, 0, {0, 0, 0});
    c.set(0, 99, {0, 0, 0});  // clipped, no crash

    Canvas d(3, 3);
    d.line(0, 0, 2, 2, {0, 0, 0});
    EXPECT_EQ(d.rgb[0], 0);
    EXPECT_EQ(d.rgb[(1 * 3 + 1) * 3], 0);
    EXPECT_EQ(d.rgb[(2 * 3 + 2) * 3], 0);
    EXPECT_EQ(d.rgb[(0 * 3 + 1) * 3], 255);

    const auto dir = temp_dir("canvas");
    d.save((dir / "x.png").string());
    const auto img = lb::read_png_rgb8((dir / "x.png").string());
    EXPECT_EQ(img.pixels, d.rgb);
}

TEST(LossLog, ParsesFieldsInOrderAndSkipsBookkeeping) {
    const auto dir = temp_dir("log");
    write_log(dir / "train_log.jsonl", 100);
    const auto log = lb::parse_train_log((dir / "train_log.jsonl").string());
    EXPECT_EQ(log.steps, 100);
    ASSERT_EQ(log.fields, (std::vector<std::string>{"kl_r", "mse_s", "total"}));
    EXPECT_EQ(log.series.at("total").size(), 100u);
    EXPECT_NEAR(log.series.at("kl_r")[0], 2.0, 1e-12);
    EXPECT_NEAR(log.series.at("total")[99], 3.0 - 0.99, 1e-12);
    EXPECT_EQ(log.series.count("step"), 0u);
    EXPECT_EQ(log.series.count("wall_ms"), 0u);
}

TEST(LossLog, RejectsMissingEmptyAndMalformed) {
    const auto dir = temp_dir("badlog");
    EXPECT_THROW(lb::parse_train_log((dir / "nope.jsonl").string()), lb::DataError);

    std::ofstream(dir / "empty.jsonl") << "";
    EXPECT_THROW(lb::parse_train_log((dir / "empty.jsonl").string()), lb::DataError);

    std::ofstream(dir / "garbage.jsonl") << "{oops\n";
    try {
        lb::parse_train_log((dir / "garbage.jsonl").string());
        FAIL() << "expected DataError";
    } catch (const lb::DataError& e) {
        EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
    }
}

TEST(LossCurves, OneImagePerFieldAndDeterministic) {
    const auto dir = temp_dir("curves");
    write_log(dir / "train_log.jsonl", 100);
    const auto log = lb::parse_train_log((dir / "train_log.jsonl").string());

    const auto out1 = temp_dir("curves_out1");
    const auto files = lb::plot_loss_curves(log, out1.string());
    ASSERT_EQ(files.size(), 3u);
    for (const auto& f : files) EXPECT_TRUE(fs::exists(f)) << f;
    EXPECT_TRUE(fs::exists(out1 / "loss_kl_r.png"));
    EXPECT_TRUE(fs::exists(out1 / "loss_total.png"));

    const auto img = lb::read_png_rgb8((out1 / "loss_total.png").string());
    EXPECT_EQ(img.height, 240);
    EXPECT_EQ(img.width, 640);

    const auto out2 = temp_dir("curves_out2");
    lb::plot_loss_curves(log, out2.string());
    EXPECT_EQ(file_bytes(out1 / "loss_total.png"), file_bytes(out2 / "loss_total.png"));

    // constant series must not divide by zero
    lb::LossLog flat;
    flat.fields = {"c"};
    flat.series["c"] = {1.0, 1.0, 1.0};
    flat.steps = 3;
    EXPECT_NO_THROW(lb::plot_loss_curves(flat, temp_dir("flat").string()));
}

TEST(PredictionPanels, DimensionsAndDeterminism) {
    lb::ArchConfig a;
    a.image_size = 16;
    a.stem_channels = 4;
    a.pack_channels = {6, 8};
    a.res_rows = 0;
    a.latent_channels = 8;
    a.seg_classes = 6;
    a.validate();
    auto model = lb::build_model<double>(a, 3);

    const auto data_dir = temp_dir("panel_data");
    lb::SceneConfig cfg;
    lb::write_dataset(data_dir.string(), lb::generate_scene_set<double>(9, 3, 16, 16, cfg), cfg);
    lb::DirectoryDataset<double> ds(data_dir.string());

    const auto out = temp_dir("panel_out");
    lb::render_prediction_panels(model, ds, Domain::real, 3, 32, (out / "p.png").string());
    const auto img = lb::read_png_rgb8((out / "p.png").string());
    EXPECT_EQ(img.height, 3 * 32);
    EXPECT_EQ(img.width, 3 * 32);

    lb::render_prediction_panels(model, ds, Domain::real, 3, 32, (out / "q.png").string());
    EXPECT_EQ(file_bytes(out / "p.png"), file_bytes(out / "q.png"));

    EXPECT_THROW(
        lb::render_prediction_panels(model, ds, Domain::real, 9, 32, (out / "r.png").string()),
        lb::ConfigError);
    EXPECT_THROW(
        lb::render_prediction_panels(model, ds, Domain::real, 1, 4, (out / "s.png").string()),
        lb::ConfigError);
}
