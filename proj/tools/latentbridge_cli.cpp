// Command-line entry point: dataset generation, two-stage training,
// evaluation, and plotting as one binary with subcommands.
//
// Every subcommand accepts --config <file> (INI key=value, keys named after
// the long options); command-line flags override file values, and the
// effective configuration is serialized back into the output directory as
// run_config.ini so each run can be reproduced from that file alone.
//
// Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numeric abort.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "latentbridge/latentbridge.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

// Fill options the command line left unset from an INI file.  CLI11 2.x only
// processes set_config on the top-level app, so subcommand configs are applied
// by hand: parse with CLI11's INI reader, then route each key to the matching
// long option.
void apply_config_file(CLI::App& sub, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw lb::ConfigError("cannot open config file '" + path + "'");
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI{}.from_config(in);
    } catch (const CLI::Error& e) {
        throw lb::ConfigError("config file '" + path + "': " + std::string(e.what()));
    }
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;  // section markers
        if (!item.parents.empty())
            throw lb::ConfigError("config file '" + path + "': unexpected section key '" +
                                  item.fullname() + "'");
        if (item.name == "config") continue;
        CLI::Option* op = sub.get_option_no_throw("--" + item.name);
        if (op == nullptr)
            throw lb::ConfigError("config file '" + path + "': unknown option '" + item.name +
                                  "'");
        if (op->count() > 0) continue;  // command line wins
        try {
            for (const auto& v : item.inputs) op->add_result(v);
            op->run_callback();
        } catch (const CLI::Error& e) {
            throw lb::ConfigError("config file '" + path + "': option '" + item.name +
                                  "': " + std::string(e.what()));
        }
    }
}

void require_set(const std::string& value, const char* flag) {
    if (value.empty()) throw lb::ConfigError(std::string(flag) + " is required");
}

// An unset list round-trips through a serialized config as "" or "{}".
std::vector<std::string> drop_empty(std::vector<std::string> v) {
    std::erase(v, std::string());
    std::erase(v, std::string("{}"));
    return v;
}

// every run leaves its exact configuration next to its outputs
void write_run_config(const CLI::App& sub, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "run_config.ini");
    out << sub.config_to_str(true, true);
}

std::map<std::string, double> parse_weight_overrides(const std::vector<std::string>& kvs) {
    std::map<std::string, double> out;
    for (const auto& kv : kvs) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw lb::ConfigError("loss weight override '" + kv + "' is not of the form name=value");
        try {
            out[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
        } catch (const std::exception&) {
            throw lb::ConfigError("loss weight override '" + kv + "' has a non-numeric value");
        }
    }
    return out;
}

// --- gen-data -----------------------------------------------------------------

struct GenOpts {
    std::string out;
    std::string preset = "desk-32";
    uint64_t seed = 0;
    int64_t count = 16;
    int64_t size = 0;  // 0 -> preset image size
    uint64_t real_offset = 0;
    lb::SceneConfig scene;
};

int run_gen_data(const GenOpts& o, const CLI::App& sub) {
    require_set(o.out, "--out");
    const auto arch = lb::arch_preset(o.preset);
    const int64_t size = o.size > 0 ? o.size : arch.image_size;
    lb::require_size_divisible(size, size, arch.downsample());
    if (o.count < 1) throw lb::ConfigError("--count must be positive");

    write_run_config(sub, o.out);
    const auto pairs =
        lb::generate_scene_set<double>(o.seed, o.count, size, size, o.scene, o.real_offset);
    lb::write_dataset(o.out, pairs, o.scene);
    std::cout << "wrote " << o.count << " paired samples (" << size << "x" << size << ") to "
              << o.out << "\n";
    return kExitOk;
}

// --- train ----------------------------------------------------------------------

struct TrainOpts {
    std::string data, out;
    std::string preset = "desk-32";
    std::string stage = "full";
    std::string resume, init;
    std::string dtype = "f64";
    uint64_t seed = 0;
    int epochs = 1;
    int stage2_epochs = -1;  // -1 -> same as --epochs
    int batch = 8;
    int64_t max_real = -1, max_sim = -1;
    lb::AdamConfig adam;
    double sigma = 0.0;
    std::vector<std::string> weights;
    std::vector<std::string> trainable;
    bool mmd_on_sample = false;
    bool keep_pseudo_grad = false;
};

template <typename T>
int run_train_typed(const TrainOpts& o, const CLI::App& sub) {
    const auto arch = lb::arch_preset(o.preset);
    lb::DirectoryDataset<T> ds(o.data);
    if (ds.meta().height != arch.image_size || ds.meta().width != arch.image_size)
        throw lb::ConfigError("dataset images are " + std::to_string(ds.meta().height) + "x" +
                              std::to_string(ds.meta().width) + " but preset '" + o.preset +
                              "' expects " + std::to_string(arch.image_size) + "x" +
                              std::to_string(arch.image_size));
    const auto data = lb::load_training_data(ds, o.max_real, o.max_sim);

    auto model = lb::build_model<T>(arch, o.seed);
    if (!o.init.empty()) lb::load_checkpoint_into(model, o.init);

    lb::LossOptions loss;
    loss.kernel.sigma = o.sigma;
    loss.mmd_on_sample = o.mmd_on_sample;
    loss.stop_pseudo_grad = !o.keep_pseudo_grad;
    loss.weights = parse_weight_overrides(drop_empty(o.weights));

    std::vector<lb::StagePlan> schedule;
    const std::vector<lb::Stage> stages =
        o.stage == "full"
            ? std::vector<lb::Stage>{lb::Stage::one, lb::Stage::two_depth, lb::Stage::two_seg}
            : std::vector<lb::Stage>{lb::stage_from_tag(o.stage)};
    for (lb::Stage s : stages) {
        lb::StagePlan plan;
        plan.stage = s;
        plan.trainable_groups = drop_empty(o.trainable);
        plan.epochs = s != lb::Stage::one && o.stage2_epochs >= 0 ? o.stage2_epochs : o.epochs;
        plan.batch_size = o.batch;
        plan.seed = o.seed;
        plan.adam = o.adam;
        plan.loss = loss;
        schedule.push_back(plan);
    }

    write_run_config(sub, o.out);
    const auto results = lb::train_full(model, data, schedule, o.out, o.resume);

    const std::string final_path = (fs::path(o.out) / "final.ckpt").string();
    lb::save_checkpoint(model, final_path, {}, {{"preset", o.preset}});
    const size_t skipped = schedule.size() - results.size();  // resume skips a prefix
    for (size_t i = 0; i < results.size(); ++i)
        std::cout << lb::stage_tag(schedule[skipped + i].stage) << ": " << results[i].steps
                  << " steps, total " << results[i].first_total << " -> "
                  << results[i].last_total << "\n";
    std::cout << "final checkpoint: " << final_path << "\n";
    return kExitOk;
}

int run_train(const TrainOpts& o, const CLI::App& sub) {
    require_set(o.data, "--data");
    require_set(o.out, "--out");
    if (o.dtype == "f64") return run_train_typed<double>(o, sub);
    if (o.dtype == "f32") return run_train_typed<float>(o, sub);
    throw lb::ConfigError("unknown dtype '" + o.dtype + "' (valid: f32, f64)");
}

// --- eval -----------------------------------------------------------------------

struct EvalOpts {
    std::string checkpoint, data, report;
    std::string task = "depth";
    std::string domain = "real";
    std::string preset;  // optional cross-check
    int64_t resize = 0;
    int64_t max_images = -1;
};

int run_eval(const EvalOpts& o, const CLI::App& sub) {
    require_set(o.checkpoint, "--checkpoint");
    require_set(o.data, "--data");
    const auto ckpt = lb::load_checkpoint<double>(o.checkpoint);
    if (!o.preset.empty() &&
        lb::arch_to_json(lb::arch_preset(o.preset)) != lb::arch_to_json(ckpt.model.arch))
        throw lb::ConfigError("checkpoint '" + o.checkpoint +
                              "' does not hold the architecture of preset '" + o.preset + "'");
    lb::Task task;
    if (o.task == "depth")
        task = lb::Task::depth;
    else if (o.task == "seg")
        task = lb::Task::seg;
    else
        throw lb::ConfigError("unknown task '" + o.task + "' (valid: depth, seg)");
    lb::Domain domain;
    if (o.domain == "real")
        domain = lb::Domain::real;
    else if (o.domain == "sim")
        domain = lb::Domain::sim;
    else
        throw lb::ConfigError("unknown domain '" + o.domain + "' (valid: real, sim)");

    lb::DirectoryDataset<double> ds(o.data);
    const auto report = lb::evaluate_model(ckpt.model, ds, task, domain, o.resize, o.max_images);
    std::cout << report.to_csv();

    if (!o.report.empty()) {
        write_run_config(sub, o.report);
        std::ofstream j(fs::path(o.report) / "report.json");
        j << report.to_json().dump(2) << "\n";
        std::ofstream c(fs::path(o.report) / "report.csv");
        c << report.to_csv();
        std::cout << "reports written to " << o.report << "\n";
    }
    return kExitOk;
}

// --- plot -----------------------------------------------------------------------

struct PlotOpts {
    std::string log, checkpoint, data;
    std::string out = "plots";
    std::string domain = "real";
    int64_t count = 4;
    int64_t tile = 128;
};

int run_plot(const PlotOpts& o, const CLI::App& sub) {
    if (o.log.empty() && o.checkpoint.empty())
        throw lb::ConfigError("plot needs --log (loss curves) and/or --checkpoint with --data "
                              "(prediction panels)");
    write_run_config(sub, o.out);
    if (!o.log.empty()) {
        const auto curves = lb::plot_loss_curves(lb::parse_train_log(o.log), o.out);
        std::cout << "wrote " << curves.size() << " loss curves to " << o.out << "\n";
    }
    if (!o.checkpoint.empty()) {
        if (o.data.empty()) throw lb::ConfigError("prediction panels need --data");
        const auto ckpt = lb::load_checkpoint<double>(o.checkpoint);
        lb::DirectoryDataset<double> ds(o.data);
        const lb::Domain domain = o.domain == "sim" ? lb::Domain::sim : lb::Domain::real;
        const std::string path = (fs::path(o.out) / "panels.png").string();
        lb::render_prediction_panels(ckpt.model, ds, domain, o.count, o.tile, path);
        std::cout << "wrote prediction panels to " << path << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"twin-autoencoder domain transfer: data generation, training, evaluation"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default(true);

    std::string config_path;
    const auto add_config = [&config_path](CLI::App* sub) {
        sub->add_option("--config", config_path, "INI file with defaults for these options")
            ->configurable(false);
    };

    GenOpts gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "generate a paired synthetic dataset");
    add_config(gen_cmd);
    gen_cmd->add_option("--out", gen.out, "dataset root directory");
    gen_cmd->add_option("--seed", gen.seed, "generator seed");
    gen_cmd->add_option("--count", gen.count, "number of samples per split");
    gen_cmd->add_option("--size", gen.size, "square image size (default: preset size)");
    gen_cmd->add_option("--preset", gen.preset, "architecture preset used for the size check");
    gen_cmd->add_option("--real-offset", gen.real_offset,
                        "seed offset for the real split; nonzero makes the splits fully unpaired");
    gen_cmd->add_option("--d-min", gen.scene.d_min, "nearest representable depth (m)");
    gen_cmd->add_option("--d-max", gen.scene.d_max, "farthest representable depth (m)");
    gen_cmd->add_option("--texture-noise", gen.scene.shift.texture_noise,
                        "real-domain per-class noise amplitude");
    gen_cmd->add_option("--warmth", gen.scene.shift.warmth, "real-domain color shift strength");
    gen_cmd->add_option("--vignette", gen.scene.shift.vignette, "real-domain vignette strength");
    gen_cmd->add_option("--min-objects", gen.scene.min_objects, "minimum objects per scene");
    gen_cmd->add_option("--max-objects", gen.scene.max_objects, "maximum objects per scene");

    TrainOpts train;
    auto* train_cmd = app.add_subcommand("train", "run the two-stage training schedule");
    add_config(train_cmd);
    train_cmd->add_option("--data", train.data, "dataset root");
    train_cmd->add_option("--out", train.out, "run output directory");
    train_cmd->add_option("--preset", train.preset, "architecture preset");
    train_cmd->add_option("--stage", train.stage,
                          "stage1 | stage2-depth | stage2-seg | full (all three in order)");
    train_cmd->add_option("--epochs", train.epochs, "epochs per stage");
    train_cmd->add_option("--stage2-epochs", train.stage2_epochs,
                          "override epochs for stage-2 plans");
    train_cmd->add_option("--batch-size", train.batch, "samples per optimization step");
    train_cmd->add_option("--seed", train.seed, "master seed for init, shuffles, and sampling");
    train_cmd->add_option("--lr", train.adam.lr, "learning rate");
    train_cmd->add_option("--beta1", train.adam.beta1, "first-moment decay");
    train_cmd->add_option("--beta2", train.adam.beta2, "second-moment decay");
    train_cmd->add_option("--sigma", train.sigma,
                          "kernel bandwidth for the latent-alignment terms (0 = auto)");
    train_cmd->add_option("--weight", train.weights,
                          "per-term loss weight override, name=value (repeatable)");
    train_cmd->add_option("--trainable", train.trainable,
                          "parameter groups to train (default: stage-appropriate set)");
    train_cmd->add_option("--resume", train.resume, "checkpoint to resume the schedule from");
    train_cmd->add_option("--init", train.init, "checkpoint to initialize parameters from");
    train_cmd->add_option("--dtype", train.dtype, "f32 | f64");
    train_cmd->add_option("--max-real", train.max_real, "cap on real images used");
    train_cmd->add_option("--max-sim", train.max_sim, "cap on sim images used");
    train_cmd->add_flag("--mmd-on-sample", train.mmd_on_sample,
                        "align sampled latents instead of their means");
    train_cmd->add_flag("--keep-pseudo-grad", train.keep_pseudo_grad,
                        "let gradients flow through cross-domain pseudo images");

    EvalOpts eval;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    add_config(eval_cmd);
    eval_cmd->add_option("--checkpoint", eval.checkpoint, "model checkpoint");
    eval_cmd->add_option("--data", eval.data, "dataset root");
    eval_cmd->add_option("--task", eval.task, "depth | seg");
    eval_cmd->add_option("--domain", eval.domain, "real | sim");
    eval_cmd->add_option("--preset", eval.preset, "cross-check checkpoint against this preset");
    eval_cmd->add_option("--resize", eval.resize, "compare at this size (0 = native)");
    eval_cmd->add_option("--max-images", eval.max_images, "cap on evaluated images");
    eval_cmd->add_option("--report", eval.report, "directory for report.json / report.csv");

    PlotOpts plot;
    auto* plot_cmd = app.add_subcommand("plot", "render loss curves and prediction panels");
    add_config(plot_cmd);
    plot_cmd->add_option("--log", plot.log, "train_log.jsonl to plot");
    plot_cmd->add_option("--checkpoint", plot.checkpoint, "checkpoint for prediction panels");
    plot_cmd->add_option("--data", plot.data, "dataset root for prediction panels");
    plot_cmd->add_option("--out", plot.out, "output directory");
    plot_cmd->add_option("--domain", plot.domain, "real | sim");
    plot_cmd->add_option("--count", plot.count, "panel rows");
    plot_cmd->add_option("--tile", plot.tile, "panel tile size in pixels");

    try {
        CLI::App* cmds[] = {gen_cmd, train_cmd, eval_cmd, plot_cmd};
        app.parse(argc, argv);
        for (CLI::App* cmd : cmds)
            if (cmd->parsed() && !config_path.empty()) apply_config_file(*cmd, config_path);
        if (gen_cmd->parsed()) return run_gen_data(gen, *gen_cmd);
        if (train_cmd->parsed()) return run_train(train, *train_cmd);
        if (eval_cmd->parsed()) return run_eval(eval, *eval_cmd);
        if (plot_cmd->parsed()) return run_plot(plot, *plot_cmd);
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const lb::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const lb::NumericError& e) {
        std::cerr << "numeric abort: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const lb::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
