#pragma once

// Two-stage training loop.  Stage one fits the twin autoencoders on unpaired
// batches from both domains; stage two freezes the image decoders and fits a
// depth or class-map head on paired sim data plus unpaired real batches.
// Every stage runs its own fresh optimizer over an explicit trainable-group
// list; everything else stays bitwise untouched.
//
// Determinism: epoch shuffles and per-step loss seeds derive from
// (plan seed, stage, epoch[, step]) alone, so a run is reproducible from its
// plan and data, and a resumed run continues the exact stream.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "latentbridge/checkpoint.hpp"
#include "latentbridge/losses.hpp"
#include "latentbridge/model.hpp"
#include "latentbridge/optim.hpp"

namespace lb {

enum class Stage { one, two_depth, two_seg };

inline const char* stage_tag(Stage s) {
    switch (s) {
        case Stage::one: return "stage1";
        case Stage::two_depth: return "stage2-depth";
        case Stage::two_seg: return "stage2-seg";
    }
    return "?";
}

inline Stage stage_from_tag(const std::string& tag) {
    if (tag == "stage1") return Stage::one;
    if (tag == "stage2-depth") return Stage::two_depth;
    if (tag == "stage2-seg") return Stage::two_seg;
    throw ConfigError("unknown stage '" + tag + "' (valid: stage1, stage2-depth, stage2-seg)");
}

// Stage one trains both domain pairs and the shared block; stage two trains
// the encoders, the shared block, and the task head, with the image decoders
// frozen (they only generate cross-domain pseudo-data).
inline std::vector<std::string> default_trainable(Stage s) {
    switch (s) {
        case Stage::one: return {"enc_r", "enc_s", "dec_r", "dec_s", "shared"};
        case Stage::two_depth: return {"enc_r", "enc_s", "shared", "dec_depth"};
        case Stage::two_seg: return {"enc_r", "enc_s", "shared", "dec_seg"};
    }
    return {};
}

struct StagePlan {
    Stage stage = Stage::one;
    std::vector<std::string> trainable_groups;  // empty -> default_trainable(stage)
    int epochs = 1;
    int batch_size = 4;
    uint64_t seed = 0;
    AdamConfig adam;
    LossOptions loss;

    std::vector<std::string> groups() const {
        return trainable_groups.empty() ? default_trainable(stage) : trainable_groups;
    }
};

// In-memory training arrays.  Depth maps are expected in the depth head's
// output coding (see normalize_depth); label maps hold class ids.
template <typename T>
struct TrainingData {
    Tensor<T> real_rgb{Shape{0}};
    Tensor<T> sim_rgb{Shape{0}};
    Tensor<T> sim_depth{Shape{0}};
    Tensor<int32_t> sim_seg{Shape{0}};
};

struct StageResult {
    int steps = 0;
    int64_t skipped = 0;
    double first_total = std::numeric_limits<double>::quiet_NaN();
    double last_total = std::numeric_limits<double>::quiet_NaN();
    std::string last_checkpoint;
};

namespace detail {

inline uint64_t stage_index(Stage s) { return static_cast<uint64_t>(s); }

template <typename T>
void require_stage_data(const TrainingData<T>& d, Stage s) {
    if (d.real_rgb.numel() == 0 || d.sim_rgb.numel() == 0)
        throw DataError("training data must contain both real and sim images");
    if (s == Stage::two_depth && d.sim_depth.numel() == 0)
        throw DataError("depth stage needs paired sim depth maps");
    if (s == Stage::two_seg && d.sim_seg.numel() == 0)
        throw DataError("class-map stage needs paired sim label maps");
    if (s == Stage::two_depth && d.sim_depth.dim(0) != d.sim_rgb.dim(0))
        throw DataError("sim depth maps are not paired 1:1 with sim images");
    if (s == Stage::two_seg && d.sim_seg.dim(0) != d.sim_rgb.dim(0))
        throw DataError("sim label maps are not paired 1:1 with sim images");
}

inline std::vector<int64_t> shuffled_indices(int64_t n, Rng& rng) {
    std::vector<int64_t> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), int64_t{0});
    rng.shuffle(idx.begin(), idx.end());
    return idx;
}

inline std::vector<int64_t> slice(const std::vector<int64_t>& perm, int64_t start, int64_t count,
                                  bool wrap) {
    std::vector<int64_t> out(static_cast<size_t>(count));
    const int64_t n = static_cast<int64_t>(perm.size());
    for (int64_t i = 0; i < count; ++i)
        out[static_cast<size_t>(i)] = perm[static_cast<size_t>(wrap ? (start + i) % n : start + i)];
    return out;
}

}  // namespace detail

// One stage over the data.  Appends a JSON line per step to `log` (if given)
// and writes `<run_dir>/<stage-tag>-epoch<k>.ckpt` with optimizer state after
// each epoch.  `start_epoch` supports resuming mid-stage.
template <typename T>
StageResult run_stage(ModelBundle<T>& model, const TrainingData<T>& data, const StagePlan& plan,
                      const std::string& run_dir, int plan_index = 0, std::ostream* log = nullptr,
                      Adam<T>* optim = nullptr, int start_epoch = 0) {
    detail::require_stage_data(data, plan.stage);
    // a poisoned checkpoint or init produces runs where every step is silently
    // skipped; reject it up front with the offending parameter's name
    for (const auto& name : model.order)
        for (int64_t i = 0; i < model.params.at(name)->numel(); ++i)
            if (!std::isfinite((*model.params.at(name))[i]))
                throw NumericError(std::string(stage_tag(plan.stage)) + ": parameter '" + name +
                                   "' is not finite at stage start");
    std::filesystem::create_directories(run_dir);
    Adam<T> local_optim(plan.adam);
    Adam<T>& opt = optim ? *optim : local_optim;

    const auto groups = plan.groups();
    auto trainable = [&groups](const std::string& canonical) {
        const std::string g = ModelBundle<T>::group_of(canonical);
        return std::find(groups.begin(), groups.end(), g) != groups.end();
    };

    const int64_t n_real = data.real_rgb.dim(0);
    const int64_t n_sim = data.sim_rgb.dim(0);
    const int64_t b = plan.batch_size;
    if (b < 1 || b > n_real || b > n_sim)
        throw ConfigError("batch size " + std::to_string(b) + " exceeds dataset (" +
                          std::to_string(n_real) + " real / " + std::to_string(n_sim) + " sim)");
    // full batches only; stage 2 walks the paired sim set and wraps real
    const int64_t steps_per_epoch =
        plan.stage == Stage::one ? std::min(n_real, n_sim) / b : n_sim / b;
    if (steps_per_epoch < 1) throw ConfigError("not enough samples for a single batch");

    const uint64_t sidx = detail::stage_index(plan.stage);
    StageResult result;
    for (int epoch = start_epoch; epoch < plan.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(plan.seed, {sidx, static_cast<uint64_t>(epoch)}));
        auto perm_r = detail::shuffled_indices(n_real, shuffle_rng);
        auto perm_s = detail::shuffled_indices(n_sim, shuffle_rng);

        for (int64_t step = 0; step < steps_per_epoch; ++step) {
            const auto t0 = std::chrono::steady_clock::now();
            const uint64_t step_seed = derive_seed(
                plan.seed, {sidx, static_cast<uint64_t>(epoch), static_cast<uint64_t>(step)});
            const auto idx_r = detail::slice(perm_r, step * b, b, /*wrap=*/plan.stage != Stage::one);
            const auto idx_s = detail::slice(perm_s, step * b, b, false);
            Tensor<T> x_r = select_batch(data.real_rgb, idx_r);
            Tensor<T> x_s = select_batch(data.sim_rgb, idx_s);

            Graph<T> g;
            ModelForward<T> f(g, model, trainable);
            Rng rng(step_seed);
            loss::StageLoss sl;
            switch (plan.stage) {
                case Stage::one:
                    sl = loss::stage1_terms(g, f, g.leaf(x_r), g.leaf(x_s), rng, plan.loss);
                    break;
                case Stage::two_depth: {
                    Tensor<T> d_t = select_batch(data.sim_depth, idx_s);
                    sl = loss::stage2_depth_terms(g, f, g.leaf(x_s), g.leaf(d_t), g.leaf(x_r),
                                                  rng, plan.loss);
                    break;
                }
                case Stage::two_seg: {
                    Tensor<int32_t> seg_t = select_batch(data.sim_seg, idx_s);
                    sl = loss::stage2_seg_terms(g, f, g.leaf(x_s), seg_t, g.leaf(x_r), rng,
                                                plan.loss);
                    break;
                }
            }
            if (auto bad = sl.report.first_non_finite())
                throw NumericError(std::string(stage_tag(plan.stage)) + " epoch " +
                                   std::to_string(epoch) + " step " + std::to_string(step) +
                                   ": loss term '" + *bad + "' is not finite");
            g.backward(sl.total);

            std::map<std::string, Tensor<T>> grads;
            for (const auto& [name, var] : f.bound())
                if (trainable(name)) grads.emplace(name, g.grad(var));
            opt.step(model, grads);

            const double wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
            if (log) {
                nlohmann::json line = sl.report.to_json();
                line["stage"] = stage_tag(plan.stage);
                line["plan"] = plan_index;
                line["epoch"] = epoch;
                line["step"] = step;
                line["wall_ms"] = wall_ms;
                line["skipped"] = opt.skipped();
                *log << line.dump() << "\n";
                log->flush();
            }
            if (result.steps == 0) result.first_total = sl.report.total;
            result.last_total = sl.report.total;
            ++result.steps;
        }

        const std::string ckpt = run_dir + "/" + stage_tag(plan.stage) + "-epoch" +
                                 std::to_string(epoch) + ".ckpt";
        nlohmann::json meta = {{"stage", stage_tag(plan.stage)},
                               {"plan_index", plan_index},
                               {"epoch", epoch},
                               {"optim", opt.export_meta()}};
        save_checkpoint(model, ckpt, opt.export_state(), meta);
        result.last_checkpoint = ckpt;
    }
    result.skipped = opt.skipped();
    return result;
}

// Run a schedule of stages, optionally resuming from a checkpoint written by
// an earlier run of the same schedule.  Resume restores parameters and
// optimizer state, then continues after the recorded epoch; later stages
// start fresh optimizers as usual.
template <typename T>
std::vector<StageResult> train_full(ModelBundle<T>& model, const TrainingData<T>& data,
                                    const std::vector<StagePlan>& schedule,
                                    const std::string& run_dir,
                                    const std::string& resume_path = "") {
    std::filesystem::create_directories(run_dir);
    std::ofstream log(run_dir + "/train_log.jsonl", std::ios::app);

    int resume_plan = 0;
    int resume_epoch = -1;
    std::map<std::string, Tensor<T>> resume_extras;
    nlohmann::json resume_meta;
    if (!resume_path.empty()) {
        load_checkpoint_into(model, resume_path, &resume_extras, &resume_meta);
        resume_plan = resume_meta.value("plan_index", 0);
        resume_epoch = resume_meta.value("epoch", -1);
        if (resume_plan < 0 || resume_plan >= static_cast<int>(schedule.size()))
            throw CheckpointError("resume checkpoint plan index " +
                                  std::to_string(resume_plan) + " is outside the schedule");
    }

    std::vector<StageResult> results;
    for (int p = 0; p < static_cast<int>(schedule.size()); ++p) {
        if (!resume_path.empty() && p < resume_plan) continue;
        const StagePlan& plan = schedule[static_cast<size_t>(p)];
        Adam<T> opt(plan.adam);
        int start_epoch = 0;
        if (!resume_path.empty() && p == resume_plan) {
            start_epoch = resume_epoch + 1;
            if (start_epoch >= plan.epochs) continue;  // stage already complete
            opt.import_state(resume_extras, resume_meta.value("optim", nlohmann::json::object()));
        }
        results.push_back(run_stage(model, data, plan, run_dir, p, &log, &opt, start_epoch));
    }
    return results;
}

}  // namespace lb
