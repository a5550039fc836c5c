#pragma once

// Adam with bias correction, keyed by canonical parameter name.  A step with
// any non-finite gradient is skipped in full (counted, no state advance), so
// one bad batch cannot poison the moment estimates.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "latentbridge/model.hpp"
#include "latentbridge/tensor.hpp"

namespace lb {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
class Adam {
  public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    int64_t steps() const { return t_; }
    int64_t skipped() const { return skipped_; }

    // Apply one update from canonical-name -> gradient.  Returns false (and
    // advances nothing) if any gradient contains a non-finite value.
    bool step(ModelBundle<T>& model, const std::map<std::string, Tensor<T>>& grads) {
        for (const auto& [name, g] : grads)
            if (!g.all_finite()) {
                ++skipped_;
                return false;
            }
        ++t_;
        const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
        const T lr = static_cast<T>(cfg_.lr), eps = static_cast<T>(cfg_.eps);
        const T c1 = T(1) - static_cast<T>(std::pow(cfg_.beta1, static_cast<double>(t_)));
        const T c2 = T(1) - static_cast<T>(std::pow(cfg_.beta2, static_cast<double>(t_)));
        for (const auto& [name, g] : grads) {
            Tensor<T>& theta = model.at(name);
            require_shape(g, theta.shape, "adam step");
            auto it = slots_.find(name);
            if (it == slots_.end())
                it = slots_
                         .emplace(name, Slot{Tensor<T>::zeros(theta.shape),
                                             Tensor<T>::zeros(theta.shape)})
                         .first;
            Slot& s = it->second;
            require_shape(s.m, theta.shape, ("adam moment '" + name + "'").c_str());
            for (int64_t i = 0; i < theta.numel(); ++i) {
                s.m[i] = b1 * s.m[i] + (T(1) - b1) * g[i];
                s.v[i] = b2 * s.v[i] + (T(1) - b2) * g[i] * g[i];
                const T mhat = s.m[i] / c1;
                const T vhat = s.v[i] / c2;
                theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
        return true;
    }

    // Moment tensors under "optim/m/<name>" and "optim/v/<name>", for
    // embedding in a checkpoint's extra section.
    std::map<std::string, Tensor<T>> export_state() const {
        std::map<std::string, Tensor<T>> out;
        for (const auto& [name, s] : slots_) {
            out.emplace("optim/m/" + name, s.m);
            out.emplace("optim/v/" + name, s.v);
        }
        return out;
    }
    nlohmann::json export_meta() const { return {{"t", t_}, {"skipped", skipped_}}; }

    void import_state(const std::map<std::string, Tensor<T>>& extras,
                      const nlohmann::json& meta) {
        slots_.clear();
        for (const auto& [key, t] : extras) {
            if (key.rfind("optim/m/", 0) == 0)
                slots_[key.substr(8)].m = t;
            else if (key.rfind("optim/v/", 0) == 0)
                slots_[key.substr(8)].v = t;
        }
        for (const auto& [name, s] : slots_)
            if (s.m.shape != s.v.shape)
                throw CheckpointError("optimizer state for '" + name +
                                      "' has mismatched moment shapes");
        t_ = meta.value("t", int64_t{0});
        skipped_ = meta.value("skipped", int64_t{0});
    }

  private:
    struct Slot {
        Tensor<T> m{Shape{1}};
        Tensor<T> v{Shape{1}};
    };
    AdamConfig cfg_;
    std::map<std::string, Slot> slots_;
    int64_t t_ = 0;
    int64_t skipped_ = 0;
};

}  // namespace lb
