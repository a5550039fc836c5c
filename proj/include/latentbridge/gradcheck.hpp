#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "latentbridge/graph.hpp"
#include "latentbridge/rng.hpp"
#include "latentbridge/tensor.hpp"

// Central-difference gradient checking against the tape. The error metric is
// per input tensor: max_i |analytic_i - numeric_i| normalized by the larger of
// the two gradients' infinity norms (floored at 1e-8).

namespace lb {

template <typename T>
using GraphFn = std::function<Var(Graph<T>&, const std::vector<Var>&)>;

template <typename T>
T eval_fn(const GraphFn<T>& fn, const std::vector<Tensor<T>>& inputs) {
    Graph<T> g;
    std::vector<Var> vars;
    vars.reserve(inputs.size());
    for (const auto& t : inputs) vars.push_back(g.leaf(t, false));
    return g.scalar(fn(g, vars));
}

template <typename T>
std::vector<Tensor<T>> analytic_grads(const GraphFn<T>& fn, const std::vector<Tensor<T>>& inputs) {
    Graph<T> g;
    std::vector<Var> vars;
    vars.reserve(inputs.size());
    for (const auto& t : inputs) vars.push_back(g.leaf(t, true));
    g.backward(fn(g, vars));
    std::vector<Tensor<T>> grads;
    grads.reserve(vars.size());
    for (Var v : vars) grads.push_back(g.grad(v));
    return grads;
}

struct GradCheckReport {
    double max_rel_err = 0.0;
    size_t worst_input = 0;
    int64_t worst_index = -1;
};

// Coordinates where both gradients are below this are counted as agreeing:
// an analytically-zero gradient (e.g. a conv bias feeding a mean-subtracting
// norm) leaves the finite difference as pure cancellation noise.
constexpr double kGradZeroTol = 1e-7;

namespace detail {

template <typename T>
double inf_norm(const Tensor<T>& t) {
    double m = 0.0;
    for (int64_t i = 0; i < t.numel(); ++i) m = std::max(m, std::abs(double(t[i])));
    return m;
}

inline void update_report(GradCheckReport& rep, size_t input, int64_t index, double analytic,
                          double numeric, double scale) {
    if (std::abs(analytic) < kGradZeroTol && std::abs(numeric) < kGradZeroTol) return;
    double err = std::abs(analytic - numeric) / scale;
    if (err > rep.max_rel_err) {
        rep.max_rel_err = err;
        rep.worst_input = input;
        rep.worst_index = index;
    }
}

}  // namespace detail

// Exhaustive check: every coordinate of every input.
template <typename T>
GradCheckReport grad_check(const GraphFn<T>& fn, std::vector<Tensor<T>> inputs,
                           T step = T(1e-5)) {
    const auto grads = analytic_grads(fn, inputs);
    GradCheckReport rep;
    for (size_t k = 0; k < inputs.size(); ++k) {
        Tensor<T> numeric(inputs[k].shape);
        for (int64_t i = 0; i < inputs[k].numel(); ++i) {
            const T orig = inputs[k][i];
            inputs[k][i] = orig + step;
            const T fp = eval_fn(fn, inputs);
            inputs[k][i] = orig - step;
            const T fm = eval_fn(fn, inputs);
            inputs[k][i] = orig;
            numeric[i] = (fp - fm) / (T(2) * step);
        }
        const double scale =
            std::max({detail::inf_norm(grads[k]), detail::inf_norm(numeric), 1e-8});
        for (int64_t i = 0; i < inputs[k].numel(); ++i)
            detail::update_report(rep, k, i, double(grads[k][i]), double(numeric[i]), scale);
    }
    return rep;
}

// Sampled check for large parameter sets: `coords` random coordinates per
// input, numeric differences only at those.
template <typename T>
GradCheckReport grad_check_sampled(const GraphFn<T>& fn, std::vector<Tensor<T>> inputs,
                                   int coords, uint64_t seed, T step = T(1e-5)) {
    const auto grads = analytic_grads(fn, inputs);
    Rng rng(seed);
    GradCheckReport rep;
    for (size_t k = 0; k < inputs.size(); ++k) {
        const int64_t n = inputs[k].numel();
        const int64_t picks = std::min<int64_t>(coords, n);
        double num_norm = 0.0;
        std::vector<std::pair<int64_t, double>> samples;
        samples.reserve(static_cast<size_t>(picks));
        for (int64_t s = 0; s < picks; ++s) {
            const int64_t i = rng.uniform_int(int64_t(0), n - 1);
            const T orig = inputs[k][i];
            inputs[k][i] = orig + step;
            const T fp = eval_fn(fn, inputs);
            inputs[k][i] = orig - step;
            const T fm = eval_fn(fn, inputs);
            inputs[k][i] = orig;
            const double numeric = double(fp - fm) / double(T(2) * step);
            num_norm = std::max(num_norm, std::abs(numeric));
            samples.emplace_back(i, numeric);
        }
        const double scale = std::max({detail::inf_norm(grads[k]), num_norm, 1e-8});
        for (const auto& [i, numeric] : samples)
            detail::update_report(rep, k, i, double(grads[k][i]), numeric, scale);
    }
    return rep;
}

}  // namespace lb
