#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "latentbridge/tensor.hpp"

namespace lb {

// Handle into a Graph's tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape over Tensor<T>. Ops append nodes eagerly; backward walks
// the tape in reverse creation order, which is a valid topological order since
// ops only reference earlier nodes. Nodes whose ancestors include no
// grad-requiring leaf record no closure, so inference-only passes cost little.
template <typename T>
class Graph {
public:
    using BackwardFn = std::function<void(Graph&, int)>;

    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        BackwardFn backward;
        bool requires_grad = false;
        bool grad_ready = false;
    };

    // When set, every op result is checked for NaN/Inf and the offending op is
    // named; used by the gradient-check harness.
    bool check_finite = false;

    Var leaf(Tensor<T> v, bool requires_grad = false) {
        nodes_.push_back(Node{std::move(v), {}, nullptr, requires_grad, false});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    Var make(Tensor<T> v, bool requires_grad, BackwardFn bw, const char* opname) {
        if (check_finite && !v.all_finite())
            throw NumericError(std::string("non-finite output of op '") + opname + "'");
        nodes_.push_back(Node{std::move(v), {}, requires_grad ? std::move(bw) : nullptr,
                              requires_grad, false});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    const Tensor<T>& val(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }

    T scalar(Var v) const {
        const Tensor<T>& t = val(v);
        if (t.numel() != 1) throw ShapeError("scalar() on tensor " + shape_str(t.shape));
        return t.data[0];
    }

    bool requires_grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].requires_grad; }

    // Zero-initialized gradient accumulator for a node.
    Tensor<T>& grad_buf(int id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!n.grad_ready) {
            n.grad = Tensor<T>::zeros(n.value.shape);
            n.grad_ready = true;
        }
        return n.grad;
    }

    // Gradient of the last backward() root w.r.t. node v (zeros if unreached).
    const Tensor<T>& grad(Var v) { return grad_buf(v.id); }

    void backward(Var root) {
        Node& r = nodes_[static_cast<size_t>(root.id)];
        if (r.value.numel() != 1)
            throw ShapeError("backward() root must be scalar, got " + shape_str(r.value.shape));
        for (auto& n : nodes_) {
            n.grad = {};
            n.grad_ready = false;
        }
        grad_buf(root.id).data[0] = T(1);
        for (int id = root.id; id >= 0; --id) {
            Node& n = nodes_[static_cast<size_t>(id)];
            if (n.grad_ready && n.backward) n.backward(*this, id);
        }
    }

    size_t size() const { return nodes_.size(); }

private:
    std::vector<Node> nodes_;
};

}  // namespace lb
