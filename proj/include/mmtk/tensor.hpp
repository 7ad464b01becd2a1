// tensor.hpp
// Dense f64 tensor with reverse-mode autodiff. Tensors are value-semantic
// handles onto shared storage; ops in ops.hpp grow a graph of backward
// closures that backward() replays in reverse topological order.
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "mmtk/common.hpp"

namespace mmtk {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        require(d > 0, "tensor dimensions must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

struct TensorImpl;

struct GradNode {
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::function<void(TensorImpl&)> backward;  // accumulates into parents' grad
};

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until backward touches this tensor
    bool requires_grad = false;
    std::unique_ptr<GradNode> node;  // null for leaves and constants

    std::size_t numel() const { return data.size(); }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto impl = std::make_shared<TensorImpl>();
        std::size_t n = shape_numel(shape);
        impl->shape = std::move(shape);
        impl->data.assign(n, 0.0);
        impl->requires_grad = requires_grad;
        return Tensor(std::move(impl));
    }

    static Tensor from_data(Shape shape, std::vector<double> values, bool requires_grad = false) {
        std::size_t n = shape_numel(shape);
        require(values.size() == n, "data length does not match shape " + shape_str(shape));
        for (double v : values)
            require(std::isfinite(v), "non-finite value in tensor data");
        auto impl = std::make_shared<TensorImpl>();
        impl->shape = std::move(shape);
        impl->data = std::move(values);
        impl->requires_grad = requires_grad;
        return Tensor(std::move(impl));
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        return from_data({1}, {v}, requires_grad);
    }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(impl_->shape.size()); }
    std::size_t numel() const { return impl_->numel(); }
    bool requires_grad() const { return impl_->requires_grad; }

    std::vector<double>& data() { return impl_->data; }
    const std::vector<double>& data() const { return impl_->data; }
    double* ptr() { return impl_->data.data(); }
    const double* ptr() const { return impl_->data.data(); }

    // rows/cols of a matrix (ndim 1 tensors are 1 x n row vectors)
    int rows() const { return ndim() == 1 ? 1 : dim(0); }
    int cols() const { return ndim() == 1 ? dim(0) : dim(ndim() - 1); }

    double item() const {
        require(numel() == 1, "item() expects a single-element tensor, got " + shape_str(shape()));
        return impl_->data[0];
    }

    const std::vector<double>& grad() const {
        require(impl_->grad.size() == impl_->data.size(), "gradient not populated; run backward first");
        return impl_->grad;
    }
    bool has_grad() const { return impl_->grad.size() == impl_->data.size(); }
    void zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }

    std::shared_ptr<TensorImpl> impl() const { return impl_; }
    TensorImpl& raw() const { return *impl_; }

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

    std::shared_ptr<TensorImpl> impl_;

    friend Tensor make_op_output(Shape shape, std::vector<const Tensor*> parents,
                                 std::function<void(TensorImpl&)> backward);
};

// Allocates the output of an op and wires its backward closure when any
// parent participates in the graph.
inline Tensor make_op_output(Shape shape, std::vector<const Tensor*> parents,
                             std::function<void(TensorImpl&)> backward) {
    auto impl = std::make_shared<TensorImpl>();
    std::size_t n = shape_numel(shape);
    impl->shape = std::move(shape);
    impl->data.assign(n, 0.0);
    bool needs = false;
    for (const Tensor* p : parents)
        if (p->requires_grad()) needs = true;
    if (needs) {
        impl->requires_grad = true;
        impl->node = std::make_unique<GradNode>();
        for (const Tensor* p : parents) impl->node->parents.push_back(p->impl());
        impl->node->backward = std::move(backward);
    }
    return Tensor(std::move(impl));
}

// NaN/Inf is surfaced at the op that produced it, never propagated.
inline void check_finite(const Tensor& t, const char* op) {
    for (double v : t.data())
        if (!std::isfinite(v)) fail(std::string(op) + ": produced a non-finite value");
}

// Reverse-mode sweep from a scalar loss. Accumulates d loss / d leaf into
// every reachable leaf's grad (callers zero grads beforehand as needed).
inline void backward(const Tensor& loss) {
    require(loss.numel() == 1, "backward expects a scalar loss, got shape " + shape_str(loss.shape()));
    if (!loss.requires_grad()) return;

    // iterative post-order DFS over the graph
    std::vector<TensorImpl*> order;
    std::unordered_set<TensorImpl*> visited;
    std::vector<std::pair<TensorImpl*, std::size_t>> stack;
    stack.emplace_back(loss.impl().get(), 0);
    visited.insert(loss.impl().get());
    while (!stack.empty()) {
        auto& [impl, next] = stack.back();
        if (impl->node && next < impl->node->parents.size()) {
            TensorImpl* parent = impl->node->parents[next++].get();
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(impl);
            stack.pop_back();
        }
    }

    for (TensorImpl* impl : order) impl->ensure_grad();
    loss.impl()->grad[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl* impl = *it;
        if (impl->node && impl->node->backward) impl->node->backward(*impl);
    }
}

}  // namespace mmtk
