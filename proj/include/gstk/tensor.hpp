#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "gstk/errors.hpp"

namespace gs {

// Dense row-major tensors with a define-by-run reverse-mode tape. A TensorT
// is a cheap handle onto a shared node; ops build fresh nodes whose backward
// closures accumulate into their parents. Training runs in float, gradient
// checks in double (TensorT<double>), so everything below is templated on the
// scalar.

using Shape = std::vector<std::size_t>;

// All tensor storage is 64-byte aligned. Vectorized kernels split work into a
// scalar peel and a SIMD body depending on pointer alignment, and the two can
// round differently; pinning the alignment makes every run take the same
// split, which the bitwise-reproducibility contract relies on.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
    }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept {
        return true;
    }
};

template <class S>
using Buffer = std::vector<S, AlignedAllocator<S>>;

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

// When set, every op output (and every gradient consumed by the optimizer) is
// scanned for NaN/Inf; a hit raises NumericError. Off by default.
bool& checked_mode();

// While alive, ops treat every input as constant: no tape is recorded.
// Forward-only evaluation paths use this to skip graph bookkeeping.
bool& grad_enabled();

struct NoGradGuard {
    NoGradGuard() : prev_(grad_enabled()) { grad_enabled() = false; }
    ~NoGradGuard() { grad_enabled() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

template <class S>
struct TensorNode {
    Shape shape;
    Buffer<S> value;
    Buffer<S> grad;  // empty until first needed
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode<S>>> parents;
    std::function<void(TensorNode<S>&)> backward_fn;

    std::size_t numel() const { return value.size(); }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), S(0));
    }
};

template <class S>
using NodePtr = std::shared_ptr<TensorNode<S>>;

template <class S>
class TensorT {
public:
    TensorT() = default;
    explicit TensorT(NodePtr<S> node) : node_(std::move(node)) {}

    static TensorT zeros(Shape shape) {
        auto n = std::make_shared<TensorNode<S>>();
        n->value.assign(shape_numel(shape), S(0));
        n->shape = std::move(shape);
        return TensorT(std::move(n));
    }

    static TensorT full(Shape shape, S v) {
        TensorT t = zeros(std::move(shape));
        for (S& x : t.node_->value) x = v;
        return t;
    }

    static TensorT scalar(S v) { return full({1}, v); }

    static TensorT from(Shape shape, std::vector<S> data) {
        if (shape_numel(shape) != data.size()) {
            throw ShapeError("tensor data has " + std::to_string(data.size()) +
                             " elements, shape " + shape_str(shape) + " wants " +
                             std::to_string(shape_numel(shape)));
        }
        auto n = std::make_shared<TensorNode<S>>();
        n->shape = std::move(shape);
        n->value.assign(data.begin(), data.end());
        return TensorT(std::move(n));
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->numel(); }
    std::size_t rank() const { return node_->shape.size(); }

    std::size_t rows() const { return node_->shape.size() == 1 ? 1 : node_->shape[0]; }
    std::size_t cols() const { return node_->shape.back(); }

    S* data() { return node_->value.data(); }
    const S* data() const { return node_->value.data(); }
    Buffer<S>& values() { return node_->value; }
    const Buffer<S>& values() const { return node_->value; }

    S& at(std::size_t i) { return node_->value[i]; }
    S at(std::size_t i) const { return node_->value[i]; }
    S& at(std::size_t r, std::size_t c) { return node_->value[r * cols() + c]; }
    S at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

    S item() const {
        if (numel() != 1) {
            throw RankError("item() on non-scalar tensor of shape " + shape_str(shape()));
        }
        return node_->value[0];
    }

    TensorT& set_requires_grad(bool b = true) {
        node_->requires_grad = b;
        return *this;
    }
    bool requires_grad() const { return node_->requires_grad; }

    // Gradient buffer, allocated (zero) on first access.
    Buffer<S>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    const Buffer<S>& grad() const {
        node_->ensure_grad();
        return node_->grad;
    }

    void zero_grad() { node_->grad.assign(node_->value.size(), S(0)); }

    const NodePtr<S>& node() const { return node_; }

private:
    NodePtr<S> node_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

template <class S>
void check_finite(const TensorNode<S>& n, const char* where) {
    for (S v : n.value) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(where) + " produced a non-finite value");
        }
    }
}

// Reverse-mode sweep from a scalar loss. Gradients of non-leaf nodes are
// reset per sweep; leaf (parameter) gradients accumulate across sweeps until
// zero_grad, which is what batch accumulation relies on.
template <class S>
void backward(const TensorT<S>& loss) {
    if (loss.numel() != 1) {
        throw RankError("backward expects a scalar loss, got shape " +
                        shape_str(loss.shape()));
    }

    // Iterative post-order DFS over parents.
    std::vector<TensorNode<S>*> order;
    std::unordered_set<TensorNode<S>*> seen;
    struct Frame {
        TensorNode<S>* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    TensorNode<S>* root = loss.node().get();
    if (root == nullptr) throw RankError("backward on an undefined tensor");
    if (!root->requires_grad) return;  // nothing reachable

    stack.push_back({root, 0});
    seen.insert(root);
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            TensorNode<S>* p = f.node->parents[f.next_parent++].get();
            if (p->requires_grad && seen.insert(p).second) {
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    for (TensorNode<S>* n : order) {
        if (n->backward_fn) n->grad.assign(n->value.size(), S(0));
    }
    root->ensure_grad();
    root->grad[0] += S(1);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode<S>* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

}  // namespace gs
