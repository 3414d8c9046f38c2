#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dsnet/common.hpp"

namespace dsnet {

/// Dense 4-D shape (batch, channels, height, width).
struct Shape4 {
    std::int64_t n = 0;
    std::int64_t c = 0;
    std::int64_t h = 0;
    std::int64_t w = 0;

    std::int64_t numel() const { return n * c * h * w; }

    bool operator==(const Shape4& o) const = default;

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

namespace detail {

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

/// One node of the define-by-run tape. Forward ops that see a
/// grad-requiring input attach parents and a backprop closure; backward()
/// replays the closures in reverse creation order.
struct TensorNode {
    Shape4 shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized lazily by backward()
    bool requires_grad = false;
    std::uint64_t seq = 0;
    std::vector<NodePtr> parents;
    std::function<void(TensorNode&)> backprop;

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

inline std::uint64_t next_seq() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

}  // namespace detail

/// Scoped guard that disables tape recording (evaluation-time forwards).
class NoGradGuard {
public:
    NoGradGuard() : prev_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
    ~NoGradGuard() { detail::grad_mode_flag() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

inline bool grad_mode_enabled() { return detail::grad_mode_flag(); }

/// Dense (n, c, h, w) tensor of 64-bit floats with optional participation
/// in the gradient tape. Copies are aliasing handles to the same storage,
/// as usual for define-by-run tensor types.
class Tensor {
public:
    Tensor() : node_(std::make_shared<detail::TensorNode>()) {}

    static Tensor zeros(Shape4 shape, bool requires_grad = false) {
        return filled(shape, 0.0, requires_grad);
    }

    static Tensor filled(Shape4 shape, double value, bool requires_grad = false) {
        check_shape(shape);
        Tensor t;
        t.node_->shape = shape;
        t.node_->data.assign(static_cast<std::size_t>(shape.numel()), value);
        t.node_->requires_grad = requires_grad;
        t.node_->seq = detail::next_seq();
        return t;
    }

    static Tensor from_data(Shape4 shape, std::vector<double> data, bool requires_grad = false) {
        check_shape(shape);
        if (static_cast<std::int64_t>(data.size()) != shape.numel()) {
            throw ContractError("Tensor::from_data: data length " + std::to_string(data.size()) +
                                " does not match shape " + shape.str());
        }
        Tensor t;
        t.node_->shape = shape;
        t.node_->data = std::move(data);
        t.node_->requires_grad = requires_grad;
        t.node_->seq = detail::next_seq();
        return t;
    }

    /// Scalar (1,1,1,1) tensor.
    static Tensor scalar(double value, bool requires_grad = false) {
        return filled({1, 1, 1, 1}, value, requires_grad);
    }

    const Shape4& shape() const { return node_->shape; }
    std::int64_t numel() const { return node_->shape.numel(); }
    bool is_scalar() const { return numel() == 1; }

    double* data() { return node_->data.data(); }
    const double* data() const { return node_->data.data(); }
    std::vector<double>& vec() { return node_->data; }
    const std::vector<double>& vec() const { return node_->data; }

    double& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
        return node_->data[static_cast<std::size_t>(index(n, c, h, w))];
    }
    double at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
        return node_->data[static_cast<std::size_t>(index(n, c, h, w))];
    }

    double item() const {
        if (!is_scalar()) {
            throw ContractError("Tensor::item: tensor of shape " + shape().str() + " is not scalar");
        }
        return node_->data[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) { node_->requires_grad = v; }

    /// Gradient buffer filled in by the most recent backward(); empty if
    /// this tensor was not reached.
    const std::vector<double>& grad() const { return node_->grad; }
    std::vector<double>& grad() { return node_->grad; }

    /// True when both handles alias the same storage.
    bool same_storage(const Tensor& other) const { return node_ == other.node_; }

    /// Deep copy detached from the tape.
    Tensor clone() const {
        Tensor t;
        t.node_->shape = node_->shape;
        t.node_->data = node_->data;
        t.node_->requires_grad = false;
        t.node_->seq = detail::next_seq();
        return t;
    }

    std::int64_t index(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
        const Shape4& s = node_->shape;
        return ((n * s.c + c) * s.h + h) * s.w + w;
    }

    detail::NodePtr node() const { return node_; }

private:
    static void check_shape(const Shape4& s) {
        if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
            throw ContractError("Tensor: negative dimension in shape " + s.str());
        }
    }

    detail::NodePtr node_;
};

namespace detail {

/// Marks `out` as a tape node with the given parents when grad mode is on
/// and any parent requires grad. `make_backprop` is only invoked when the
/// node is actually recorded, so closures are never built for pure inference.
template <typename F>
inline void record(Tensor& out, std::vector<Tensor> parents, F&& make_backprop) {
    if (!grad_mode_flag()) return;
    bool any = false;
    for (const Tensor& p : parents) {
        if (p.requires_grad()) {
            any = true;
            break;
        }
    }
    if (!any) return;
    NodePtr node = out.node();
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const Tensor& p : parents) node->parents.push_back(p.node());
    node->backprop = make_backprop();
}

}  // namespace detail

}  // namespace dsnet
