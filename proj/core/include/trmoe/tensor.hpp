// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Dense 64-bit tensors with a reverse-mode differentiation tape.
//
// A Tensor is a cheap handle to a shared node. Primitives in ops.hpp create
// new nodes and, when any input requires a gradient (and recording is not
// disabled by a NoGradGuard), remember their inputs together with the
// adjoint rule. backward() walks the recorded DAG once in reverse
// topological order. Leaf gradients accumulate until zero_grad().

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace trmoe {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    // Propagates this node's grad into the grads of `inputs`.
    std::function<void(Node&)> backward;

    bool is_leaf() const noexcept { return inputs.empty(); }
    std::vector<double>& ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
        return grad;
    }
};

}  // namespace detail

class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor vector(std::vector<double> values, bool requires_grad = false);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                         bool requires_grad = false);
    static Tensor eye(std::size_t n);

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const { return shape().at(axis); }
    std::size_t size() const;

    std::span<const double> data() const;
    // Direct write access, used for parameter updates and initialisation.
    // Never mutate a tensor that already participates in a recorded graph.
    std::span<double> mutable_data();
    double item() const;
    double at(std::size_t i) const { return data()[i]; }
    double at(std::size_t row, std::size_t col) const;

    bool requires_grad() const;
    void set_requires_grad(bool flag);
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    // Copy of the values with no history.
    Tensor detach() const;
    const char* op_name() const;

    const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

/// Recorded primitive applications reachable from a root, ordered so that
/// every node's inputs precede it.
class Tape {
public:
    static Tape record(const Tensor& root);

    std::size_t size() const noexcept { return nodes_.size(); }
    const std::vector<detail::Node*>& nodes() const noexcept { return nodes_; }

    // Seeds the root adjoint with 1 and runs every adjoint rule once, last
    // node first.
    void run_backward();

private:
    std::vector<detail::Node*> nodes_;
    std::shared_ptr<detail::Node> root_;
};

/// Accumulates d(loss)/d(leaf) into every leaf that requires a gradient.
/// Throws ShapeError unless `loss` holds exactly one element.
void backward(const Tensor& loss);

bool grad_enabled() noexcept;

/// Disables recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

}  // namespace trmoe
