// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include "trmoe/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "trmoe/errors.hpp"

namespace trmoe {

namespace {
thread_local bool t_grad_enabled = true;

const detail::Node& require(const std::shared_ptr<detail::Node>& node) {
    if (!node) throw Error("use of an undefined tensor");
    return *node;
}
}  // namespace

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape.empty()) throw ShapeError("tensor: rank must be at least 1");
    for (auto d : shape)
        if (d == 0) throw ShapeError("tensor: zero-sized dimension in " + shape_str(shape));
    if (numel(shape) != values.size())
        throw ShapeError("tensor: shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
    node_ = std::make_shared<detail::Node>();
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const auto n = numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
    const auto n = values.size();
    return Tensor({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
    return Tensor({rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::eye(std::size_t n) {
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
    return matrix(n, n, std::move(v));
}

const Shape& Tensor::shape() const { return require(node_).shape; }
std::size_t Tensor::size() const { return require(node_).value.size(); }
std::span<const double> Tensor::data() const { return require(node_).value; }
std::span<double> Tensor::mutable_data() {
    require(node_);
    return node_->value;
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
    return node_->value[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
    const auto& s = shape();
    if (s.size() != 2) throw ShapeError("at(row, col): tensor is not rank 2");
    return node_->value[row * s[1] + col];
}

bool Tensor::requires_grad() const { return require(node_).requires_grad; }

void Tensor::set_requires_grad(bool flag) {
    require(node_);
    node_->requires_grad = flag;
    if (!flag) node_->grad.clear();
}

bool Tensor::has_grad() const { return !require(node_).grad.empty(); }

std::span<const double> Tensor::grad() const { return require(node_).grad; }

std::span<double> Tensor::mutable_grad() {
    require(node_);
    return node_->ensure_grad();
}

void Tensor::zero_grad() {
    require(node_);
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    const auto& n = require(node_);
    return Tensor(n.shape, n.value, false);
}

const char* Tensor::op_name() const { return require(node_).op; }

Tape Tape::record(const Tensor& root) {
    Tape tape;
    tape.root_ = root.node();
    if (!root.defined() || !root.requires_grad()) return tape;

    // Iterative post-order DFS; a node is emitted after all of its inputs.
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            detail::Node* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            tape.nodes_.push_back(node);
            stack.pop_back();
        }
    }
    return tape;
}

void Tape::run_backward() {
    if (nodes_.empty()) return;
    for (auto* node : nodes_)
        if (!node->is_leaf()) node->grad.assign(node->value.size(), 0.0);
    nodes_.back()->ensure_grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        detail::Node* node = *it;
        if (node->backward) node->backward(*node);
    }
    for (auto* node : nodes_)
        if (!node->is_leaf()) {
            node->grad.clear();
            node->grad.shrink_to_fit();
        }
}

void backward(const Tensor& loss) {
    if (!loss.defined()) throw Error("backward: undefined loss");
    if (loss.size() != 1)
        throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    Tape::record(loss).run_backward();
}

bool grad_enabled() noexcept { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

}  // namespace trmoe
