// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable primitives. Every function records itself on the tape when
// one of its inputs requires a gradient. Shape violations throw ShapeError
// naming the primitive and the offending shapes.

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "trmoe/tensor.hpp"

namespace trmoe {

using Rng = std::mt19937_64;

enum class Mode { Train, Eval };

// N(0, std²) entries drawn from `rng` in row-major order.
Tensor randn(Shape shape, double std, Rng& rng, bool requires_grad = true);

// Linear algebra. Operands are rank 2.
Tensor matmul(const Tensor& a, const Tensor& b);
// a · bᵀ without materialising the transpose in the graph.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise with broadcasting over leading axes: the smaller operand's
// shape must equal a trailing suffix of the larger one's.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
// Multiplies every entry of `a` by the single entry of `factor`.
Tensor scale(const Tensor& a, const Tensor& factor);

Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
// Throws DomainError for entries <= 0.
Tensor log(const Tensor& a);
// Throws DomainError for negative entries.
Tensor sqrt(const Tensor& a);
// 1 / (a + eps). Throws DomainError where a + eps == 0.
Tensor reciprocal(const Tensor& a, double eps);

// Row gather: result row i is table row ids[i].
Tensor embedding(const Tensor& table, std::span<const int> ids);
// 1-D gather of entries.
Tensor take(const Tensor& a, std::span<const std::size_t> indices);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor reshape(const Tensor& a, Shape shape);

Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a, std::size_t axis);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

// Entries whose mask byte is nonzero are replaced by `value` and receive no
// gradient.
Tensor masked_fill(const Tensor& a, std::span<const std::uint8_t> mask, double value);

// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& logits, std::size_t axis);

// Classic layer normalisation over the last axis with a learnable gain and
// no bias: gain * (h - mean) / sqrt(var + eps).
Tensor layer_norm(const Tensor& h, const Tensor& gain, double eps = 1e-6);

// Inverted dropout. Identity in eval mode and for rate 0.
Tensor dropout(const Tensor& h, double rate, Mode mode, Rng* rng);

// uᵀv / (‖u‖‖v‖) as a one-element tensor. Throws DomainError on zero norm.
Tensor cosine_similarity(const Tensor& u, const Tensor& v);

// Sum over rows of -log softmax(logits[row])[targets[row]]; logits is
// [rows, vocab].
Tensor cross_entropy_sum(const Tensor& logits, std::span<const int> targets);

}  // namespace trmoe
