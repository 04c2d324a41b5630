// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include "trmoe/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

#include "trmoe/errors.hpp"

namespace trmoe {

namespace {

using detail::Node;

template <class Backward>
Tensor make_node(const char* op, Shape shape, std::vector<double> value,
                 std::initializer_list<const Tensor*> inputs, Backward&& bw) {
    auto node = std::make_shared<Node>();
    node->op = op;
    node->shape = std::move(shape);
    node->value = std::move(value);
    if (grad_enabled()) {
        bool need = false;
        for (const Tensor* t : inputs) need = need || t->requires_grad();
        if (need) {
            node->requires_grad = true;
            for (const Tensor* t : inputs) node->inputs.push_back(t->node());
            node->backward = std::forward<Backward>(bw);
        }
    }
    return Tensor(std::move(node));
}

// Accumulating kernels on row-major buffers.
// C[m,n] += A[m,k] · B[k,n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
             double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[k,n] += A[m,k]ᵀ · B[m,n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
             double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            double* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

std::vector<double> transposed(const double* a, std::size_t rows, std::size_t cols) {
    std::vector<double> t(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = a[i * cols + j];
    return t;
}

// C[m,n] += A[m,k] · B[n,k]ᵀ
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
             double* c) {
    const auto bt = transposed(b, n, k);
    gemm_nn(m, k, n, a, bt.data(), c);
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
    if (t.rank() != rank)
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
}

bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.begin(), small.end(), big.end() - static_cast<long>(small.size()));
}

struct AxisSplit {
    std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.len = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

void require_axis(const char* op, const Tensor& t, std::size_t axis) {
    if (axis >= t.rank())
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(t.shape()));
}

template <class Forward, class Derivative>
Tensor unary(const char* op, const Tensor& a, Forward f, Derivative df) {
    const auto x = a.data();
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    Node* an = a.node().get();
    return make_node(op, a.shape(), std::move(y), {&a}, [an, df](Node& self) {
        if (!an->requires_grad) return;
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += self.grad[i] * df(an->value[i], self.value[i]);
    });
}

// Elementwise binary op with leading-axis broadcasting. `f(big, small)`;
// `dbig`/`dsmall` give the local partials.
template <class F, class DBig, class DSmall>
Tensor broadcast_binary(const char* op, const Tensor& a, const Tensor& b, F f, DBig dbig,
                        DSmall dsmall) {
    const bool a_big = a.rank() >= b.rank();
    const Tensor& big = a_big ? a : b;
    const Tensor& small = a_big ? b : a;
    if (!is_suffix(small.shape(), big.shape())) mismatch(op, a, b);
    const auto bv = big.data();
    const auto sv = small.data();
    const std::size_t n = bv.size(), m = sv.size();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = f(bv[i], sv[i % m]);
    Node* bn = big.node().get();
    Node* sn = small.node().get();
    return make_node(op, big.shape(), std::move(y), {&a, &b}, [bn, sn, dbig, dsmall](Node& self) {
        const std::size_t n = bn->value.size(), m = sn->value.size();
        if (bn->requires_grad) {
            auto& g = bn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                g[i] += self.grad[i] * dbig(bn->value[i], sn->value[i % m]);
        }
        if (sn->requires_grad) {
            auto& g = sn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                g[i % m] += self.grad[i] * dsmall(bn->value[i], sn->value[i % m]);
        }
    });
}

Tensor reduce_axis(const char* op, const Tensor& a, std::size_t axis, double factor) {
    require_axis(op, a, axis);
    const auto s = split_axis(a.shape(), axis);
    Shape out_shape;
    for (std::size_t i = 0; i < a.rank(); ++i)
        if (i != axis) out_shape.push_back(a.shape()[i]);
    if (out_shape.empty()) out_shape.push_back(1);
    const auto x = a.data();
    std::vector<double> y(s.outer * s.inner, 0.0);
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t l = 0; l < s.len; ++l)
            for (std::size_t i = 0; i < s.inner; ++i)
                y[o * s.inner + i] += x[(o * s.len + l) * s.inner + i];
    for (auto& v : y) v *= factor;
    Node* an = a.node().get();
    return make_node(op, std::move(out_shape), std::move(y), {&a}, [an, s, factor](Node& self) {
        auto& g = an->ensure_grad();
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t l = 0; l < s.len; ++l)
                for (std::size_t i = 0; i < s.inner; ++i)
                    g[(o * s.len + l) * s.inner + i] += factor * self.grad[o * s.inner + i];
    });
}

}  // namespace

Tensor randn(Shape shape, double std, Rng& rng, bool requires_grad) {
    std::normal_distribution<double> dist(0.0, std);
    std::vector<double> v(numel(shape));
    for (auto& x : v) x = std > 0.0 ? dist(rng) : 0.0;
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank("matmul", a, 2);
    require_rank("matmul", b, 2);
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) mismatch("matmul", a, b);
    std::vector<double> c(m * n, 0.0);
    gemm_nn(m, k, n, a.data().data(), b.data().data(), c.data());
    Node* an = a.node().get();
    Node* bn = b.node().get();
    return make_node("matmul", {m, n}, std::move(c), {&a, &b}, [an, bn, m, k, n](Node& self) {
        if (an->requires_grad)
            gemm_nt(m, n, k, self.grad.data(), bn->value.data(), an->ensure_grad().data());
        if (bn->requires_grad)
            gemm_tn(m, k, n, an->value.data(), self.grad.data(), bn->ensure_grad().data());
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_rank("matmul_nt", a, 2);
    require_rank("matmul_nt", b, 2);
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k) mismatch("matmul_nt", a, b);
    std::vector<double> c(m * n, 0.0);
    gemm_nt(m, k, n, a.data().data(), b.data().data(), c.data());
    Node* an = a.node().get();
    Node* bn = b.node().get();
    return make_node("matmul_nt", {m, n}, std::move(c), {&a, &b}, [an, bn, m, k, n](Node& self) {
        if (an->requires_grad)
            gemm_nn(m, n, k, self.grad.data(), bn->value.data(), an->ensure_grad().data());
        if (bn->requires_grad)
            gemm_tn(m, n, k, self.grad.data(), an->value.data(), bn->ensure_grad().data());
    });
}

Tensor transpose(const Tensor& a) {
    require_rank("transpose", a, 2);
    const std::size_t r = a.dim(0), c = a.dim(1);
    Node* an = a.node().get();
    return make_node("transpose", {c, r}, transposed(a.data().data(), r, c), {&a},
                     [an, r, c](Node& self) {
                         auto& g = an->ensure_grad();
                         for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
    return broadcast_binary(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return broadcast_binary(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
    return unary(
        "scale", a, [factor](double x) { return x * factor; },
        [factor](double, double) { return factor; });
}

Tensor scale(const Tensor& a, const Tensor& factor) {
    if (factor.size() != 1) mismatch("scale", a, factor);
    const double s = factor.item();
    const auto x = a.data();
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * s;
    Node* an = a.node().get();
    Node* fn = factor.node().get();
    return make_node("scale", a.shape(), std::move(y), {&a, &factor}, [an, fn](Node& self) {
        const double s = fn->value[0];
        if (an->requires_grad) {
            auto& g = an->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * s;
        }
        if (fn->requires_grad) {
            double acc = 0.0;
            for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * an->value[i];
            fn->ensure_grad()[0] += acc;
        }
    });
}

Tensor tanh(const Tensor& a) {
    return unary(
        "tanh", a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
    return unary(
        "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
    return unary(
        "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    for (double x : a.data())
        if (!(x > 0.0)) throw DomainError("log: non-positive input " + std::to_string(x));
    return unary(
        "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
    for (double x : a.data())
        if (x < 0.0) throw DomainError("sqrt: negative input " + std::to_string(x));
    // The subgradient at 0 is taken as 0 rather than +inf.
    return unary(
        "sqrt", a, [](double x) { return std::sqrt(x); },
        [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor reciprocal(const Tensor& a, double eps) {
    for (double x : a.data())
        if (x + eps == 0.0) throw DomainError("reciprocal: division by zero");
    return unary(
        "reciprocal", a, [eps](double x) { return 1.0 / (x + eps); },
        [](double, double y) { return -y * y; });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
    require_rank("embedding", table, 2);
    const std::size_t rows = table.dim(0), d = table.dim(1);
    if (ids.empty()) throw ShapeError("embedding: empty id list");
    for (int id : ids)
        if (id < 0 || static_cast<std::size_t>(id) >= rows)
            throw ShapeError("embedding: id " + std::to_string(id) + " out of range for table " +
                             shape_str(table.shape()));
    const auto t = table.data();
    std::vector<double> y(ids.size() * d);
    for (std::size_t i = 0; i < ids.size(); ++i)
        std::copy_n(t.begin() + static_cast<long>(ids[i] * d), d, y.begin() + static_cast<long>(i * d));
    Node* tn = table.node().get();
    std::vector<int> idv(ids.begin(), ids.end());
    return make_node("embedding", {ids.size(), d}, std::move(y), {&table},
                     [tn, idv = std::move(idv), d](Node& self) {
                         auto& g = tn->ensure_grad();
                         for (std::size_t i = 0; i < idv.size(); ++i) {
                             double* dst = g.data() + idv[i] * d;
                             const double* src = self.grad.data() + i * d;
                             for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                         }
                     });
}

Tensor take(const Tensor& a, std::span<const std::size_t> indices) {
    require_rank("take", a, 1);
    if (indices.empty()) throw ShapeError("take: empty index list");
    for (auto i : indices)
        if (i >= a.size())
            throw ShapeError("take: index " + std::to_string(i) + " out of range for " +
                             shape_str(a.shape()));
    std::vector<double> y;
    y.reserve(indices.size());
    for (auto i : indices) y.push_back(a.data()[i]);
    Node* an = a.node().get();
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    return make_node("take", {idx.size()}, std::move(y), {&a}, [an, idx](Node& self) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < idx.size(); ++i) g[idx[i]] += self.grad[i];
    });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Tensor& first = parts.front();
    require_axis("concat", first, axis);
    Shape out_shape = first.shape();
    out_shape[axis] = 0;
    for (const auto& p : parts) {
        if (p.rank() != first.rank()) mismatch("concat", first, p);
        for (std::size_t i = 0; i < p.rank(); ++i)
            if (i != axis && p.shape()[i] != first.shape()[i]) mismatch("concat", first, p);
        out_shape[axis] += p.shape()[axis];
    }
    const auto outer = split_axis(first.shape(), axis).outer;
    std::vector<std::size_t> chunk;
    std::size_t row = 0;
    for (const auto& p : parts) {
        chunk.push_back(p.size() / outer);
        row += chunk.back();
    }
    std::vector<double> y(outer * row);
    std::vector<std::shared_ptr<Node>> nodes;
    std::vector<Node*> raw;
    bool need = false;
    for (std::size_t k = 0, offset = 0; k < parts.size(); offset += chunk[k], ++k) {
        const auto x = parts[k].data();
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(x.begin() + static_cast<long>(o * chunk[k]), chunk[k],
                        y.begin() + static_cast<long>(o * row + offset));
        need = need || parts[k].requires_grad();
        nodes.push_back(parts[k].node());
        raw.push_back(parts[k].node().get());
    }
    auto node = std::make_shared<Node>();
    node->op = "concat";
    node->shape = std::move(out_shape);
    node->value = std::move(y);
    if (grad_enabled() && need) {
        node->requires_grad = true;
        node->inputs = std::move(nodes);
        node->backward = [raw, chunk, outer, row](Node& self) {
            for (std::size_t k = 0, offset = 0; k < raw.size(); offset += chunk[k], ++k) {
                if (!raw[k]->requires_grad) continue;
                auto& g = raw[k]->ensure_grad();
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t j = 0; j < chunk[k]; ++j)
                        g[o * chunk[k] + j] += self.grad[o * row + offset + j];
            }
        };
    }
    return Tensor(std::move(node));
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.size() || shape.empty())
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    Node* an = a.node().get();
    return make_node("reshape", std::move(shape), std::vector<double>(a.data().begin(), a.data().end()),
                     {&a}, [an](Node& self) {
                         auto& g = an->ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                     });
}

Tensor sum(const Tensor& a, std::size_t axis) { return reduce_axis("sum", a, axis, 1.0); }

Tensor mean(const Tensor& a, std::size_t axis) {
    require_axis("mean", a, axis);
    return reduce_axis("mean", a, axis, 1.0 / static_cast<double>(a.shape()[axis]));
}

Tensor sum_all(const Tensor& a) { return reduce_axis("sum", reshape(a, {a.size()}), 0, 1.0); }

Tensor mean_all(const Tensor& a) {
    return reduce_axis("mean", reshape(a, {a.size()}), 0, 1.0 / static_cast<double>(a.size()));
}

Tensor masked_fill(const Tensor& a, std::span<const std::uint8_t> mask, double value) {
    if (mask.size() != a.size())
        throw ShapeError("masked_fill: mask of " + std::to_string(mask.size()) +
                         " entries for shape " + shape_str(a.shape()));
    const auto x = a.data();
    std::vector<double> y(x.begin(), x.end());
    for (std::size_t i = 0; i < y.size(); ++i)
        if (mask[i]) y[i] = value;
    Node* an = a.node().get();
    std::vector<std::uint8_t> m(mask.begin(), mask.end());
    return make_node("masked_fill", a.shape(), std::move(y), {&a}, [an, m = std::move(m)](Node& self) {
        auto& g = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!m[i]) g[i] += self.grad[i];
    });
}

Tensor softmax(const Tensor& logits, std::size_t axis) {
    require_axis("softmax", logits, axis);
    const auto s = split_axis(logits.shape(), axis);
    const auto x = logits.data();
    std::vector<double> y(x.size());
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t base = o * s.len * s.inner + i;
            double mx = x[base];
            for (std::size_t l = 1; l < s.len; ++l) mx = std::max(mx, x[base + l * s.inner]);
            double z = 0.0;
            for (std::size_t l = 0; l < s.len; ++l) {
                const double e = std::exp(x[base + l * s.inner] - mx);
                y[base + l * s.inner] = e;
                z += e;
            }
            for (std::size_t l = 0; l < s.len; ++l) y[base + l * s.inner] /= z;
        }
    Node* an = logits.node().get();
    return make_node("softmax", logits.shape(), std::move(y), {&logits}, [an, s](Node& self) {
        auto& g = an->ensure_grad();
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t i = 0; i < s.inner; ++i) {
                const std::size_t base = o * s.len * s.inner + i;
                double dot = 0.0;
                for (std::size_t l = 0; l < s.len; ++l) {
                    const std::size_t k = base + l * s.inner;
                    dot += self.grad[k] * self.value[k];
                }
                for (std::size_t l = 0; l < s.len; ++l) {
                    const std::size_t k = base + l * s.inner;
                    g[k] += self.value[k] * (self.grad[k] - dot);
                }
            }
    });
}

Tensor layer_norm(const Tensor& h, const Tensor& gain, double eps) {
    require_rank("layer_norm", gain, 1);
    if (h.shape().back() != gain.size()) mismatch("layer_norm", h, gain);
    if (eps < 0.0) throw DomainError("layer_norm: negative eps");
    const std::size_t d = gain.size();
    const std::size_t rows = h.size() / d;
    const auto x = h.data();
    const auto gv = gain.data();
    auto xhat = std::make_shared<std::vector<double>>(x.size());
    auto inv = std::make_shared<std::vector<double>>(rows);
    std::vector<double> y(x.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * d;
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += xr[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= static_cast<double>(d);
        const double denom = var + eps;
        const double iv = denom > 0.0 ? 1.0 / std::sqrt(denom) : 0.0;
        (*inv)[r] = iv;
        for (std::size_t j = 0; j < d; ++j) {
            const double xh = (xr[j] - mu) * iv;
            (*xhat)[r * d + j] = xh;
            y[r * d + j] = xh * gv[j];
        }
    }
    Node* hn = h.node().get();
    Node* gn = gain.node().get();
    return make_node("layer_norm", h.shape(), std::move(y), {&h, &gain},
                     [hn, gn, xhat, inv, rows, d](Node& self) {
                         const auto& xh = *xhat;
                         if (gn->requires_grad) {
                             auto& gg = gn->ensure_grad();
                             for (std::size_t r = 0; r < rows; ++r)
                                 for (std::size_t j = 0; j < d; ++j)
                                     gg[j] += self.grad[r * d + j] * xh[r * d + j];
                         }
                         if (hn->requires_grad) {
                             auto& gh = hn->ensure_grad();
                             const auto& gv = gn->value;
                             const double nd = static_cast<double>(d);
                             for (std::size_t r = 0; r < rows; ++r) {
                                 double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                                 for (std::size_t j = 0; j < d; ++j) {
                                     const double dxh = self.grad[r * d + j] * gv[j];
                                     mean_dxh += dxh;
                                     mean_dxh_xh += dxh * xh[r * d + j];
                                 }
                                 mean_dxh /= nd;
                                 mean_dxh_xh /= nd;
                                 const double iv = (*inv)[r];
                                 for (std::size_t j = 0; j < d; ++j) {
                                     const double dxh = self.grad[r * d + j] * gv[j];
                                     gh[r * d + j] += iv * (dxh - mean_dxh - xh[r * d + j] * mean_dxh_xh);
                                 }
                             }
                         }
                     });
}

Tensor dropout(const Tensor& h, double rate, Mode mode, Rng* rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw DomainError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
    if (mode == Mode::Eval || rate == 0.0) return h;
    if (rng == nullptr) throw Error("dropout: train mode requires an rng");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(h.size());
    for (auto& m : mask) m = unif(*rng) < rate ? 0.0 : keep_scale;
    const auto x = h.data();
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * mask[i];
    Node* hn = h.node().get();
    return make_node("dropout", h.shape(), std::move(y), {&h}, [hn, mask = std::move(mask)](Node& self) {
        auto& g = hn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
    });
}

Tensor cosine_similarity(const Tensor& u, const Tensor& v) {
    if (u.size() != v.size()) mismatch("cosine_similarity", u, v);
    const auto a = u.data();
    const auto b = v.data();
    double dot = 0.0, na2 = 0.0, nb2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na2 += a[i] * a[i];
        nb2 += b[i] * b[i];
    }
    if (na2 == 0.0 || nb2 == 0.0) throw DomainError("cosine_similarity: zero-norm input");
    const double na = std::sqrt(na2), nb = std::sqrt(nb2);
    const double c = dot / (na * nb);
    Node* un = u.node().get();
    Node* vn = v.node().get();
    return make_node("cosine_similarity", {1}, {c}, {&u, &v}, [un, vn, na, nb, c](Node& self) {
        const double g = self.grad[0];
        const auto& a = un->value;
        const auto& b = vn->value;
        if (un->requires_grad) {
            auto& ga = un->ensure_grad();
            for (std::size_t i = 0; i < a.size(); ++i)
                ga[i] += g * (b[i] / (na * nb) - c * a[i] / (na * na));
        }
        if (vn->requires_grad) {
            auto& gb = vn->ensure_grad();
            for (std::size_t i = 0; i < b.size(); ++i)
                gb[i] += g * (a[i] / (na * nb) - c * b[i] / (nb * nb));
        }
    });
}

Tensor cross_entropy_sum(const Tensor& logits, std::span<const int> targets) {
    require_rank("cross_entropy", logits, 2);
    const std::size_t rows = logits.dim(0), vocab = logits.dim(1);
    if (targets.size() != rows)
        throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                         shape_str(logits.shape()));
    const auto x = logits.data();
    auto probs = std::make_shared<std::vector<double>>(x.size());
    double loss = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const int t = targets[r];
        if (t < 0 || static_cast<std::size_t>(t) >= vocab)
            throw ShapeError("cross_entropy: target id " + std::to_string(t) + " out of range");
        const double* xr = x.data() + r * vocab;
        const double mx = *std::max_element(xr, xr + vocab);
        double z = 0.0;
        for (std::size_t j = 0; j < vocab; ++j) {
            const double e = std::exp(xr[j] - mx);
            (*probs)[r * vocab + j] = e;
            z += e;
        }
        for (std::size_t j = 0; j < vocab; ++j) (*probs)[r * vocab + j] /= z;
        loss += -(xr[t] - mx - std::log(z));
    }
    Node* ln = logits.node().get();
    std::vector<int> tv(targets.begin(), targets.end());
    return make_node("cross_entropy", {1}, {loss}, {&logits},
                     [ln, probs, tv = std::move(tv), rows, vocab](Node& self) {
                         const double g = self.grad[0];
                         auto& gl = ln->ensure_grad();
                         for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t j = 0; j < vocab; ++j)
                                 gl[r * vocab + j] += g * (*probs)[r * vocab + j];
                             gl[r * vocab + static_cast<std::size_t>(tv[r])] -= g;
                         }
                     });
}

}  // namespace trmoe
