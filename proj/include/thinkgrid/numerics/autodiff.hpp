#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "thinkgrid/numerics/tensor.hpp"

namespace thinkgrid {

// Reverse-mode tape. Ops execute eagerly on batched tensors and record a
// backward closure; backward() walks the graph from the loss in reverse
// topological order. Nodes created while gradients are globally disabled (or
// from constant-only inputs) carry no parents, so inference rollouts never
// retain a graph.

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backward_fn;

    bool needs_grad() const noexcept { return value.requires_grad(); }

    void ensure_grad() {
        if (grad.empty()) grad = Tensor<T>(value.shape());
    }

    void zero_grad() { grad = Tensor<T>(); }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

inline thread_local bool g_autograd_enabled = true;

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(g_autograd_enabled) { g_autograd_enabled = false; }
    ~NoGradGuard() { g_autograd_enabled = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <typename T>
Var<T> make_param(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->value.set_requires_grad(true);
    return n;
}

template <typename T>
Var<T> make_constant(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    return n;
}

namespace detail {

template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backward_fn) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    if (g_autograd_enabled) {
        bool any = false;
        for (const auto& p : parents) any = any || p->needs_grad();
        if (any) {
            n->value.set_requires_grad(true);
            n->parents = std::move(parents);
            n->backward_fn = std::move(backward_fn);
        }
    }
    return n;
}

template <typename T>
void accumulate(Node<T>& node, const Tensor<T>& delta) {
    node.ensure_grad();
    T* g = node.grad.data();
    const T* d = delta.data();
    const std::int64_t n = delta.numel();
    for (std::int64_t i = 0; i < n; ++i) g[i] += d[i];
}

template <typename T>
using EigenMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Map = Eigen::Map<EigenMat<T>>;
template <typename T>
using CMap = Eigen::Map<const EigenMat<T>>;

template <typename T>
CMap<T> as_matrix(const Tensor<T>& t) {
    return CMap<T>(t.data(), t.rows(), t.cols());
}

template <typename T>
Map<T> as_matrix(Tensor<T>& t) {
    return Map<T>(t.data(), t.rows(), t.cols());
}

} // namespace detail

// --------------------------------------------------------------------------
// backward
// --------------------------------------------------------------------------

template <typename T>
void backward(const Var<T>& loss) {
    if (!loss->needs_grad()) return;
    // Post-order DFS gives reverse topological order when walked backwards.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{loss.get(), 0}};
    seen.insert(loss.get());
    while (!stack.empty()) {
        auto [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            stack.back().second += 1;
            Node<T>* p = node->parents[idx].get();
            if (p->needs_grad() && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss->ensure_grad();
    loss->grad.fill(T(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

// --------------------------------------------------------------------------
// elementwise ops
// --------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    check_same_shape(a->value, b->value, "add");
    Tensor<T> out(a->value.shape());
    const T* pa = a->value.data();
    const T* pb = b->value.data();
    T* po = out.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] + pb[i];
    return detail::make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
        if (a->needs_grad()) detail::accumulate(*a, n.grad);
        if (b->needs_grad()) detail::accumulate(*b, n.grad);
    });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    check_same_shape(a->value, b->value, "sub");
    Tensor<T> out(a->value.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
    return detail::make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
        if (a->needs_grad()) detail::accumulate(*a, n.grad);
        if (b->needs_grad()) {
            b->ensure_grad();
            for (std::int64_t i = 0; i < n.grad.numel(); ++i) b->grad[i] -= n.grad[i];
        }
    });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    check_same_shape(a->value, b->value, "mul");
    Tensor<T> out(a->value.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
    return detail::make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
        const std::int64_t m = n.grad.numel();
        if (a->needs_grad()) {
            a->ensure_grad();
            for (std::int64_t i = 0; i < m; ++i) a->grad[i] += n.grad[i] * b->value[i];
        }
        if (b->needs_grad()) {
            b->ensure_grad();
            for (std::int64_t i = 0; i < m; ++i) b->grad[i] += n.grad[i] * a->value[i];
        }
    });
}

template <typename T>
Var<T> scale(const Var<T>& a, T c) {
    Tensor<T> out(a->value.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * c;
    return detail::make_op<T>(std::move(out), {a}, [a, c](Node<T>& n) {
        a->ensure_grad();
        for (std::int64_t i = 0; i < n.grad.numel(); ++i) a->grad[i] += n.grad[i] * c;
    });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
    Tensor<T> out(a->value.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) {
        const T x = a->value[i];
        out[i] = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                           : std::exp(x) / (T(1) + std::exp(x));
    }
    return detail::make_op<T>(std::move(out), {a}, [a](Node<T>& n) {
        a->ensure_grad();
        for (std::int64_t i = 0; i < n.grad.numel(); ++i) {
            const T y = n.value[i];
            a->grad[i] += n.grad[i] * y * (T(1) - y);
        }
    });
}

template <typename T>
Var<T> tanh_op(const Var<T>& a) {
    Tensor<T> out(a->value.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(a->value[i]);
    return detail::make_op<T>(std::move(out), {a}, [a](Node<T>& n) {
        a->ensure_grad();
        for (std::int64_t i = 0; i < n.grad.numel(); ++i) {
            const T y = n.value[i];
            a->grad[i] += n.grad[i] * (T(1) - y * y);
        }
    });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
    Tensor<T> out(a->value.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] > T(0) ? a->value[i] : T(0);
    return detail::make_op<T>(std::move(out), {a}, [a](Node<T>& n) {
        a->ensure_grad();
        for (std::int64_t i = 0; i < n.grad.numel(); ++i)
            if (a->value[i] > T(0)) a->grad[i] += n.grad[i];
    });
}

// Hard threshold at 0.5 (ties to 1) on the forward pass; the backward pass is
// the identity, so gradients reach the pre-binarization activations unchanged.
template <typename T>
Var<T> straight_through_binarize(const Var<T>& z) {
    Tensor<T> out(z->value.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = z->value[i] >= T(0.5) ? T(1) : T(0);
    return detail::make_op<T>(std::move(out), {z}, [z](Node<T>& n) {
        detail::accumulate(*z, n.grad);
    });
}

template <typename T>
Var<T> stop_gradient(const Var<T>& a) {
    return make_constant(a->value);
}

// --------------------------------------------------------------------------
// linear algebra
// --------------------------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    if (a->value.cols() != b->value.rows())
        throw ShapeError("matmul: inner dimensions " + shape_str(a->value.shape()) + " vs " +
                         shape_str(b->value.shape()));
    Tensor<T> out(Shape{a->value.rows(), b->value.cols()});
    detail::as_matrix(out).noalias() = detail::as_matrix(a->value) * detail::as_matrix(b->value);
    return detail::make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
        auto dy = detail::as_matrix(n.grad);
        if (a->needs_grad()) {
            a->ensure_grad();
            detail::as_matrix(a->grad).noalias() += dy * detail::as_matrix(b->value).transpose();
        }
        if (b->needs_grad()) {
            b->ensure_grad();
            detail::as_matrix(b->grad).noalias() += detail::as_matrix(a->value).transpose() * dy;
        }
    });
}

// y = x * w^T + bias, the standard batched linear layer: x is (B, in),
// w is (out, in), bias is (out).
template <typename T>
Var<T> affine(const Var<T>& x, const Var<T>& w, const Var<T>& bias) {
    const auto B = x->value.rows(), in = x->value.cols();
    const auto out_dim = w->value.rows();
    if (w->value.cols() != in || bias->value.numel() != out_dim)
        throw ShapeError("affine: x" + shape_str(x->value.shape()) + " w" +
                         shape_str(w->value.shape()) + " b" + shape_str(bias->value.shape()));
    Tensor<T> out(Shape{B, out_dim});
    auto y = detail::as_matrix(out);
    y.noalias() = detail::as_matrix(x->value) * detail::as_matrix(w->value).transpose();
    const T* bp = bias->value.data();
    for (std::int64_t r = 0; r < B; ++r) {
        T* row = out.data() + r * out_dim;
        for (std::int64_t c = 0; c < out_dim; ++c) row[c] += bp[c];
    }
    return detail::make_op<T>(std::move(out), {x, w, bias}, [x, w, bias](Node<T>& n) {
        auto dy = detail::as_matrix(n.grad);
        if (x->needs_grad()) {
            x->ensure_grad();
            detail::as_matrix(x->grad).noalias() += dy * detail::as_matrix(w->value);
        }
        if (w->needs_grad()) {
            w->ensure_grad();
            detail::as_matrix(w->grad).noalias() += dy.transpose() * detail::as_matrix(x->value);
        }
        if (bias->needs_grad()) {
            bias->ensure_grad();
            const std::int64_t B2 = n.grad.rows(), out_dim2 = n.grad.cols();
            for (std::int64_t r = 0; r < B2; ++r) {
                const T* row = n.grad.data() + r * out_dim2;
                for (std::int64_t c = 0; c < out_dim2; ++c) bias->grad[c] += row[c];
            }
        }
    });
}

// --------------------------------------------------------------------------
// shape ops
// --------------------------------------------------------------------------

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: empty input");
    const std::int64_t B = parts[0]->value.rows();
    std::int64_t total = 0;
    for (const auto& p : parts) {
        if (p->value.rows() != B) throw ShapeError("concat_cols: row mismatch");
        total += p->value.cols();
    }
    Tensor<T> out(Shape{B, total});
    std::int64_t off = 0;
    for (const auto& p : parts) {
        const std::int64_t c = p->value.cols();
        for (std::int64_t r = 0; r < B; ++r)
            std::copy_n(p->value.data() + r * c, c, out.data() + r * total + off);
        off += c;
    }
    return detail::make_op<T>(std::move(out), parts, [parts, total](Node<T>& n) {
        const std::int64_t B2 = n.grad.rows();
        std::int64_t off2 = 0;
        for (const auto& p : parts) {
            const std::int64_t c = p->value.cols();
            if (p->needs_grad()) {
                p->ensure_grad();
                for (std::int64_t r = 0; r < B2; ++r) {
                    const T* src = n.grad.data() + r * total + off2;
                    T* dst = p->grad.data() + r * c;
                    for (std::int64_t j = 0; j < c; ++j) dst[j] += src[j];
                }
            }
            off2 += c;
        }
    });
}

template <typename T>
Var<T> slice_cols(const Var<T>& x, std::int64_t begin, std::int64_t end) {
    const std::int64_t B = x->value.rows(), C = x->value.cols();
    if (begin < 0 || end > C || begin >= end)
        throw ShapeError("slice_cols: [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of " + std::to_string(C));
    const std::int64_t w = end - begin;
    Tensor<T> out(Shape{B, w});
    for (std::int64_t r = 0; r < B; ++r)
        std::copy_n(x->value.data() + r * C + begin, w, out.data() + r * w);
    return detail::make_op<T>(std::move(out), {x}, [x, begin, w, C](Node<T>& n) {
        x->ensure_grad();
        const std::int64_t B2 = n.grad.rows();
        for (std::int64_t r = 0; r < B2; ++r) {
            const T* src = n.grad.data() + r * w;
            T* dst = x->grad.data() + r * C + begin;
            for (std::int64_t j = 0; j < w; ++j) dst[j] += src[j];
        }
    });
}

// --------------------------------------------------------------------------
// reductions and losses
// --------------------------------------------------------------------------

template <typename T>
Var<T> sum_all(const Var<T>& x) {
    T s = 0;
    for (std::int64_t i = 0; i < x->value.numel(); ++i) s += x->value[i];
    return detail::make_op<T>(Tensor<T>::scalar(s), {x}, [x](Node<T>& n) {
        x->ensure_grad();
        const T g = n.grad[0];
        for (std::int64_t i = 0; i < x->grad.numel(); ++i) x->grad[i] += g;
    });
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
    const T inv = T(1) / static_cast<T>(x->value.numel());
    T s = 0;
    for (std::int64_t i = 0; i < x->value.numel(); ++i) s += x->value[i];
    return detail::make_op<T>(Tensor<T>::scalar(s * inv), {x}, [x, inv](Node<T>& n) {
        x->ensure_grad();
        const T g = n.grad[0] * inv;
        for (std::int64_t i = 0; i < x->grad.numel(); ++i) x->grad[i] += g;
    });
}

// Mean squared error against a fixed target.
template <typename T>
Var<T> mse_against(const Var<T>& pred, const Tensor<T>& target) {
    check_same_shape(pred->value, target, "mse_against");
    const std::int64_t n = target.numel();
    const T inv = T(1) / static_cast<T>(n);
    T s = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const T d = pred->value[i] - target[i];
        s += d * d;
    }
    return detail::make_op<T>(Tensor<T>::scalar(s * inv), {pred}, [pred, target, inv](Node<T>& nd) {
        pred->ensure_grad();
        const T g = nd.grad[0] * T(2) * inv;
        for (std::int64_t i = 0; i < target.numel(); ++i)
            pred->grad[i] += g * (pred->value[i] - target[i]);
    });
}

// Row-wise log-softmax, numerically stable.
template <typename T>
Var<T> log_softmax_rows(const Var<T>& x) {
    const std::int64_t B = x->value.rows(), C = x->value.cols();
    Tensor<T> out(Shape{B, C});
    for (std::int64_t r = 0; r < B; ++r) {
        const T* in = x->value.data() + r * C;
        T* o = out.data() + r * C;
        T m = in[0];
        for (std::int64_t c = 1; c < C; ++c) m = std::max(m, in[c]);
        T z = 0;
        for (std::int64_t c = 0; c < C; ++c) z += std::exp(in[c] - m);
        const T lz = std::log(z) + m;
        for (std::int64_t c = 0; c < C; ++c) o[c] = in[c] - lz;
    }
    return detail::make_op<T>(std::move(out), {x}, [x, B, C](Node<T>& n) {
        x->ensure_grad();
        for (std::int64_t r = 0; r < B; ++r) {
            const T* g = n.grad.data() + r * C;
            const T* ls = n.value.data() + r * C;
            T* dx = x->grad.data() + r * C;
            T gsum = 0;
            for (std::int64_t c = 0; c < C; ++c) gsum += g[c];
            for (std::int64_t c = 0; c < C; ++c) dx[c] += g[c] - std::exp(ls[c]) * gsum;
        }
    });
}

// sum_r weights[r] * x[r, idx[r]]  — used for the policy-gradient term on a
// log-probability matrix with per-row detached advantages.
template <typename T>
Var<T> weighted_gather_sum(const Var<T>& x, std::vector<std::int32_t> idx, std::vector<T> weights) {
    const std::int64_t B = x->value.rows(), C = x->value.cols();
    if (static_cast<std::int64_t>(idx.size()) != B ||
        static_cast<std::int64_t>(weights.size()) != B)
        throw ShapeError("weighted_gather_sum: index/weight length != batch rows");
    T s = 0;
    for (std::int64_t r = 0; r < B; ++r) s += weights[r] * x->value.at(r, idx[r]);
    return detail::make_op<T>(
        Tensor<T>::scalar(s), {x},
        [x, idx = std::move(idx), weights = std::move(weights), C](Node<T>& n) {
            x->ensure_grad();
            const T g = n.grad[0];
            for (std::size_t r = 0; r < idx.size(); ++r)
                x->grad[static_cast<std::int64_t>(r) * C + idx[r]] += g * weights[r];
        });
}

// Mean cross-entropy of integer targets under row-wise softmax(logits).
template <typename T>
Var<T> cross_entropy_rows(const Var<T>& logits, std::vector<std::int32_t> targets) {
    const std::int64_t B = logits->value.rows(), C = logits->value.cols();
    if (static_cast<std::int64_t>(targets.size()) != B)
        throw ShapeError("cross_entropy_rows: target length != batch rows");
    Tensor<T> logz(Shape{B, 1});
    T loss = 0;
    for (std::int64_t r = 0; r < B; ++r) {
        const T* in = logits->value.data() + r * C;
        T m = in[0];
        for (std::int64_t c = 1; c < C; ++c) m = std::max(m, in[c]);
        T z = 0;
        for (std::int64_t c = 0; c < C; ++c) z += std::exp(in[c] - m);
        logz[r] = std::log(z) + m;
        loss += logz[r] - in[targets[r]];
    }
    const T inv = T(1) / static_cast<T>(B);
    return detail::make_op<T>(
        Tensor<T>::scalar(loss * inv), {logits},
        [logits, targets = std::move(targets), logz = std::move(logz), C, inv](Node<T>& n) {
            logits->ensure_grad();
            const T g = n.grad[0] * inv;
            const std::int64_t B2 = logits->value.rows();
            for (std::int64_t r = 0; r < B2; ++r) {
                const T* in = logits->value.data() + r * C;
                T* dx = logits->grad.data() + r * C;
                for (std::int64_t c = 0; c < C; ++c) dx[c] += g * std::exp(in[c] - logz[r]);
                dx[targets[r]] -= g;
            }
        });
}

// Mean over rows of the softmax entropy of each logit row.
template <typename T>
Var<T> mean_entropy_rows(const Var<T>& logits) {
    const std::int64_t B = logits->value.rows(), C = logits->value.cols();
    Tensor<T> ls(Shape{B, C});
    Tensor<T> ent(Shape{B, 1});
    T total = 0;
    for (std::int64_t r = 0; r < B; ++r) {
        const T* in = logits->value.data() + r * C;
        T* l = ls.data() + r * C;
        T m = in[0];
        for (std::int64_t c = 1; c < C; ++c) m = std::max(m, in[c]);
        T z = 0;
        for (std::int64_t c = 0; c < C; ++c) z += std::exp(in[c] - m);
        const T lz = std::log(z) + m;
        T h = 0;
        for (std::int64_t c = 0; c < C; ++c) {
            l[c] = in[c] - lz;
            h -= std::exp(l[c]) * l[c];
        }
        ent[r] = h;
        total += h;
    }
    const T inv = T(1) / static_cast<T>(B);
    return detail::make_op<T>(
        Tensor<T>::scalar(total * inv), {logits},
        [logits, ls = std::move(ls), ent = std::move(ent), C, inv](Node<T>& n) {
            logits->ensure_grad();
            const T g = n.grad[0] * inv;
            const std::int64_t B2 = logits->value.rows();
            for (std::int64_t r = 0; r < B2; ++r) {
                const T* l = ls.data() + r * C;
                T* dx = logits->grad.data() + r * C;
                for (std::int64_t c = 0; c < C; ++c)
                    dx[c] += -g * std::exp(l[c]) * (l[c] + ent[r]);
            }
        });
}

// --------------------------------------------------------------------------
// parameter utilities
// --------------------------------------------------------------------------

template <typename T>
void zero_grads(const std::vector<Var<T>>& params) {
    for (const auto& p : params) p->zero_grad();
}

template <typename T>
T global_grad_norm(const std::vector<Var<T>>& params) {
    double s = 0;
    for (const auto& p : params) {
        if (p->grad.empty()) continue;
        for (std::int64_t i = 0; i < p->grad.numel(); ++i) {
            const double g = static_cast<double>(p->grad[i]);
            s += g * g;
        }
    }
    return static_cast<T>(std::sqrt(s));
}

template <typename T>
T clip_global_grad_norm(const std::vector<Var<T>>& params, T max_norm) {
    const T norm = global_grad_norm(params);
    if (norm > max_norm && norm > T(0)) {
        const T f = max_norm / norm;
        for (const auto& p : params)
            for (std::int64_t i = 0; i < p->grad.numel(); ++i) p->grad[i] *= f;
    }
    return norm;
}

} // namespace thinkgrid
