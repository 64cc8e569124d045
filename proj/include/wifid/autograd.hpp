#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <unordered_set>

#include <Eigen/Core>

#include "wifid/tensor.hpp"

namespace wifid {

// Reverse-mode tape. Each Node holds a value, an optional gradient buffer
// and a closure that scatters this node's gradient into its parents.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;

    bool has_grad() const { return !grad.data.empty(); }
    Tensor& grad_buf() {
        if (grad.data.empty()) grad = Tensor(value.shape);
        return grad;
    }
    void zero_grad() {
        if (!grad.data.empty()) grad.fill(0.0f);
    }
};

inline Var make_var(Tensor value, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

inline Var make_const(Tensor value) { return make_var(std::move(value), false); }

namespace detail {

inline bool any_requires_grad(const std::vector<Var>& parents) {
    for (const auto& p : parents)
        if (p->requires_grad) return true;
    return false;
}

inline Var make_op(Tensor value, std::vector<Var> parents,
                   std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    n->requires_grad = any_requires_grad(n->parents);
    if (n->requires_grad) n->backward_fn = std::move(backward_fn);
    return n;
}

using EMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

}  // namespace detail

// C[m,n] = A[m,k] * B[k,n], optionally transposing either input.
inline void gemm(const float* a, const float* b, float* c, int m, int k, int n,
                 bool trans_a = false, bool trans_b = false, bool accumulate = false) {
    detail::ECMap A(a, trans_a ? k : m, trans_a ? m : k);
    detail::ECMap B(b, trans_b ? n : k, trans_b ? k : n);
    detail::EMap C(c, m, n);
    if (trans_a && trans_b) {
        if (accumulate) C.noalias() += A.transpose() * B.transpose();
        else C.noalias() = A.transpose() * B.transpose();
    } else if (trans_a) {
        if (accumulate) C.noalias() += A.transpose() * B;
        else C.noalias() = A.transpose() * B;
    } else if (trans_b) {
        if (accumulate) C.noalias() += A * B.transpose();
        else C.noalias() = A * B.transpose();
    } else {
        if (accumulate) C.noalias() += A * B;
        else C.noalias() = A * B;
    }
}

inline Var add(const Var& a, const Var& b) {
    check_same_shape(a->value, b->value, "add");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += b->value.data[i];
    return detail::make_op(std::move(out), {a, b}, [](Node& n) {
        for (int pi = 0; pi < 2; ++pi) {
            Node& p = *n.parents[pi];
            if (!p.requires_grad) continue;
            Tensor& g = p.grad_buf();
            for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i];
        }
    });
}

inline Var sub(const Var& a, const Var& b) {
    check_same_shape(a->value, b->value, "sub");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= b->value.data[i];
    return detail::make_op(std::move(out), {a, b}, [](Node& n) {
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        if (pa.requires_grad) {
            Tensor& g = pa.grad_buf();
            for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i];
        }
        if (pb.requires_grad) {
            Tensor& g = pb.grad_buf();
            for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] -= n.grad.data[i];
        }
    });
}

inline Var mul(const Var& a, const Var& b) {
    check_same_shape(a->value, b->value, "mul");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= b->value.data[i];
    return detail::make_op(std::move(out), {a, b}, [](Node& n) {
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        if (pa.requires_grad) {
            Tensor& g = pa.grad_buf();
            for (std::size_t i = 0; i < g.numel(); ++i)
                g.data[i] += n.grad.data[i] * pb.value.data[i];
        }
        if (pb.requires_grad) {
            Tensor& g = pb.grad_buf();
            for (std::size_t i = 0; i < g.numel(); ++i)
                g.data[i] += n.grad.data[i] * pa.value.data[i];
        }
    });
}

inline Var scale(const Var& a, float s) {
    Tensor out = a->value;
    for (float& v : out.data) v *= s;
    return detail::make_op(std::move(out), {a}, [s](Node& n) {
        Node& p = *n.parents[0];
        if (!p.requires_grad) return;
        Tensor& g = p.grad_buf();
        for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += s * n.grad.data[i];
    });
}

// A[m,k] * B[k,n] -> [m,n]
inline Var matmul(const Var& a, const Var& b) {
    if (a->value.ndim() != 2 || b->value.ndim() != 2 || a->value.dim(1) != b->value.dim(0))
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a->value.shape) +
                                    " x " + shape_str(b->value.shape));
    const int m = a->value.dim(0), k = a->value.dim(1), n = b->value.dim(1);
    Tensor out({m, n});
    gemm(a->value.data.data(), b->value.data.data(), out.data.data(), m, k, n);
    return detail::make_op(std::move(out), {a, b}, [m, k, n](Node& nd) {
        Node& pa = *nd.parents[0];
        Node& pb = *nd.parents[1];
        if (pa.requires_grad)  // dA = dC * B^T
            gemm(nd.grad.data.data(), pb.value.data.data(), pa.grad_buf().data.data(),
                 m, n, k, false, true, true);
        if (pb.requires_grad)  // dB = A^T * dC
            gemm(pa.value.data.data(), nd.grad.data.data(), pb.grad_buf().data.data(),
                 k, m, n, true, false, true);
    });
}

inline Var sum(const Var& a) {
    double acc = 0.0;
    for (float v : a->value.data) acc += v;
    return detail::make_op(Tensor::scalar(static_cast<float>(acc)), {a}, [](Node& n) {
        Node& p = *n.parents[0];
        if (!p.requires_grad) return;
        Tensor& g = p.grad_buf();
        const float go = n.grad.data[0];
        for (float& v : g.data) v += go;
    });
}

inline Var mean(const Var& a) {
    const std::size_t n_el = a->value.numel();
    double acc = 0.0;
    for (float v : a->value.data) acc += v;
    return detail::make_op(Tensor::scalar(static_cast<float>(acc / double(n_el))), {a},
                           [n_el](Node& n) {
        Node& p = *n.parents[0];
        if (!p.requires_grad) return;
        Tensor& g = p.grad_buf();
        const float go = n.grad.data[0] / static_cast<float>(n_el);
        for (float& v : g.data) v += go;
    });
}

inline Var reshape(const Var& a, Shape s) {
    if (shape_numel(s) != a->value.numel())
        throw std::invalid_argument("reshape: element count mismatch " +
                                    shape_str(a->value.shape) + " -> " + shape_str(s));
    Tensor out(std::move(s), a->value.data);
    return detail::make_op(std::move(out), {a}, [](Node& n) {
        Node& p = *n.parents[0];
        if (!p.requires_grad) return;
        Tensor& g = p.grad_buf();
        for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i];
    });
}

// Walk the tape from `loss` and populate gradients of every reachable
// node with requires_grad. Grads accumulate across calls until zeroed.
inline void backward(const Var& loss) {
    if (loss->value.numel() != 1)
        throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                    shape_str(loss->value.shape));
    // iterative post-order topological sort
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    // interior gradients are scratch from any previous pass; only leaves accumulate
    for (Node* n : order)
        if (!n->parents.empty() && n->has_grad()) n->zero_grad();
    loss->grad_buf().data[0] += 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
    }
}

}  // namespace wifid
