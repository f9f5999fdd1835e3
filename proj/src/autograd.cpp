#include "statconsist/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

namespace statconsist::ad {

void Node::accumulate(const Tensor& g) {
    if (g.shape() != value.shape()) {
        throw ShapeError("gradient shape " + shape_str(g.shape()) + " does not match value shape " +
                         shape_str(value.shape()));
    }
    if (!has_grad) {
        grad = g;
        has_grad = true;
        return;
    }
    auto dst = grad.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Var::Var() : node_(std::make_shared<Node>()) {}

Var Var::leaf(Tensor value) {
    value.require_finite("leaf");
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
}

Var Var::constant(Tensor value) {
    value.require_finite("constant");
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return Var(std::move(n));
}

Tensor Var::grad() const {
    if (node_->has_grad) return node_->grad;
    return Tensor(node_->value.shape());
}

Var make_result(Tensor value, std::vector<Var> parents, BackwardFn fn, const char* op_name) {
    value.require_finite(op_name);
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    bool any = std::any_of(parents.begin(), parents.end(), [](const Var& p) { return p.requires_grad(); });
    if (any) {
        n->requires_grad = true;
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.node());
        n->backward = std::move(fn);
    }
    return Var(std::move(n));
}

void push_grad(const Var& v, const Tensor& g) {
    if (v.requires_grad()) v.node()->accumulate(g);
}

void backward(const Var& root) {
    if (root.value().rank() != 0) {
        throw ShapeError("backward() requires a scalar root, got shape " + shape_str(root.shape()));
    }
    // Iterative post-order DFS gives a topological order; each node visited once.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (Node* n : order) {
        n->has_grad = false;
        n->grad = Tensor();
    }
    if (!root.requires_grad()) return;
    root.node()->accumulate(Tensor::scalar(1.0));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->has_grad || !n->backward) continue;
        n->grad.require_finite("backward");
        n->backward(n->grad);
    }
}

// ---- broadcasting ---------------------------------------------------------

Shape broadcast_shape(const Shape& a, const Shape& b) {
    std::size_t r = std::max(a.size(), b.size());
    Shape out(r);
    for (std::size_t i = 0; i < r; ++i) {
        std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw ShapeError("shapes " + shape_str(a) + " and " + shape_str(b) + " are not broadcast-compatible");
        }
        out[i] = std::max(da, db);
    }
    return out;
}

namespace {

// For every element of `out`, the flat offset into an operand of shape `in`.
std::vector<std::size_t> broadcast_index(const Shape& in, const Shape& out) {
    std::size_t n = shape_size(out);
    std::vector<std::size_t> idx(n);
    if (in == out) {
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        return idx;
    }
    if (shape_size(in) == 1) return idx;  // all zeros
    std::size_t r = out.size();
    std::vector<std::size_t> stride(r, 0);
    std::size_t s = 1;
    for (std::size_t k = in.size(); k-- > 0;) {
        std::size_t axis = k + (r - in.size());
        stride[axis] = in[k] == 1 ? 0 : s;
        s *= in[k];
    }
    std::vector<std::size_t> counter(r, 0);
    std::size_t off = 0;
    for (std::size_t i = 0; i < n; ++i) {
        idx[i] = off;
        for (std::size_t axis = r; axis-- > 0;) {
            ++counter[axis];
            off += stride[axis];
            if (counter[axis] < out[axis]) break;
            off -= stride[axis] * counter[axis];
            counter[axis] = 0;
        }
    }
    return idx;
}

Tensor reduce_to(const Tensor& g, const Shape& in, const std::vector<std::size_t>& idx) {
    if (g.shape() == in) return g;
    Tensor r(in);
    for (std::size_t i = 0; i < g.size(); ++i) r[idx[i]] += g[i];
    return r;
}

template <class F, class GA, class GB>
Var binary(const Var& a, const Var& b, F f, GA ga, GB gb, const char* name) {
    Shape out = broadcast_shape(a.shape(), b.shape());
    auto ia = std::make_shared<std::vector<std::size_t>>(broadcast_index(a.shape(), out));
    auto ib = std::make_shared<std::vector<std::size_t>>(broadcast_index(b.shape(), out));
    const auto& av = a.value();
    const auto& bv = b.value();
    Tensor r(out);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = f(av[(*ia)[i]], bv[(*ib)[i]]);
    return make_result(
        std::move(r), {a, b},
        [a, b, ia, ib, ga, gb](const Tensor& g) {
            const auto& av = a.value();
            const auto& bv = b.value();
            if (a.requires_grad()) {
                Tensor da(g.shape());
                for (std::size_t i = 0; i < g.size(); ++i) da[i] = g[i] * ga(av[(*ia)[i]], bv[(*ib)[i]]);
                a.node()->accumulate(reduce_to(da, a.shape(), *ia));
            }
            if (b.requires_grad()) {
                Tensor db(g.shape());
                for (std::size_t i = 0; i < g.size(); ++i) db[i] = g[i] * gb(av[(*ia)[i]], bv[(*ib)[i]]);
                b.node()->accumulate(reduce_to(db, b.shape(), *ib));
            }
        },
        name);
}

// Unary op whose derivative is expressed through input x and output y.
template <class F, class G>
Var unary(const Var& a, F f, G dfdx, const char* name) {
    const auto& av = a.value();
    Tensor r(a.shape());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = f(av[i]);
    auto out = std::make_shared<Tensor>(r);
    return make_result(
        std::move(r), {a},
        [a, out, dfdx](const Tensor& g) {
            const auto& av = a.value();
            Tensor d(g.shape());
            for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * dfdx(av[i], (*out)[i]);
            a.node()->accumulate(d);
        },
        name);
}

}  // namespace

// ---- elementwise ----------------------------------------------------------

Var add(const Var& a, const Var& b) {
    return binary(
        a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; }, "add");
}

Var sub(const Var& a, const Var& b) {
    return binary(
        a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; }, "sub");
}

Var mul(const Var& a, const Var& b) {
    return binary(
        a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; }, "mul");
}

Var div(const Var& a, const Var& b) {
    for (double v : b.value().data()) {
        if (v == 0.0) throw DomainError("div: zero divisor");
    }
    return binary(
        a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); }, "div");
}

Var exp(const Var& a) {
    return unary(
        a, [](double x) { return std::exp(x); }, [](double, double y) { return y; }, "exp");
}

Var log(const Var& a) {
    for (double v : a.value().data()) {
        if (v <= 0.0) throw DomainError("log: non-positive operand");
    }
    return unary(
        a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; }, "log");
}

Var pow(const Var& a, double p) {
    bool integral = std::floor(p) == p;
    for (double v : a.value().data()) {
        if (v < 0.0 && !integral) throw DomainError("pow: negative base with non-integer exponent");
        if (v == 0.0 && p < 1.0) throw DomainError("pow: zero base with exponent < 1");
    }
    return unary(
        a, [p](double x) { return std::pow(x, p); },
        [p](double x, double) { return p == 0.0 ? 0.0 : p * std::pow(x, p - 1.0); }, "pow");
}

Var neg(const Var& a) {
    return unary(
        a, [](double x) { return -x; }, [](double, double) { return -1.0; }, "neg");
}

Var abs(const Var& a) {
    return unary(
        a, [](double x) { return std::abs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }, "abs");
}

Var relu(const Var& a) {
    return unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; },
        "relu");
}

Var clamp(const Var& a, double lo, double hi) {
    return unary(
        a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
        [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; }, "clamp");
}

Var elementwise(ElementwiseOp op, const Var& a, const Var& b) {
    switch (op) {
        case ElementwiseOp::add: return add(a, b);
        case ElementwiseOp::sub: return sub(a, b);
        case ElementwiseOp::mul: return mul(a, b);
        case ElementwiseOp::div: return div(a, b);
        case ElementwiseOp::exp: return exp(a);
        case ElementwiseOp::log: return log(a);
        case ElementwiseOp::pow: return pow(a, b.value().item());
    }
    throw std::invalid_argument("unknown elementwise op");
}

Var operator+(const Var& a, const Var& b) { return add(a, b); }
Var operator-(const Var& a, const Var& b) { return sub(a, b); }
Var operator*(const Var& a, const Var& b) { return mul(a, b); }
Var operator/(const Var& a, const Var& b) { return div(a, b); }
Var operator-(const Var& a) { return neg(a); }
Var operator+(const Var& a, double b) { return add(a, Var::constant(b)); }
Var operator-(const Var& a, double b) { return sub(a, Var::constant(b)); }
Var operator*(const Var& a, double b) { return mul(a, Var::constant(b)); }
Var operator*(double a, const Var& b) { return mul(Var::constant(a), b); }
Var operator/(const Var& a, double b) { return div(a, Var::constant(b)); }

// ---- reductions -----------------------------------------------------------

Var sum(const Var& a) {
    return make_result(
        Tensor::scalar(a.value().sum()), {a},
        [a](const Tensor& g) { a.node()->accumulate(Tensor(a.shape(), g.item())); }, "sum");
}

Var mean(const Var& a) {
    double n = static_cast<double>(a.value().size());
    return make_result(
        Tensor::scalar(a.value().sum() / n), {a},
        [a, n](const Tensor& g) { a.node()->accumulate(Tensor(a.shape(), g.item() / n)); }, "mean");
}

Var reshape(const Var& a, Shape shape) {
    Tensor r = a.value().reshaped(std::move(shape));
    return make_result(
        std::move(r), {a}, [a](const Tensor& g) { a.node()->accumulate(g.reshaped(a.shape())); }, "reshape");
}

Var element(const Var& a, std::size_t flat_index) {
    if (flat_index >= a.value().size()) throw std::out_of_range("element index out of range");
    return make_result(
        Tensor::scalar(a.value()[flat_index]), {a},
        [a, flat_index](const Tensor& g) {
            Tensor d(a.shape());
            d[flat_index] = g.item();
            a.node()->accumulate(d);
        },
        "element");
}

}  // namespace statconsist::ad
