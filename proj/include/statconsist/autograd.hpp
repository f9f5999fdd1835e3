#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "statconsist/tensor.hpp"

namespace statconsist::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// Reverse-mode tape node. Gradients are materialized on first accumulation.
struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(const Tensor& upstream)> backward;

    void accumulate(const Tensor& g);
};

/**
 * Handle to a node on the tape. Copying a Var shares the node.
 *
 * The tape is single-threaded: a graph built on one thread must be
 * differentiated on that thread. Build a fresh graph per optimisation step.
 */
class Var {
public:
    Var();
    explicit Var(NodePtr node) : node_(std::move(node)) {}

    static Var leaf(Tensor value);
    static Var constant(Tensor value);
    static Var constant(double v) { return constant(Tensor::scalar(v)); }

    const Tensor& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_->requires_grad; }

    // Gradient of the last backward() root with respect to this node; zeros when
    // the node was unreachable.
    Tensor grad() const;

    const NodePtr& node() const { return node_; }

private:
    NodePtr node_;
};

using BackwardFn = std::function<void(const Tensor& upstream)>;

// Creates the result node of an operation. The backward closure is dropped when
// no parent requires a gradient.
Var make_result(Tensor value, std::vector<Var> parents, BackwardFn fn, const char* op_name);

// Accumulates `g` into `v` when `v` participates in differentiation.
void push_grad(const Var& v, const Tensor& g);

/// Runs reverse accumulation from a rank-0 root. Gradients of all reachable
/// nodes are reset first, so repeated calls do not accumulate.
void backward(const Var& root);

// ---- elementwise --------------------------------------------------------

enum class ElementwiseOp { add, sub, mul, div, exp, log, pow };

// Binary ops follow numpy broadcasting; unary ops (exp, log) ignore `b`;
// pow takes its exponent from a single-element `b`.
Var elementwise(ElementwiseOp op, const Var& a, const Var& b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var exp(const Var& a);
Var log(const Var& a);
Var pow(const Var& a, double exponent);
Var neg(const Var& a);
Var abs(const Var& a);
Var relu(const Var& a);
// Gradient passes where lo <= a <= hi and is zero where the value was clamped.
Var clamp(const Var& a, double lo, double hi);

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator+(const Var& a, double b);
Var operator-(const Var& a, double b);
Var operator*(const Var& a, double b);
Var operator*(double a, const Var& b);
Var operator/(const Var& a, double b);

Shape broadcast_shape(const Shape& a, const Shape& b);

// ---- reductions and shape ------------------------------------------------

Var sum(const Var& a);
Var mean(const Var& a);
Var reshape(const Var& a, Shape shape);
// Single element as a rank-0 value.
Var element(const Var& a, std::size_t flat_index);

// ---- dense / conv ---------------------------------------------------------

Var matmul(const Var& a, const Var& b);

/// Cross-correlation. input: [N,H,W,Cin] or [H,W,Cin]; kernel: [kh,kw,Cin,Cout]
/// with odd kh, kw. Zero padding of `pad` pixels on every side.
Var conv2d(const Var& input, const Var& kernel, std::size_t stride, std::size_t pad);

// [N,H,W,C] -> [N,C]
Var global_avg_pool(const Var& x);
// [N,H,W,C] -> [N,H,W]
Var channel_mean(const Var& x);

// Softmax over the last axis.
Var softmax(const Var& logits);
// Mean softmax cross-entropy of logits [N,K] against integer labels.
Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels);

}  // namespace statconsist::ad
