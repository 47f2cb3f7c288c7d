#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "td2ip/errors.hpp"

namespace td2ip {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// A dense row-major tensor of 64-bit reals. Tensors produced by Tape
// operations carry the id of their tape node; plain data tensors (inputs,
// targets) have node == -1 and no gradient.
struct Tensor {
    Shape shape;
    std::vector<double> values;
    bool requires_grad = false;
    int node = -1;

    std::size_t size() const { return values.size(); }
    bool is_scalar() const { return values.size() == 1; }
    double scalar() const;
};

// Data tensor outside any tape.
Tensor make_constant(Shape shape, std::vector<double> values);
Tensor make_scalar(double v);

enum class Op {
    leaf,
    matmul,
    add,
    sub,
    mul,
    relu,
    tanh_fn,
    sigmoid,
    concat,
    flip,
    slice,
    reshape,
    swap01,
    scale,
    sum,
    mean_sq_norm,
    mean_norm,
};

// Recording of one forward operation: enough saved state to run its
// backward rule without recomputation. Input slots are node ids, -1 when
// the operand was a plain constant (no gradient flows there).
struct Node {
    Op op = Op::leaf;
    int a = -1;
    int b = -1;
    Shape shape;    // output shape
    Shape a_shape;
    Shape b_shape;
    std::vector<double> saved_a;  // operand values, when the rule needs them
    std::vector<double> saved_b;
    std::vector<double> saved_out;
    int axis = 0;
    int start = 0;
    double factor = 1.0;
};

// Records a single-threaded chain of tensor operations and runs reverse-mode
// accumulation over it. A tape and its tensors belong to one unit of work;
// distinct tapes are independent and may live on different threads.
class Tape {
public:
    // Trainable input: gets a node and a gradient slot.
    Tensor leaf(Shape shape, std::vector<double> values);

    Tensor matmul(const Tensor& a, const Tensor& b);

    // Binary elementwise ops accept equal shapes, or a right operand whose
    // shape is a trailing suffix of the left's (bias vectors, per-frame
    // anchors). The suffix operand is broadcast across the leading axes.
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);

    Tensor relu(const Tensor& a);
    Tensor tanh(const Tensor& a);
    Tensor sigmoid(const Tensor& a);

    Tensor concat(const Tensor& a, const Tensor& b, int axis);
    Tensor flip(const Tensor& a, int axis);
    Tensor slice(const Tensor& a, int axis, int start, int len);
    Tensor reshape(const Tensor& a, Shape shape);
    // Swap the first two axes (rank >= 2); transposition for matrices.
    Tensor swap01(const Tensor& a);
    Tensor scale(const Tensor& a, double s);
    Tensor sum(const Tensor& a);

    // (1/(T*J)) * sum_{t,j} ||pred_{t,j} - gt_{t,j}||^2 over T x J x 3 frames.
    Tensor mean_sq_norm(const Tensor& pred, const Tensor& gt);
    // Same reduction with the unsquared Euclidean norm per joint.
    Tensor mean_norm(const Tensor& pred, const Tensor& gt);

    // Reverse-topological accumulation of d loss / d node for every node at
    // or below the loss. The loss must be a scalar produced by this tape.
    void backward(const Tensor& loss);

    // Gradient of a taped tensor after backward(); zeros if unreachable.
    const std::vector<double>& grad(const Tensor& t);

    std::size_t node_count() const { return nodes_.size(); }

private:
    int push(Node n);
    Tensor result_of(Op op, const Tensor& a, const Tensor& b, Shape shape,
                     std::vector<double> values, Node proto);
    std::vector<double>& grad_slot(int id);
    Tensor binary_elementwise(Op op, const Tensor& a, const Tensor& b);
    Tensor unary(Op op, const Tensor& a);

    std::vector<Node> nodes_;
    std::vector<std::vector<double>> grads_;
    bool ran_backward_ = false;
};

// Finite-difference verification of a taped program. `build` must be a
// deterministic function of the parameter tensors it is handed; it is
// re-evaluated 2 * (total parameter entries) times with central
// perturbations of size epsilon.
struct GradCheckProgram {
    std::vector<Shape> shapes;
    std::vector<std::vector<double>> values;
    std::function<Tensor(Tape&, const std::vector<Tensor>&)> build;
};

// Returns max over parameter entries of
// |analytic - numeric| / max(1e-12, |analytic| + |numeric|).
double grad_check(const GradCheckProgram& program, double epsilon);

}  // namespace td2ip
