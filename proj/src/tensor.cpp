#include "td2ip/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace td2ip {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (int e : shape) n *= static_cast<std::size_t>(e);
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

double Tensor::scalar() const {
    if (values.size() != 1)
        throw ContractError("scalar() on tensor of shape " + shape_str(shape));
    return values[0];
}

Tensor make_constant(Shape shape, std::vector<double> values) {
    for (int e : shape)
        if (e < 0) throw DimensionError("negative extent in shape " + shape_str(shape));
    if (numel(shape) != values.size())
        throw DimensionError("shape " + shape_str(shape) + " does not match " +
                             std::to_string(values.size()) + " values");
    Tensor t;
    t.shape = std::move(shape);
    t.values = std::move(values);
    return t;
}

Tensor make_scalar(double v) { return make_constant({}, {v}); }

namespace {

// Decompose a shape around an axis: product of extents before, at, after.
struct AxisSplit {
    std::size_t outer = 1, mid = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, int axis) {
    AxisSplit s;
    for (int i = 0; i < static_cast<int>(shape.size()); ++i) {
        std::size_t e = static_cast<std::size_t>(shape[i]);
        if (i < axis)
            s.outer *= e;
        else if (i == axis)
            s.mid = e;
        else
            s.inner *= e;
    }
    return s;
}

void check_axis(const Shape& shape, int axis, const char* op) {
    if (axis < 0 || axis >= static_cast<int>(shape.size()))
        throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                             " out of range for shape " + shape_str(shape));
}

bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() >= big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_frames(const Tensor& pred, const Tensor& gt, const char* op) {
    if (pred.shape != gt.shape)
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(pred.shape) +
                             " vs " + shape_str(gt.shape));
    if (pred.shape.size() != 3 || pred.shape[2] != 3)
        throw DimensionError(std::string(op) + ": expected a T x J x 3 tensor, got " +
                             shape_str(pred.shape));
}

}  // namespace

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    ran_backward_ = false;
    return static_cast<int>(nodes_.size()) - 1;
}

Tensor Tape::result_of(Op op, const Tensor& a, const Tensor& b, Shape shape,
                       std::vector<double> values, Node proto) {
    Tensor out;
    out.shape = std::move(shape);
    out.values = std::move(values);
    if (a.node < 0 && b.node < 0) return out;  // constant-folded, nothing to record
    proto.op = op;
    proto.a = a.node;
    proto.b = b.node;
    proto.shape = out.shape;
    proto.a_shape = a.shape;
    proto.b_shape = b.shape;
    out.requires_grad = true;
    out.node = push(std::move(proto));
    return out;
}

Tensor Tape::leaf(Shape shape, std::vector<double> values) {
    Tensor t = make_constant(std::move(shape), std::move(values));
    t.requires_grad = true;
    Node n;
    n.op = Op::leaf;
    n.shape = t.shape;
    t.node = push(std::move(n));
    return t;
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0])
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape) + " vs " +
                             shape_str(b.shape));
    const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l < k; ++l) {
            const double av = a.values[static_cast<std::size_t>(i) * k + l];
            const double* brow = &b.values[static_cast<std::size_t>(l) * n];
            double* orow = &out[static_cast<std::size_t>(i) * n];
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    Node proto;
    if (a.node >= 0 || b.node >= 0) {
        proto.saved_a = a.values;
        proto.saved_b = b.values;
    }
    return result_of(Op::matmul, a, b, {m, n}, std::move(out), std::move(proto));
}

Tensor Tape::binary_elementwise(Op op, const Tensor& a, const Tensor& b) {
    const bool same = a.shape == b.shape;
    if (!same && !is_suffix(b.shape, a.shape))
        throw DimensionError("elementwise: incompatible shapes " + shape_str(a.shape) + " vs " +
                             shape_str(b.shape));
    const std::size_t bn = b.values.size();
    std::vector<double> out(a.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double bv = b.values[same ? i : i % bn];
        switch (op) {
            case Op::add: out[i] = a.values[i] + bv; break;
            case Op::sub: out[i] = a.values[i] - bv; break;
            case Op::mul: out[i] = a.values[i] * bv; break;
            default: throw ContractError("binary_elementwise: bad op");
        }
    }
    Node proto;
    if (op == Op::mul && (a.node >= 0 || b.node >= 0)) {
        proto.saved_a = a.values;
        proto.saved_b = b.values;
    }
    return result_of(op, a, b, a.shape, std::move(out), std::move(proto));
}

Tensor Tape::add(const Tensor& a, const Tensor& b) { return binary_elementwise(Op::add, a, b); }
Tensor Tape::sub(const Tensor& a, const Tensor& b) { return binary_elementwise(Op::sub, a, b); }
Tensor Tape::mul(const Tensor& a, const Tensor& b) { return binary_elementwise(Op::mul, a, b); }

Tensor Tape::unary(Op op, const Tensor& a) {
    std::vector<double> out(a.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = a.values[i];
        switch (op) {
            case Op::relu: out[i] = x > 0.0 ? x : 0.0; break;
            case Op::tanh_fn: out[i] = std::tanh(x); break;
            case Op::sigmoid: out[i] = stable_sigmoid(x); break;
            default: throw ContractError("unary: bad op");
        }
    }
    Node proto;
    if (a.node >= 0) {
        if (op == Op::relu)
            proto.saved_a = a.values;
        else
            proto.saved_out = out;
    }
    Tensor dummy;
    return result_of(op, a, dummy, a.shape, std::move(out), std::move(proto));
}

Tensor Tape::relu(const Tensor& a) { return unary(Op::relu, a); }
Tensor Tape::tanh(const Tensor& a) { return unary(Op::tanh_fn, a); }
Tensor Tape::sigmoid(const Tensor& a) { return unary(Op::sigmoid, a); }

Tensor Tape::concat(const Tensor& a, const Tensor& b, int axis) {
    if (a.shape.size() != b.shape.size())
        throw DimensionError("concat: rank mismatch " + shape_str(a.shape) + " vs " +
                             shape_str(b.shape));
    check_axis(a.shape, axis, "concat");
    for (int i = 0; i < static_cast<int>(a.shape.size()); ++i)
        if (i != axis && a.shape[i] != b.shape[i])
            throw DimensionError("concat: off-axis extent mismatch " + shape_str(a.shape) +
                                 " vs " + shape_str(b.shape) + " at axis " + std::to_string(i));
    Shape shape = a.shape;
    shape[axis] += b.shape[axis];
    const AxisSplit sa = split_at(a.shape, axis);
    const AxisSplit sb = split_at(b.shape, axis);
    std::vector<double> out(numel(shape));
    const std::size_t stride = (sa.mid + sb.mid) * sa.inner;
    for (std::size_t o = 0; o < sa.outer; ++o) {
        std::copy_n(&a.values[o * sa.mid * sa.inner], sa.mid * sa.inner, &out[o * stride]);
        std::copy_n(&b.values[o * sb.mid * sb.inner], sb.mid * sb.inner,
                    &out[o * stride + sa.mid * sa.inner]);
    }
    Node proto;
    proto.axis = axis;
    return result_of(Op::concat, a, b, std::move(shape), std::move(out), std::move(proto));
}

Tensor Tape::flip(const Tensor& a, int axis) {
    check_axis(a.shape, axis, "flip");
    const AxisSplit s = split_at(a.shape, axis);
    std::vector<double> out(a.values.size());
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t m = 0; m < s.mid; ++m)
            std::copy_n(&a.values[(o * s.mid + m) * s.inner], s.inner,
                        &out[(o * s.mid + (s.mid - 1 - m)) * s.inner]);
    Node proto;
    proto.axis = axis;
    Tensor dummy;
    return result_of(Op::flip, a, dummy, a.shape, std::move(out), std::move(proto));
}

Tensor Tape::slice(const Tensor& a, int axis, int start, int len) {
    check_axis(a.shape, axis, "slice");
    if (start < 0 || len < 0 || start + len > a.shape[axis])
        throw DimensionError("slice: range [" + std::to_string(start) + ", " +
                             std::to_string(start + len) + ") out of bounds for shape " +
                             shape_str(a.shape) + " axis " + std::to_string(axis));
    Shape shape = a.shape;
    shape[axis] = len;
    const AxisSplit s = split_at(a.shape, axis);
    std::vector<double> out(numel(shape));
    for (std::size_t o = 0; o < s.outer; ++o)
        std::copy_n(&a.values[(o * s.mid + static_cast<std::size_t>(start)) * s.inner],
                    static_cast<std::size_t>(len) * s.inner,
                    &out[o * static_cast<std::size_t>(len) * s.inner]);
    Node proto;
    proto.axis = axis;
    proto.start = start;
    Tensor dummy;
    return result_of(Op::slice, a, dummy, std::move(shape), std::move(out), std::move(proto));
}

Tensor Tape::reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.values.size())
        throw DimensionError("reshape: cannot view " + shape_str(a.shape) + " as " +
                             shape_str(shape));
    Tensor dummy;
    return result_of(Op::reshape, a, dummy, std::move(shape), a.values, {});
}

Tensor Tape::swap01(const Tensor& a) {
    if (a.shape.size() < 2)
        throw DimensionError("swap01: rank must be >= 2, got " + shape_str(a.shape));
    const std::size_t d0 = static_cast<std::size_t>(a.shape[0]);
    const std::size_t d1 = static_cast<std::size_t>(a.shape[1]);
    const std::size_t inner = a.values.size() / (d0 * d1 ? d0 * d1 : 1);
    Shape shape = a.shape;
    std::swap(shape[0], shape[1]);
    std::vector<double> out(a.values.size());
    for (std::size_t i = 0; i < d0; ++i)
        for (std::size_t j = 0; j < d1; ++j)
            std::copy_n(&a.values[(i * d1 + j) * inner], inner, &out[(j * d0 + i) * inner]);
    Tensor dummy;
    return result_of(Op::swap01, a, dummy, std::move(shape), std::move(out), {});
}

Tensor Tape::scale(const Tensor& a, double s) {
    std::vector<double> out(a.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values[i] * s;
    Node proto;
    proto.factor = s;
    Tensor dummy;
    return result_of(Op::scale, a, dummy, a.shape, std::move(out), std::move(proto));
}

Tensor Tape::sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.values) acc += v;
    Tensor dummy;
    return result_of(Op::sum, a, dummy, {}, {acc}, {});
}

Tensor Tape::mean_sq_norm(const Tensor& pred, const Tensor& gt) {
    check_frames(pred, gt, "mean_sq_norm");
    const double inv = 1.0 / (static_cast<double>(pred.shape[0]) * pred.shape[1]);
    std::vector<double> diff(pred.values.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < diff.size(); ++i) {
        diff[i] = pred.values[i] - gt.values[i];
        acc += diff[i] * diff[i];
    }
    Node proto;
    proto.factor = inv;
    if (pred.node >= 0 || gt.node >= 0) proto.saved_a = diff;
    return result_of(Op::mean_sq_norm, pred, gt, {}, {acc * inv}, std::move(proto));
}

Tensor Tape::mean_norm(const Tensor& pred, const Tensor& gt) {
    check_frames(pred, gt, "mean_norm");
    const double inv = 1.0 / (static_cast<double>(pred.shape[0]) * pred.shape[1]);
    std::vector<double> diff(pred.values.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = pred.values[i] - gt.values[i];
    double acc = 0.0;
    for (std::size_t p = 0; p < diff.size(); p += 3)
        acc += std::sqrt(diff[p] * diff[p] + diff[p + 1] * diff[p + 1] + diff[p + 2] * diff[p + 2]);
    Node proto;
    proto.factor = inv;
    if (pred.node >= 0 || gt.node >= 0) proto.saved_a = diff;
    return result_of(Op::mean_norm, pred, gt, {}, {acc * inv}, std::move(proto));
}

std::vector<double>& Tape::grad_slot(int id) {
    if (grads_[id].empty()) grads_[id].assign(numel(nodes_[id].shape), 0.0);
    return grads_[id];
}

void Tape::backward(const Tensor& loss) {
    if (loss.node < 0)
        throw ContractError("backward: loss is not on this tape");
    if (!loss.is_scalar())
        throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape));
    grads_.assign(nodes_.size(), {});
    grad_slot(loss.node)[0] = 1.0;

    for (int id = loss.node; id >= 0; --id) {
        if (grads_[id].empty()) continue;  // not reachable from the loss
        const Node& n = nodes_[id];
        const std::vector<double>& g = grads_[id];
        switch (n.op) {
            case Op::leaf:
                break;
            case Op::matmul: {
                const int m = n.a_shape[0], k = n.a_shape[1], c = n.b_shape[1];
                if (n.a >= 0) {
                    auto& da = grad_slot(n.a);
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < c; ++j) {
                            const double gv = g[static_cast<std::size_t>(i) * c + j];
                            for (int l = 0; l < k; ++l)
                                da[static_cast<std::size_t>(i) * k + l] +=
                                    gv * n.saved_b[static_cast<std::size_t>(l) * c + j];
                        }
                }
                if (n.b >= 0) {
                    auto& db = grad_slot(n.b);
                    for (int i = 0; i < m; ++i)
                        for (int l = 0; l < k; ++l) {
                            const double av = n.saved_a[static_cast<std::size_t>(i) * k + l];
                            for (int j = 0; j < c; ++j)
                                db[static_cast<std::size_t>(l) * c + j] +=
                                    av * g[static_cast<std::size_t>(i) * c + j];
                        }
                }
                break;
            }
            case Op::add:
            case Op::sub: {
                const double sign = n.op == Op::add ? 1.0 : -1.0;
                if (n.a >= 0) {
                    auto& da = grad_slot(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
                }
                if (n.b >= 0) {
                    auto& db = grad_slot(n.b);
                    const std::size_t bn = db.size();
                    for (std::size_t i = 0; i < g.size(); ++i) db[i % bn] += sign * g[i];
                }
                break;
            }
            case Op::mul: {
                const std::size_t bn = numel(n.b_shape);
                if (n.a >= 0) {
                    auto& da = grad_slot(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i)
                        da[i] += g[i] * n.saved_b[i % bn];
                }
                if (n.b >= 0) {
                    auto& db = grad_slot(n.b);
                    for (std::size_t i = 0; i < g.size(); ++i)
                        db[i % bn] += g[i] * n.saved_a[i];
                }
                break;
            }
            case Op::relu: {
                if (n.a >= 0) {
                    auto& da = grad_slot(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i)
                        if (n.saved_a[i] > 0.0) da[i] += g[i];
                }
                break;
            }
            case Op::tanh_fn: {
                if (n.a >= 0) {
                    auto& da = grad_slot(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i)
                        da[i] += g[i] * (1.0 - n.saved_out[i] * n.saved_out[i]);
                }
                break;
            }
            case Op::sigmoid: {
                if (n.a >= 0) {
                    auto& da = grad_slot(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i)
                        da[i] += g[i] * n.saved_out[i] * (1.0 - n.saved_out[i]);
                }
                break;
            }
            case Op::concat: {
                const AxisSplit sa = split_at(n.a_shape, n.axis);
                const AxisSplit sb = split_at(n.b_shape, n.axis);
                const std::size_t stride = (sa.mid + sb.mid) * sa.inner;
                if (n.a >= 0) {
                    auto& da = grad_slot(n.a);
                    for (std::size_t o = 0; o < sa.outer; ++o)
                        for (std::size_t i = 0; i < sa.mid * sa.inner; ++i)
                            da[o * sa.mid * sa.inner + i] += g[o * stride + i];
                }
                if (n.b >= 0) {
                    auto& db = grad_slot(n.b);
                    for (std::size_t o = 0; o < sb.outer; ++o)
                        for (std::size_t i = 0; i < sb.mid * sb.inner; ++i)
                            db[o * sb.mid * sb.inner + i] += g[o * stride + sa.mid * sa.inner + i];
                }
                break;
            }
            case Op::flip: {
                if (n.a >= 0) {
                    auto& da = grad_slot(n.a);
                    const AxisSplit s = split_at(n.a_shape, n.axis);
                    for (std::size_t o = 0; o < s.outer; ++o)
                        for (std::size_t m = 0; m < s.mid; ++m)
                            for (std::size_t i = 0; i < s.inner; ++i)
                                da[(o * s.mid + m) * s.inner + i] +=
                                    g[(o * s.mid + (s.mid - 1 - m)) * s.inner + i];
                }
                break;
            }
            case Op::slice: {
                if (n.a >= 0) {
                    auto& da = grad_slot(n.a);
                    const AxisSplit s = split_at(n.a_shape, n.axis);
                    const std::size_t len = static_cast<std::size_t>(n.shape[n.axis]);
                    for (std::size_t o = 0; o < s.outer; ++o)
                        for (std::size_t i = 0; i < len * s.inner; ++i)
                            da[(o * s.mid + static_cast<std::size_t>(n.start)) * s.inner + i] +=
                                g[o * len * s.inner + i];
                }
                break;
            }
            case Op::reshape: {
                if (n.a >= 0) {
                    auto& da = grad_slot(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
                }
                break;
            }
            case Op::swap01: {
                if (n.a >= 0) {
                    auto& da = grad_slot(n.a);
                    const std::size_t d0 = static_cast<std::size_t>(n.a_shape[0]);
                    const std::size_t d1 = static_cast<std::size_t>(n.a_shape[1]);
                    const std::size_t inner = g.size() / (d0 * d1 ? d0 * d1 : 1);
                    for (std::size_t i = 0; i < d0; ++i)
                        for (std::size_t j = 0; j < d1; ++j)
                            for (std::size_t t = 0; t < inner; ++t)
                                da[(i * d1 + j) * inner + t] += g[(j * d0 + i) * inner + t];
                }
                break;
            }
            case Op::scale: {
                if (n.a >= 0) {
                    auto& da = grad_slot(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * n.factor;
                }
                break;
            }
            case Op::sum: {
                if (n.a >= 0) {
                    auto& da = grad_slot(n.a);
                    for (std::size_t i = 0; i < da.size(); ++i) da[i] += g[0];
                }
                break;
            }
            case Op::mean_sq_norm: {
                const double c = 2.0 * n.factor * g[0];
                if (n.a >= 0) {
                    auto& da = grad_slot(n.a);
                    for (std::size_t i = 0; i < da.size(); ++i) da[i] += c * n.saved_a[i];
                }
                if (n.b >= 0) {
                    auto& db = grad_slot(n.b);
                    for (std::size_t i = 0; i < db.size(); ++i) db[i] -= c * n.saved_a[i];
                }
                break;
            }
            case Op::mean_norm: {
                const double c = n.factor * g[0];
                for (std::size_t p = 0; p < n.saved_a.size(); p += 3) {
                    const double dx = n.saved_a[p], dy = n.saved_a[p + 1], dz = n.saved_a[p + 2];
                    const double norm = std::sqrt(dx * dx + dy * dy + dz * dz);
                    const double w = c / std::max(norm, 1e-12);
                    if (n.a >= 0) {
                        auto& da = grad_slot(n.a);
                        da[p] += w * dx;
                        da[p + 1] += w * dy;
                        da[p + 2] += w * dz;
                    }
                    if (n.b >= 0) {
                        auto& db = grad_slot(n.b);
                        db[p] -= w * dx;
                        db[p + 1] -= w * dy;
                        db[p + 2] -= w * dz;
                    }
                }
                break;
            }
        }
    }
    ran_backward_ = true;
}

const std::vector<double>& Tape::grad(const Tensor& t) {
    if (t.node < 0) throw ContractError("grad: tensor has no tape node");
    if (!ran_backward_) throw ContractError("grad: backward() has not run");
    return grad_slot(t.node);
}

double grad_check(const GradCheckProgram& program, double epsilon) {
    if (epsilon <= 0.0) throw ContractError("grad_check: epsilon must be > 0");
    if (program.shapes.size() != program.values.size())
        throw ContractError("grad_check: shapes/values size mismatch");

    Tape tape;
    std::vector<Tensor> leaves;
    leaves.reserve(program.values.size());
    for (std::size_t p = 0; p < program.values.size(); ++p)
        leaves.push_back(tape.leaf(program.shapes[p], program.values[p]));
    Tensor loss = program.build(tape, leaves);
    if (!loss.is_scalar()) throw ContractError("grad_check: program must produce a scalar");
    if (!std::isfinite(loss.values[0]))
        throw NumericError("grad_check: non-finite loss at node " + std::to_string(loss.node));
    tape.backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (const Tensor& l : leaves) analytic.push_back(tape.grad(l));

    std::vector<std::vector<double>> work = program.values;
    auto eval = [&]() {
        Tape t;
        std::vector<Tensor> consts;
        consts.reserve(work.size());
        for (std::size_t p = 0; p < work.size(); ++p)
            consts.push_back(make_constant(program.shapes[p], work[p]));
        Tensor l = program.build(t, consts);
        if (!l.is_scalar() || !std::isfinite(l.values[0]))
            throw NumericError("grad_check: non-finite value during probe");
        return l.values[0];
    };

    double max_rel = 0.0;
    for (std::size_t p = 0; p < work.size(); ++p) {
        for (std::size_t i = 0; i < work[p].size(); ++i) {
            const double keep = work[p][i];
            work[p][i] = keep + epsilon;
            const double fp = eval();
            work[p][i] = keep - epsilon;
            const double fm = eval();
            work[p][i] = keep;
            const double numeric = (fp - fm) / (2.0 * epsilon);
            const double a = analytic[p][i];
            if (!std::isfinite(a))
                throw NumericError("grad_check: non-finite gradient for parameter " +
                                   std::to_string(p));
            const double rel =
                std::abs(a - numeric) / std::max(1e-12, std::abs(a) + std::abs(numeric));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace td2ip
