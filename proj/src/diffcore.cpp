#include "causalbound/diffcore.hpp"

#include "causalbound/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace causalbound::diff {

namespace {

std::string shape_str(std::size_t r, std::size_t c) {
    return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

[[noreturn]] void shape_error(const char* op, std::size_t ar, std::size_t ac,
                              std::size_t br, std::size_t bc) {
    throw std::runtime_error(std::string(op) + ": incompatible shapes " +
                             shape_str(ar, ac) + " and " + shape_str(br, bc));
}

}  // namespace

const Tape::Node& Tape::at(Var v) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw std::runtime_error("Tape: invalid Var handle");
    return nodes_[static_cast<std::size_t>(v.id)];
}

Var Tape::push(Node node) {
    node.grad.assign(node.value.size(), 0.0);
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(std::size_t rows, std::size_t cols, std::span<const double> values) {
    if (values.size() != rows * cols)
        throw std::runtime_error("leaf: value count " + std::to_string(values.size()) +
                                 " does not match shape " + shape_str(rows, cols));
    Node n;
    n.op = Op::Leaf;
    n.rows = rows;
    n.cols = cols;
    n.value.assign(values.begin(), values.end());
    return push(std::move(n));
}

Var Tape::scalar(double v) {
    const double vv[1] = {v};
    return leaf(1, 1, vv);
}

Var Tape::binary(Op op, Var a, Var b, const char* name) {
    const Node& na = at(a);
    const Node& nb = at(b);
    Node n;
    n.op = op;
    n.p0 = a.id;
    n.p1 = b.id;
    n.rows = na.rows;
    n.cols = na.cols;
    if (na.rows == nb.rows && na.cols == nb.cols) {
        n.bc = Broadcast::None;
    } else if (nb.rows == 1 && nb.cols == 1) {
        n.bc = Broadcast::Scalar;
    } else if (nb.rows == 1 && nb.cols == na.cols) {
        n.bc = Broadcast::Row;
    } else {
        shape_error(name, na.rows, na.cols, nb.rows, nb.cols);
    }
    n.value.resize(na.value.size());
    for (std::size_t i = 0; i < na.value.size(); ++i) {
        double bv;
        switch (n.bc) {
            case Broadcast::None: bv = nb.value[i]; break;
            case Broadcast::Scalar: bv = nb.value[0]; break;
            default: bv = nb.value[i % na.cols]; break;
        }
        switch (op) {
            case Op::Add: n.value[i] = na.value[i] + bv; break;
            case Op::Sub: n.value[i] = na.value[i] - bv; break;
            case Op::Mul: n.value[i] = na.value[i] * bv; break;
            case Op::Div: n.value[i] = na.value[i] / bv; break;
            default: throw std::logic_error("binary: bad op");
        }
    }
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) { return binary(Op::Add, a, b, "add"); }
Var Tape::sub(Var a, Var b) { return binary(Op::Sub, a, b, "sub"); }
Var Tape::mul(Var a, Var b) { return binary(Op::Mul, a, b, "mul"); }
Var Tape::div(Var a, Var b) { return binary(Op::Div, a, b, "div"); }

Var Tape::matmul(Var a, Var b) {
    const Node& na = at(a);
    const Node& nb = at(b);
    if (na.cols != nb.rows) shape_error("matmul", na.rows, na.cols, nb.rows, nb.cols);
    Node n;
    n.op = Op::MatMul;
    n.p0 = a.id;
    n.p1 = b.id;
    n.rows = na.rows;
    n.cols = nb.cols;
    n.value.assign(n.rows * n.cols, 0.0);
    for (std::size_t i = 0; i < na.rows; ++i)
        for (std::size_t k = 0; k < na.cols; ++k) {
            const double aik = na.value[i * na.cols + k];
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < nb.cols; ++j)
                n.value[i * n.cols + j] += aik * nb.value[k * nb.cols + j];
        }
    return push(std::move(n));
}

Var Tape::transpose(Var a) {
    const Node& na = at(a);
    Node n;
    n.op = Op::Transpose;
    n.p0 = a.id;
    n.rows = na.cols;
    n.cols = na.rows;
    n.value.resize(na.value.size());
    for (std::size_t i = 0; i < na.rows; ++i)
        for (std::size_t j = 0; j < na.cols; ++j)
            n.value[j * n.cols + i] = na.value[i * na.cols + j];
    return push(std::move(n));
}

Var Tape::unary(Op op, Var a, double alpha) {
    const Node& na = at(a);
    Node n;
    n.op = op;
    n.p0 = a.id;
    n.alpha = alpha;
    n.rows = na.rows;
    n.cols = na.cols;
    n.value.resize(na.value.size());
    for (std::size_t i = 0; i < na.value.size(); ++i) {
        const double x = na.value[i];
        switch (op) {
            case Op::Relu: n.value[i] = x > 0.0 ? x : 0.0; break;
            case Op::CMax: n.value[i] = x > alpha ? x : alpha; break;
            case Op::Square: n.value[i] = x * x; break;
            case Op::Abs: n.value[i] = std::fabs(x); break;
            case Op::Sqrt: n.value[i] = std::sqrt(x); break;
            case Op::Exp: n.value[i] = std::exp(x); break;
            case Op::Log: n.value[i] = std::log(x); break;
            case Op::Neg: n.value[i] = -x; break;
            case Op::Scale: n.value[i] = alpha * x; break;
            case Op::Shift: n.value[i] = x + alpha; break;
            default: throw std::logic_error("unary: bad op");
        }
    }
    return push(std::move(n));
}

Var Tape::relu(Var a) { return unary(Op::Relu, a); }
Var Tape::cmax(Var a, double c) { return unary(Op::CMax, a, c); }
Var Tape::square(Var a) { return unary(Op::Square, a); }
Var Tape::abs(Var a) { return unary(Op::Abs, a); }
Var Tape::sqrt(Var a) { return unary(Op::Sqrt, a); }
Var Tape::exp(Var a) { return unary(Op::Exp, a); }
Var Tape::log(Var a) { return unary(Op::Log, a); }
Var Tape::neg(Var a) { return unary(Op::Neg, a); }
Var Tape::scale(Var a, double alpha) { return unary(Op::Scale, a, alpha); }
Var Tape::shift(Var a, double alpha) { return unary(Op::Shift, a, alpha); }

Var Tape::sum(Var a) {
    const Node& na = at(a);
    Node n;
    n.op = Op::Sum;
    n.p0 = a.id;
    n.rows = n.cols = 1;
    double s = 0.0;
    for (double x : na.value) s += x;
    n.value = {s};
    return push(std::move(n));
}

Var Tape::mean(Var a) {
    const Node& na = at(a);
    Node n;
    n.op = Op::Mean;
    n.p0 = a.id;
    n.rows = n.cols = 1;
    double s = 0.0;
    for (double x : na.value) s += x;
    n.value = {s / static_cast<double>(na.value.size())};
    return push(std::move(n));
}

Var Tape::row_sum(Var a) {
    const Node& na = at(a);
    Node n;
    n.op = Op::RowSum;
    n.p0 = a.id;
    n.rows = na.rows;
    n.cols = 1;
    n.value.assign(na.rows, 0.0);
    for (std::size_t i = 0; i < na.rows; ++i)
        for (std::size_t j = 0; j < na.cols; ++j) n.value[i] += na.value[i * na.cols + j];
    return push(std::move(n));
}

Var Tape::col_mean(Var a) {
    const Node& na = at(a);
    Node n;
    n.op = Op::ColMean;
    n.p0 = a.id;
    n.rows = 1;
    n.cols = na.cols;
    n.value.assign(na.cols, 0.0);
    for (std::size_t i = 0; i < na.rows; ++i)
        for (std::size_t j = 0; j < na.cols; ++j) n.value[j] += na.value[i * na.cols + j];
    for (double& v : n.value) v /= static_cast<double>(na.rows);
    return push(std::move(n));
}

Var Tape::concat_cols(Var a, Var b) {
    const Node& na = at(a);
    const Node& nb = at(b);
    if (na.rows != nb.rows) shape_error("concat_cols", na.rows, na.cols, nb.rows, nb.cols);
    Node n;
    n.op = Op::ConcatCols;
    n.p0 = a.id;
    n.p1 = b.id;
    n.rows = na.rows;
    n.cols = na.cols + nb.cols;
    n.i0 = na.cols;
    n.value.resize(n.rows * n.cols);
    for (std::size_t i = 0; i < n.rows; ++i) {
        for (std::size_t j = 0; j < na.cols; ++j)
            n.value[i * n.cols + j] = na.value[i * na.cols + j];
        for (std::size_t j = 0; j < nb.cols; ++j)
            n.value[i * n.cols + na.cols + j] = nb.value[i * nb.cols + j];
    }
    return push(std::move(n));
}

Var Tape::concat_rows(Var a, Var b) {
    const Node& na = at(a);
    const Node& nb = at(b);
    if (na.cols != nb.cols) shape_error("concat_rows", na.rows, na.cols, nb.rows, nb.cols);
    Node n;
    n.op = Op::ConcatRows;
    n.p0 = a.id;
    n.p1 = b.id;
    n.rows = na.rows + nb.rows;
    n.cols = na.cols;
    n.i0 = na.rows;
    n.value = na.value;
    n.value.insert(n.value.end(), nb.value.begin(), nb.value.end());
    return push(std::move(n));
}

Var Tape::slice_rows(Var a, std::size_t start, std::size_t count) {
    const Node& na = at(a);
    if (start + count > na.rows)
        throw std::runtime_error("slice_rows: range out of bounds for " +
                                 shape_str(na.rows, na.cols));
    Node n;
    n.op = Op::SliceRows;
    n.p0 = a.id;
    n.rows = count;
    n.cols = na.cols;
    n.i0 = start;
    n.value.assign(na.value.begin() + static_cast<std::ptrdiff_t>(start * na.cols),
                   na.value.begin() + static_cast<std::ptrdiff_t>((start + count) * na.cols));
    return push(std::move(n));
}

Var Tape::slice_cols(Var a, std::size_t start, std::size_t count) {
    const Node& na = at(a);
    if (start + count > na.cols)
        throw std::runtime_error("slice_cols: range out of bounds for " +
                                 shape_str(na.rows, na.cols));
    Node n;
    n.op = Op::SliceCols;
    n.p0 = a.id;
    n.rows = na.rows;
    n.cols = count;
    n.i0 = start;
    n.value.resize(na.rows * count);
    for (std::size_t i = 0; i < na.rows; ++i)
        for (std::size_t j = 0; j < count; ++j)
            n.value[i * count + j] = na.value[i * na.cols + start + j];
    return push(std::move(n));
}

Var Tape::tril_from_packed(Var v, std::size_t k) {
    const Node& nv = at(v);
    if (nv.value.size() != k * (k + 1) / 2)
        throw std::runtime_error("tril_from_packed: expected " +
                                 std::to_string(k * (k + 1) / 2) + " entries, got " +
                                 std::to_string(nv.value.size()));
    Node n;
    n.op = Op::TrilFromPacked;
    n.p0 = v.id;
    n.rows = n.cols = k;
    n.i0 = k;
    n.value.assign(k * k, 0.0);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j <= i; ++j) n.value[i * k + j] = nv.value[idx++];
    return push(std::move(n));
}

Var Tape::matinv(Var a) {
    const Node& na = at(a);
    if (na.rows != na.cols) shape_error("matinv", na.rows, na.cols, na.rows, na.cols);
    Matrix m(na.rows, na.cols, na.value);
    Matrix inv = inverse(m);
    Node n;
    n.op = Op::MatInv;
    n.p0 = a.id;
    n.rows = na.rows;
    n.cols = na.cols;
    n.value = inv.data();
    return push(std::move(n));
}

Var Tape::logdet(Var a) {
    const Node& na = at(a);
    if (na.rows != na.cols) shape_error("logdet", na.rows, na.cols, na.rows, na.cols);
    Matrix l = cholesky(Matrix(na.rows, na.cols, na.value));
    double ld = 0.0;
    for (std::size_t i = 0; i < na.rows; ++i) ld += std::log(l(i, i));
    Node n;
    n.op = Op::LogDet;
    n.p0 = a.id;
    n.rows = n.cols = 1;
    n.value = {2.0 * ld};
    return push(std::move(n));
}

void Tape::zero_grad() {
    for (Node& n : nodes_) n.grad.assign(n.grad.size(), 0.0);
}

void Tape::backward(Var out) {
    const Node& no = at(out);
    if (no.rows != 1 || no.cols != 1)
        throw std::runtime_error("backward: output must be scalar, got " +
                                 shape_str(no.rows, no.cols));
    nodes_[static_cast<std::size_t>(out.id)].grad[0] += 1.0;
    for (int id = out.id; id >= 0; --id) backward_node(id);
}

void Tape::backward_node(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.op == Op::Leaf) return;
    auto& g = n.grad;
    Node* a = n.p0 >= 0 ? &nodes_[static_cast<std::size_t>(n.p0)] : nullptr;
    Node* b = n.p1 >= 0 ? &nodes_[static_cast<std::size_t>(n.p1)] : nullptr;

    auto bcast_accum = [&](std::size_t i, double db) {
        switch (n.bc) {
            case Broadcast::None: b->grad[i] += db; break;
            case Broadcast::Scalar: b->grad[0] += db; break;
            default: b->grad[i % n.cols] += db; break;
        }
    };
    auto bval = [&](std::size_t i) {
        switch (n.bc) {
            case Broadcast::None: return b->value[i];
            case Broadcast::Scalar: return b->value[0];
            default: return b->value[i % n.cols];
        }
    };

    switch (n.op) {
        case Op::Add:
            for (std::size_t i = 0; i < g.size(); ++i) {
                a->grad[i] += g[i];
                bcast_accum(i, g[i]);
            }
            break;
        case Op::Sub:
            for (std::size_t i = 0; i < g.size(); ++i) {
                a->grad[i] += g[i];
                bcast_accum(i, -g[i]);
            }
            break;
        case Op::Mul:
            for (std::size_t i = 0; i < g.size(); ++i) {
                a->grad[i] += g[i] * bval(i);
                bcast_accum(i, g[i] * a->value[i]);
            }
            break;
        case Op::Div:
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double bv = bval(i);
                a->grad[i] += g[i] / bv;
                bcast_accum(i, -g[i] * a->value[i] / (bv * bv));
            }
            break;
        case Op::MatMul:
            // dA = G B^T ; dB = A^T G
            for (std::size_t i = 0; i < a->rows; ++i)
                for (std::size_t j = 0; j < n.cols; ++j) {
                    const double gij = g[i * n.cols + j];
                    if (gij == 0.0) continue;
                    for (std::size_t k = 0; k < a->cols; ++k) {
                        a->grad[i * a->cols + k] += gij * b->value[k * b->cols + j];
                        b->grad[k * b->cols + j] += gij * a->value[i * a->cols + k];
                    }
                }
            break;
        case Op::Transpose:
            for (std::size_t i = 0; i < n.rows; ++i)
                for (std::size_t j = 0; j < n.cols; ++j)
                    a->grad[j * a->cols + i] += g[i * n.cols + j];
            break;
        case Op::Relu:
            for (std::size_t i = 0; i < g.size(); ++i)
                if (a->value[i] > 0.0) a->grad[i] += g[i];
            break;
        case Op::CMax:
            for (std::size_t i = 0; i < g.size(); ++i)
                if (a->value[i] > n.alpha) a->grad[i] += g[i];
            break;
        case Op::Square:
            for (std::size_t i = 0; i < g.size(); ++i)
                a->grad[i] += 2.0 * a->value[i] * g[i];
            break;
        case Op::Abs:
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (a->value[i] > 0.0)
                    a->grad[i] += g[i];
                else if (a->value[i] < 0.0)
                    a->grad[i] -= g[i];
            }
            break;
        case Op::Sqrt:
            for (std::size_t i = 0; i < g.size(); ++i)
                a->grad[i] += 0.5 * g[i] / n.value[i];
            break;
        case Op::Exp:
            for (std::size_t i = 0; i < g.size(); ++i) a->grad[i] += g[i] * n.value[i];
            break;
        case Op::Log:
            for (std::size_t i = 0; i < g.size(); ++i) a->grad[i] += g[i] / a->value[i];
            break;
        case Op::Neg:
            for (std::size_t i = 0; i < g.size(); ++i) a->grad[i] -= g[i];
            break;
        case Op::Scale:
            for (std::size_t i = 0; i < g.size(); ++i) a->grad[i] += n.alpha * g[i];
            break;
        case Op::Shift:
            for (std::size_t i = 0; i < g.size(); ++i) a->grad[i] += g[i];
            break;
        case Op::Sum:
            for (double& ag : a->grad) ag += g[0];
            break;
        case Op::Mean: {
            const double s = g[0] / static_cast<double>(a->value.size());
            for (double& ag : a->grad) ag += s;
            break;
        }
        case Op::RowSum:
            for (std::size_t i = 0; i < a->rows; ++i)
                for (std::size_t j = 0; j < a->cols; ++j)
                    a->grad[i * a->cols + j] += g[i];
            break;
        case Op::ColMean: {
            const double inv = 1.0 / static_cast<double>(a->rows);
            for (std::size_t i = 0; i < a->rows; ++i)
                for (std::size_t j = 0; j < a->cols; ++j)
                    a->grad[i * a->cols + j] += g[j] * inv;
            break;
        }
        case Op::ConcatCols:
            for (std::size_t i = 0; i < n.rows; ++i) {
                for (std::size_t j = 0; j < n.i0; ++j)
                    a->grad[i * a->cols + j] += g[i * n.cols + j];
                for (std::size_t j = n.i0; j < n.cols; ++j)
                    b->grad[i * b->cols + (j - n.i0)] += g[i * n.cols + j];
            }
            break;
        case Op::ConcatRows: {
            const std::size_t split = n.i0 * n.cols;
            for (std::size_t i = 0; i < split; ++i) a->grad[i] += g[i];
            for (std::size_t i = split; i < g.size(); ++i) b->grad[i - split] += g[i];
            break;
        }
        case Op::SliceRows:
            for (std::size_t i = 0; i < n.rows; ++i)
                for (std::size_t j = 0; j < n.cols; ++j)
                    a->grad[(n.i0 + i) * a->cols + j] += g[i * n.cols + j];
            break;
        case Op::SliceCols:
            for (std::size_t i = 0; i < n.rows; ++i)
                for (std::size_t j = 0; j < n.cols; ++j)
                    a->grad[i * a->cols + n.i0 + j] += g[i * n.cols + j];
            break;
        case Op::TrilFromPacked: {
            std::size_t idx = 0;
            const std::size_t k = n.i0;
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j <= i; ++j) a->grad[idx++] += g[i * k + j];
            break;
        }
        case Op::MatInv: {
            // dA = -Inv^T G Inv^T, Inv = this node's value
            const std::size_t k = n.rows;
            Matrix inv(k, k, n.value);
            Matrix gm(k, k, std::vector<double>(g.begin(), g.end()));
            Matrix invT = causalbound::transpose(inv);
            Matrix da = causalbound::matmul(causalbound::matmul(invT, gm), invT);
            for (std::size_t i = 0; i < k * k; ++i) a->grad[i] -= da.data()[i];
            break;
        }
        case Op::LogDet: {
            const std::size_t k = a->rows;
            Matrix inv = inverse(Matrix(k, k, a->value));
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j < k; ++j)
                    a->grad[i * k + j] += g[0] * inv(j, i);
            break;
        }
        case Op::Leaf:
            break;
    }
}

std::size_t Tape::rows(Var v) const { return at(v).rows; }
std::size_t Tape::cols(Var v) const { return at(v).cols; }
const std::vector<double>& Tape::value(Var v) const { return at(v).value; }
const std::vector<double>& Tape::grad(Var v) const { return at(v).grad; }

double Tape::value_scalar(Var v) const {
    const Node& n = at(v);
    if (n.value.size() != 1)
        throw std::runtime_error("value_scalar: tensor is not scalar");
    return n.value[0];
}

double gradient_check(const std::function<Var(Tape&, Var)>& f,
                      std::span<const double> point, std::size_t rows,
                      std::size_t cols, double step) {
    Tape tape;
    Var in = tape.leaf(rows, cols, point);
    Var out = f(tape, in);
    tape.backward(out);
    const std::vector<double> ad = tape.grad(in);

    std::vector<double> x(point.begin(), point.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        auto eval = [&](double v) {
            x[i] = v;
            Tape t;
            Var leaf = t.leaf(rows, cols, x);
            return t.value_scalar(f(t, leaf));
        };
        const double fd = (eval(orig + step) - eval(orig - step)) / (2.0 * step);
        x[i] = orig;
        const double err = std::fabs(ad[i] - fd) / (std::fabs(fd) + 1e-8);
        if (err > worst) worst = err;
    }
    return worst;
}

}  // namespace causalbound::diff
