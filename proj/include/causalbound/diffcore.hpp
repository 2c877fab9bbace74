#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace causalbound::diff {

// Handle into a Tape. Cheap to copy; only valid for the tape that made it.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff over dense 2-D tensors. Every tensor is a
// rows x cols matrix; scalars are 1x1. Evaluation is eager: each op
// computes its forward value when recorded. backward() replays the tape
// in reverse, accumulating gradients additively across fan-out.
class Tape {
  public:
    Var leaf(std::size_t rows, std::size_t cols, std::span<const double> values);
    Var scalar(double v);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);  // elementwise
    Var div(Var a, Var b);  // elementwise
    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var relu(Var a);
    Var cmax(Var a, double c);  // elementwise max(a, c)
    Var square(Var a);
    Var abs(Var a);
    Var sqrt(Var a);
    Var exp(Var a);
    Var log(Var a);
    Var neg(Var a);
    Var scale(Var a, double alpha);  // alpha * a
    Var shift(Var a, double alpha);  // a + alpha
    Var sum(Var a);
    Var mean(Var a);
    Var row_sum(Var a);   // r x c -> r x 1
    Var col_mean(Var a);  // r x c -> 1 x c
    Var concat_cols(Var a, Var b);
    Var concat_rows(Var a, Var b);
    Var slice_rows(Var a, std::size_t start, std::size_t count);
    Var slice_cols(Var a, std::size_t start, std::size_t count);
    // Packed lower-triangular vector (row-major, length k(k+1)/2) -> k x k.
    Var tril_from_packed(Var v, std::size_t k);
    Var matinv(Var a);  // small square matrices
    Var logdet(Var a);  // symmetric positive definite

    void backward(Var out);
    void zero_grad();

    std::size_t rows(Var v) const;
    std::size_t cols(Var v) const;
    const std::vector<double>& value(Var v) const;
    const std::vector<double>& grad(Var v) const;
    double value_scalar(Var v) const;
    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

  private:
    enum class Op {
        Leaf, Add, Sub, Mul, Div, MatMul, Transpose, Relu, CMax, Square, Abs,
        Sqrt, Exp, Log, Neg, Scale, Shift, Sum, Mean, RowSum, ColMean,
        ConcatCols, ConcatRows, SliceRows, SliceCols, TrilFromPacked, MatInv,
        LogDet,
    };
    enum class Broadcast { None, Scalar, Row };

    struct Node {
        Op op;
        std::size_t rows, cols;
        std::vector<double> value;
        std::vector<double> grad;
        int p0 = -1, p1 = -1;
        double alpha = 0.0;
        std::size_t i0 = 0, i1 = 0;
        Broadcast bc = Broadcast::None;
    };

    Var push(Node node);
    Var binary(Op op, Var a, Var b, const char* name);
    Var unary(Op op, Var a, double alpha = 0.0);
    const Node& at(Var v) const;
    void backward_node(int id);

    std::vector<Node> nodes_;
};

// f maps an input leaf to a scalar output on the given tape. Returns the
// max over coordinates of |autodiff - central difference| / (|cd| + 1e-8).
double gradient_check(const std::function<Var(Tape&, Var)>& f,
                      std::span<const double> point, std::size_t rows,
                      std::size_t cols, double step);

}  // namespace causalbound::diff
