#pragma once

// Reverse-mode automatic differentiation over dense double matrices.
//
// A Tape records every primitive application in topological order. Values
// live on the tape; callers hold lightweight Var handles. backward() walks
// the tape in reverse and returns a Gradients table covering every node.
//
// Every tensor in this library is two-dimensional (rows x cols). Batches are
// rows, features are columns; a scalar is a 1x1 matrix.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace twr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  const Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
};

enum class Op : std::uint8_t {
  Leaf,
  Constant,
  MatMul,
  Add,
  Sub,
  Mul,
  AddRow,     // a (r x c) + b (1 x c) broadcast over rows
  MulCol,     // a (r x c) * b (r x 1) broadcast over columns
  ConcatCols,
  ConcatRows,
  SliceCols,
  SliceRows,
  Tanh,
  Sigmoid,
  Exp,
  Log,
  SoftmaxXent,  // per-row cross-entropy, output (r x 1)
  Sum,
  Mean,
  RowSum,
  Scale,
  AddScalar,
  Gather,       // rows of a table selected by index
};

const char* op_name(Op op);

class Gradients;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = delete;
  Tape& operator=(Tape&&) = delete;

  /// Differentiable input (a parameter or a perturbable input).
  Var leaf(Matrix value);
  /// Non-differentiable input. Receives no gradient.
  Var constant(Matrix value);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var add_row(Var a, Var row);
  Var mul_col(Var a, Var col);
  Var concat_cols(std::span<const Var> parts);
  Var concat_cols(Var a, Var b);
  Var concat_rows(std::span<const Var> parts);
  Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
  Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);
  Var log(Var a);
  /// Stabilised -log softmax(logits)[row, target[row]] for every row.
  Var softmax_xent(Var logits, std::vector<int> targets);
  Var sum(Var a);
  Var mean(Var a);
  Var row_sum(Var a);
  Var scale(Var a, double factor);
  Var add_scalar(Var a, double offset);
  Var gather(Var table, std::vector<int> rows);

  const Matrix& value(Var v) const;
  double scalar(Var v) const;
  Eigen::Index rows(Var v) const { return value(v).rows(); }
  Eigen::Index cols(Var v) const { return value(v).cols(); }
  bool is_leaf(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  std::span<const int> leaves() const { return leaves_; }

  /// Gradients of a scalar loss with respect to every node on the tape.
  Gradients backward(Var loss) const;

 private:
  struct Node {
    Op op = Op::Constant;
    int lhs = -1;
    int rhs = -1;
    std::vector<int> inputs;  // variadic ops only
    std::vector<int> index;   // targets / gathered rows
    double scalar = 0.0;      // scale factor / slice offset
    Matrix value;
  };

  Var push(Node node);
  int check(Var v, const char* what) const;

  std::vector<Node> nodes_;
  std::vector<int> leaves_;
};

class Gradients {
 public:
  /// Gradient of the loss with respect to v. Leaves the loss does not reach
  /// hold explicit zeros of the right shape.
  const Matrix& operator[](Var v) const;

  const Tape& tape() const { return *tape_; }

 private:
  friend class Tape;
  explicit Gradients(const Tape* tape) : tape_(tape) {}

  const Tape* tape_;
  std::vector<Matrix> grads_;
};

/// Scalar objective evaluated on a fresh tape from a set of leaf values.
/// The callback must be deterministic in its inputs.
using TapeObjective =
    std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  Eigen::Index worst_row = 0;
  Eigen::Index worst_col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Compare backward() with central differences on every coordinate of every
/// parameter. The numeric derivative is Ridders' extrapolation of central
/// differences (f(x+h) - f(x-h)) / 2h, run from h = step and h = 2 step;
/// the run with the smaller error estimate is used.
/// Error per coordinate is |a - n| / (|n| + 1e-12).
/// Throws std::runtime_error naming the coordinate if the objective is
/// non-finite at a perturbed point.
GradCheckResult grad_check(const TapeObjective& objective,
                           std::span<const Matrix> params, double step = 0.1);

}  // namespace twr
