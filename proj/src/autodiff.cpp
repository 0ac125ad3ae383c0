#include "twr/autodiff.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace twr {

namespace {

std::string shape_of(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                              shape_of(a) + " vs " + shape_of(b));
}

void require_finite(const Matrix& m, const char* what) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      if (!std::isfinite(m(r, c))) {
        std::ostringstream os;
        os << what << ": non-finite value at (" << r << ", " << c << ")";
        throw std::domain_error(os.str());
      }
    }
  }
}

void accumulate(Matrix& slot, const Matrix& delta) {
  if (slot.size() == 0) {
    slot = delta;
  } else {
    slot += delta;
  }
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Constant: return "constant";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::AddRow: return "add_row";
    case Op::MulCol: return "mul_col";
    case Op::ConcatCols: return "concat_cols";
    case Op::ConcatRows: return "concat_rows";
    case Op::SliceCols: return "slice_cols";
    case Op::SliceRows: return "slice_rows";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::SoftmaxXent: return "softmax_xent";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::RowSum: return "row_sum";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::Gather: return "gather";
  }
  return "?";
}

int Tape::check(Var v, const char* what) const {
  if (v.tape != this || v.id < 0 ||
      static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::invalid_argument(std::string(what) +
                                ": node does not belong to this tape");
  }
  return v.id;
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::leaf(Matrix value) {
  require_finite(value, "leaf");
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  Var v = push(std::move(n));
  leaves_.push_back(v.id);
  return v;
}

Var Tape::constant(Matrix value) {
  require_finite(value, "constant");
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

const Matrix& Tape::value(Var v) const { return nodes_[check(v, "value")].value; }

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.size() != 1) {
    throw std::invalid_argument("scalar: node has shape " + shape_of(m));
  }
  return m(0, 0);
}

bool Tape::is_leaf(Var v) const { return nodes_[check(v, "is_leaf")].op == Op::Leaf; }

Var Tape::matmul(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  if (x.cols() != y.rows()) shape_error("matmul", x, y);
  Node n;
  n.op = Op::MatMul;
  n.lhs = a.id;
  n.rhs = b.id;
  n.value.noalias() = x * y;
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  if (x.rows() != y.rows() || x.cols() != y.cols()) shape_error("add", x, y);
  Node n;
  n.op = Op::Add;
  n.lhs = a.id;
  n.rhs = b.id;
  n.value = x + y;
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  if (x.rows() != y.rows() || x.cols() != y.cols()) shape_error("sub", x, y);
  Node n;
  n.op = Op::Sub;
  n.lhs = a.id;
  n.rhs = b.id;
  n.value = x - y;
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  if (x.rows() != y.rows() || x.cols() != y.cols()) shape_error("mul", x, y);
  Node n;
  n.op = Op::Mul;
  n.lhs = a.id;
  n.rhs = b.id;
  n.value = x.cwiseProduct(y);
  return push(std::move(n));
}

Var Tape::add_row(Var a, Var row) {
  const Matrix& x = value(a);
  const Matrix& r = value(row);
  if (r.rows() != 1 || r.cols() != x.cols()) shape_error("add_row", x, r);
  Node n;
  n.op = Op::AddRow;
  n.lhs = a.id;
  n.rhs = row.id;
  n.value = x.rowwise() + r.row(0);
  return push(std::move(n));
}

Var Tape::mul_col(Var a, Var col) {
  const Matrix& x = value(a);
  const Matrix& c = value(col);
  if (c.cols() != 1 || c.rows() != x.rows()) shape_error("mul_col", x, c);
  Node n;
  n.op = Op::MulCol;
  n.lhs = a.id;
  n.rhs = col.id;
  n.value = x.array().colwise() * c.col(0).array();
  return push(std::move(n));
}

Var Tape::concat_cols(Var a, Var b) {
  const Var parts[2] = {a, b};
  return concat_cols(std::span<const Var>(parts, 2));
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  Node n;
  n.op = Op::ConcatCols;
  for (Var p : parts) {
    const Matrix& m = value(p);
    if (m.rows() != rows) shape_error("concat_cols", value(parts[0]), m);
    cols += m.cols();
    n.inputs.push_back(p.id);
  }
  n.value.resize(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    const Matrix& m = value(p);
    n.value.middleCols(at, m.cols()) = m;
    at += m.cols();
  }
  return push(std::move(n));
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const Eigen::Index cols = value(parts[0]).cols();
  Eigen::Index rows = 0;
  Node n;
  n.op = Op::ConcatRows;
  for (Var p : parts) {
    const Matrix& m = value(p);
    if (m.cols() != cols) shape_error("concat_rows", value(parts[0]), m);
    rows += m.rows();
    n.inputs.push_back(p.id);
  }
  n.value.resize(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    const Matrix& m = value(p);
    n.value.middleRows(at, m.rows()) = m;
    at += m.rows();
  }
  return push(std::move(n));
}

Var Tape::slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& x = value(a);
  if (start < 0 || count < 0 || start + count > x.cols()) {
    throw std::invalid_argument("slice_cols: columns [" + std::to_string(start) +
                                ", " + std::to_string(start + count) +
                                ") out of range for " + shape_of(x));
  }
  Node n;
  n.op = Op::SliceCols;
  n.lhs = a.id;
  n.scalar = static_cast<double>(start);
  n.value = x.middleCols(start, count);
  return push(std::move(n));
}

Var Tape::slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& x = value(a);
  if (start < 0 || count < 0 || start + count > x.rows()) {
    throw std::invalid_argument("slice_rows: rows [" + std::to_string(start) +
                                ", " + std::to_string(start + count) +
                                ") out of range for " + shape_of(x));
  }
  Node n;
  n.op = Op::SliceRows;
  n.lhs = a.id;
  n.scalar = static_cast<double>(start);
  n.value = x.middleRows(start, count);
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::Tanh;
  n.lhs = a.id;
  n.value = value(a).array().tanh();
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::Sigmoid;
  n.lhs = a.id;
  // Split by sign so exp() never overflows.
  const Matrix& x = value(a);
  n.value.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    if (v >= 0) {
      n.value.data()[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      n.value.data()[i] = e / (1.0 + e);
    }
  }
  return push(std::move(n));
}

Var Tape::exp(Var a) {
  Node n;
  n.op = Op::Exp;
  n.lhs = a.id;
  n.value = value(a).array().exp();
  require_finite(n.value, "exp");
  return push(std::move(n));
}

Var Tape::log(Var a) {
  const Matrix& x = value(a);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if (!(x(r, c) > 0.0)) {
        std::ostringstream os;
        os << "log: non-positive input " << x(r, c) << " at (" << r << ", " << c
           << ")";
        throw std::domain_error(os.str());
      }
    }
  }
  Node n;
  n.op = Op::Log;
  n.lhs = a.id;
  n.value = x.array().log();
  return push(std::move(n));
}

Var Tape::softmax_xent(Var logits, std::vector<int> targets) {
  const Matrix& x = value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != x.rows()) {
    throw std::invalid_argument("softmax_xent: " + std::to_string(targets.size()) +
                                " targets for logits " + shape_of(x));
  }
  Node n;
  n.op = Op::SoftmaxXent;
  n.lhs = logits.id;
  n.value.resize(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= x.cols()) {
      throw std::invalid_argument("softmax_xent: target " + std::to_string(t) +
                                  " out of range for " + shape_of(x));
    }
    const double top = x.row(r).maxCoeff();
    const double lse = top + std::log((x.row(r).array() - top).exp().sum());
    n.value(r, 0) = lse - x(r, t);
  }
  n.index = std::move(targets);
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::Sum;
  n.lhs = a.id;
  n.value = Matrix::Constant(1, 1, value(a).sum());
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  const Matrix& x = value(a);
  if (x.size() == 0) throw std::invalid_argument("mean: empty input");
  Node n;
  n.op = Op::Mean;
  n.lhs = a.id;
  n.value = Matrix::Constant(1, 1, x.mean());
  return push(std::move(n));
}

Var Tape::row_sum(Var a) {
  Node n;
  n.op = Op::RowSum;
  n.lhs = a.id;
  n.value = value(a).rowwise().sum();
  return push(std::move(n));
}

Var Tape::scale(Var a, double factor) {
  Node n;
  n.op = Op::Scale;
  n.lhs = a.id;
  n.scalar = factor;
  n.value = value(a) * factor;
  return push(std::move(n));
}

Var Tape::add_scalar(Var a, double offset) {
  Node n;
  n.op = Op::AddScalar;
  n.lhs = a.id;
  n.scalar = offset;
  n.value = value(a).array() + offset;
  return push(std::move(n));
}

Var Tape::gather(Var table, std::vector<int> rows) {
  const Matrix& t = value(table);
  Node n;
  n.op = Op::Gather;
  n.lhs = table.id;
  n.value.resize(static_cast<Eigen::Index>(rows.size()), t.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= t.rows()) {
      throw std::invalid_argument("gather: row " + std::to_string(rows[i]) +
                                  " out of range for " + shape_of(t));
    }
    n.value.row(static_cast<Eigen::Index>(i)) = t.row(rows[i]);
  }
  n.index = std::move(rows);
  return push(std::move(n));
}

Gradients Tape::backward(Var loss) const {
  const int root = check(loss, "backward");
  if (nodes_[root].value.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                shape_of(nodes_[root].value));
  }

  // A node needs a gradient only if some leaf lies beneath it.
  std::vector<char> live(nodes_.size(), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.op == Op::Leaf) {
      live[i] = 1;
    } else if (n.op != Op::Constant) {
      bool any = (n.lhs >= 0 && live[n.lhs]) || (n.rhs >= 0 && live[n.rhs]);
      for (int in : n.inputs) any = any || live[in];
      live[i] = any;
    }
  }

  Gradients out(this);
  std::vector<Matrix>& g = out.grads_;
  g.resize(nodes_.size());
  g[root] = Matrix::Ones(1, 1);

  for (int i = root; i >= 0; --i) {
    const Node& n = nodes_[i];
    if (g[i].size() == 0 || !live[i]) continue;
    const Matrix& dy = g[i];
    const int a = n.lhs;
    const int b = n.rhs;
    auto want = [&](int id) { return id >= 0 && live[id]; };

    switch (n.op) {
      case Op::Leaf:
      case Op::Constant:
        break;
      case Op::MatMul:
        if (want(a)) accumulate(g[a], dy * nodes_[b].value.transpose());
        if (want(b)) accumulate(g[b], nodes_[a].value.transpose() * dy);
        break;
      case Op::Add:
        if (want(a)) accumulate(g[a], dy);
        if (want(b)) accumulate(g[b], dy);
        break;
      case Op::Sub:
        if (want(a)) accumulate(g[a], dy);
        if (want(b)) accumulate(g[b], -dy);
        break;
      case Op::Mul:
        if (want(a)) accumulate(g[a], dy.cwiseProduct(nodes_[b].value));
        if (want(b)) accumulate(g[b], dy.cwiseProduct(nodes_[a].value));
        break;
      case Op::AddRow:
        if (want(a)) accumulate(g[a], dy);
        if (want(b)) accumulate(g[b], dy.colwise().sum());
        break;
      case Op::MulCol: {
        const Matrix& x = nodes_[a].value;
        const Matrix& c = nodes_[b].value;
        if (want(a)) {
          accumulate(g[a], (dy.array().colwise() * c.col(0).array()).matrix());
        }
        if (want(b)) accumulate(g[b], dy.cwiseProduct(x).rowwise().sum());
        break;
      }
      case Op::ConcatCols: {
        Eigen::Index at = 0;
        for (int in : n.inputs) {
          const Eigen::Index w = nodes_[in].value.cols();
          if (live[in]) accumulate(g[in], dy.middleCols(at, w));
          at += w;
        }
        break;
      }
      case Op::ConcatRows: {
        Eigen::Index at = 0;
        for (int in : n.inputs) {
          const Eigen::Index h = nodes_[in].value.rows();
          if (live[in]) accumulate(g[in], dy.middleRows(at, h));
          at += h;
        }
        break;
      }
      case Op::SliceCols:
        if (want(a)) {
          const Matrix& x = nodes_[a].value;
          if (g[a].size() == 0) g[a] = Matrix::Zero(x.rows(), x.cols());
          g[a].middleCols(static_cast<Eigen::Index>(n.scalar), dy.cols()) += dy;
        }
        break;
      case Op::SliceRows:
        if (want(a)) {
          const Matrix& x = nodes_[a].value;
          if (g[a].size() == 0) g[a] = Matrix::Zero(x.rows(), x.cols());
          g[a].middleRows(static_cast<Eigen::Index>(n.scalar), dy.rows()) += dy;
        }
        break;
      case Op::Tanh:
        if (want(a)) {
          accumulate(g[a],
                     (dy.array() * (1.0 - n.value.array().square())).matrix());
        }
        break;
      case Op::Sigmoid:
        if (want(a)) {
          accumulate(g[a], (dy.array() * n.value.array() *
                            (1.0 - n.value.array()))
                               .matrix());
        }
        break;
      case Op::Exp:
        if (want(a)) accumulate(g[a], dy.cwiseProduct(n.value));
        break;
      case Op::Log:
        if (want(a)) accumulate(g[a], dy.cwiseQuotient(nodes_[a].value));
        break;
      case Op::SoftmaxXent:
        if (want(a)) {
          const Matrix& x = nodes_[a].value;
          Matrix d(x.rows(), x.cols());
          for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const double top = x.row(r).maxCoeff();
            RowVector p = (x.row(r).array() - top).exp();
            p /= p.sum();
            p(n.index[static_cast<std::size_t>(r)]) -= 1.0;
            d.row(r) = dy(r, 0) * p;
          }
          accumulate(g[a], d);
        }
        break;
      case Op::Sum:
        if (want(a)) {
          const Matrix& x = nodes_[a].value;
          accumulate(g[a], Matrix::Constant(x.rows(), x.cols(), dy(0, 0)));
        }
        break;
      case Op::Mean:
        if (want(a)) {
          const Matrix& x = nodes_[a].value;
          accumulate(g[a], Matrix::Constant(x.rows(), x.cols(),
                                            dy(0, 0) / static_cast<double>(x.size())));
        }
        break;
      case Op::RowSum:
        if (want(a)) accumulate(g[a], dy.replicate(1, nodes_[a].value.cols()));
        break;
      case Op::Scale:
        if (want(a)) accumulate(g[a], dy * n.scalar);
        break;
      case Op::AddScalar:
        if (want(a)) accumulate(g[a], dy);
        break;
      case Op::Gather:
        if (want(a)) {
          const Matrix& t = nodes_[a].value;
          if (g[a].size() == 0) g[a] = Matrix::Zero(t.rows(), t.cols());
          for (std::size_t r = 0; r < n.index.size(); ++r) {
            g[a].row(n.index[r]) += dy.row(static_cast<Eigen::Index>(r));
          }
        }
        break;
    }
  }

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (g[i].size() == 0 && nodes_[i].value.size() != 0) {
      g[i] = Matrix::Zero(nodes_[i].value.rows(), nodes_[i].value.cols());
    }
  }
  return out;
}

const Matrix& Gradients::operator[](Var v) const {
  if (v.tape != tape_ || v.id < 0 ||
      static_cast<std::size_t>(v.id) >= grads_.size()) {
    throw std::invalid_argument("gradient: node does not belong to this tape");
  }
  return grads_[static_cast<std::size_t>(v.id)];
}

GradCheckResult grad_check(const TapeObjective& objective,
                           std::span<const Matrix> params, double step) {
  if (!(step > 0)) throw std::invalid_argument("grad_check: step must be > 0");

  auto evaluate = [&](std::span<const Matrix> values) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(values.size());
    for (const Matrix& m : values) leaves.push_back(tape.leaf(m));
    try {
      return tape.scalar(objective(tape, leaves));
    } catch (const std::domain_error&) {
      // A primitive refused its input (log of a non-positive value, overflow).
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  std::vector<Matrix> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const Matrix& m : params) leaves.push_back(tape.leaf(m));
    const Var loss = objective(tape, leaves);
    const Gradients grads = tape.backward(loss);
    for (Var v : leaves) analytic.push_back(grads[v]);
  }

  GradCheckResult result;
  std::vector<Matrix> work(params.begin(), params.end());
  for (std::size_t p = 0; p < work.size(); ++p) {
    for (Eigen::Index c = 0; c < work[p].cols(); ++c) {
      for (Eigen::Index r = 0; r < work[p].rows(); ++r) {
        const double saved = work[p](r, c);
        bool finite = true;
        auto central = [&](double h) {
          work[p](r, c) = saved + h;
          const double up = evaluate(work);
          work[p](r, c) = saved - h;
          const double down = evaluate(work);
          finite = finite && std::isfinite(up) && std::isfinite(down);
          return (up - down) / (2.0 * h);
        };
        // Ridders: shrink h by kShrink per row, extrapolate the tableau, keep
        // the entry with the smallest error estimate.
        auto ridders = [&](double h, double& estimate) {
          constexpr int kRows = 10;
          constexpr double kShrink = 1.4, kShrink2 = kShrink * kShrink;
          double table[kRows][kRows];
          table[0][0] = central(h);
          estimate = table[0][0];
          double best = std::numeric_limits<double>::infinity();
          for (int i = 1; i < kRows && finite; ++i) {
            h /= kShrink;
            table[0][i] = central(h);
            double fac = kShrink2;
            for (int j = 1; j <= i; ++j) {
              table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
              fac *= kShrink2;
              const double e = std::max(std::abs(table[j][i] - table[j - 1][i]),
                                        std::abs(table[j][i] - table[j - 1][i - 1]));
              if (e <= best) {
                best = e;
                estimate = table[j][i];
              }
            }
            if (std::abs(table[i][i] - table[i - 1][i - 1]) >= 2.0 * best) break;
          }
          return best;
        };
        // Two starting steps; the smaller error estimate wins.
        double numeric = 0.0, wide = 0.0;
        const double err_narrow = ridders(step, numeric);
        if (ridders(2.0 * step, wide) < err_narrow) numeric = wide;
        work[p](r, c) = saved;
        if (!finite) {
          std::ostringstream os;
          os << "grad_check: objective non-finite when perturbing parameter "
             << p << " at (" << r << ", " << c << ")";
          throw std::runtime_error(os.str());
        }
        const double a = analytic[p](r, c);
        const double err = std::abs(a - numeric) / (std::abs(numeric) + 1e-12);
        ++result.coordinates;
        if (err > result.max_relative_error || result.coordinates == 1) {
          result.max_relative_error = err;
          result.worst_param = p;
          result.worst_row = r;
          result.worst_col = c;
          result.analytic = a;
          result.numeric = numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace twr
