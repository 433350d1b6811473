#include "hnko/autodiff.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "hnko/error.hpp"
#include "hnko/orthogonal.hpp"

namespace hnko::ad {

namespace {

std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

Tape& same_tape(Var a, Var b, const char* op) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw DimensionError(std::string(op) + ": operands live on different tapes");
  }
  return *a.tape();
}

Tape& tape_of(Var a, const char* op) {
  if (a.tape() == nullptr) throw DimensionError(std::string(op) + ": detached variable");
  return *a.tape();
}

Tape::Node make(Op op, Matrix value, std::size_t a = 0, std::size_t b = 0) {
  Tape::Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.value = std::move(value);
  return n;
}

void require_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape(a.value()) + " vs " +
                         shape(b.value()));
  }
}

}  // namespace

const Matrix& Var::value() const { return tape_->node(id_).value; }
const Matrix& Var::grad() const { return tape_->node(id_).adjoint; }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw DimensionError("Var::scalar on " + shape(v) + " value");
  return v(0, 0);
}

Var Tape::leaf(Matrix value) { return record(make(Op::Leaf, std::move(value))); }
Var Tape::constant(Matrix value) { return record(make(Op::Constant, std::move(value))); }

Var Tape::record(Node node) {
  node.adjoint = Matrix::Zero(node.value.rows(), node.value.cols());
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw DimensionError("backward: loss belongs to another tape");
  if (loss.value().size() != 1) {
    throw DimensionError("backward: loss must be scalar, got " + shape(loss.value()));
  }
  for (Node& n : nodes_) n.adjoint.setZero();
  nodes_[loss.id()].adjoint(0, 0) = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) propagate(id);
}

void Tape::propagate(std::size_t id) {
  Node& n = nodes_[id];
  const Matrix& g = n.adjoint;
  switch (n.op) {
    case Op::Leaf:
    case Op::Constant:
      return;
    case Op::MatMul: {
      const Matrix& av = nodes_[n.a].value;
      const Matrix& bv = nodes_[n.b].value;
      nodes_[n.a].adjoint.noalias() += g * bv.transpose();
      nodes_[n.b].adjoint.noalias() += av.transpose() * g;
      return;
    }
    case Op::Add:
      nodes_[n.a].adjoint += g;
      nodes_[n.b].adjoint += g;
      return;
    case Op::Sub:
      nodes_[n.a].adjoint += g;
      nodes_[n.b].adjoint -= g;
      return;
    case Op::Scale:
      nodes_[n.a].adjoint += n.scalar * g;
      return;
    case Op::AddColumn:
      nodes_[n.a].adjoint += g;
      nodes_[n.b].adjoint += g.rowwise().sum();
      return;
    case Op::SubScalar:
      nodes_[n.a].adjoint += g;
      nodes_[n.b].adjoint(0, 0) -= g.sum();
      return;
    case Op::Tanh:
      nodes_[n.a].adjoint.array() += g.array() * (1.0 - n.value.array().square());
      return;
    case Op::Exp:
      nodes_[n.a].adjoint.array() += g.array() * n.value.array();
      return;
    case Op::Pow: {
      const Matrix& av = nodes_[n.a].value;
      nodes_[n.a].adjoint.array() += g.array() * n.scalar * av.array().pow(n.scalar - 1.0);
      return;
    }
    case Op::SumSquares:
      nodes_[n.a].adjoint += (2.0 * g(0, 0)) * nodes_[n.a].value;
      return;
    case Op::ColSumSquares: {
      const Matrix& av = nodes_[n.a].value;
      Matrix& ag = nodes_[n.a].adjoint;
      for (Index j = 0; j < av.cols(); ++j) ag.col(j) += (2.0 * g(0, j)) * av.col(j);
      return;
    }
    case Op::Inner:
      nodes_[n.a].adjoint += g(0, 0) * nodes_[n.b].value;
      nodes_[n.b].adjoint += g(0, 0) * nodes_[n.a].value;
      return;
    case Op::ExpmSkew: {
      // Reverse through squaring, then through the Horner recursion
      // Q_j = I + (1/j) B Q_{j+1}, Q_N = I + B/N.
      const numerics::ExpmTrace& tr = *n.trace;
      Matrix bar = g;
      for (int i = tr.squarings - 1; i >= 0; --i) {
        const Matrix& e = tr.powers[static_cast<std::size_t>(i)];
        Matrix prev = bar * e.transpose();
        prev.noalias() += e.transpose() * bar;
        bar = std::move(prev);
      }
      const Matrix& b = tr.scaled;
      Matrix b_bar = Matrix::Zero(b.rows(), b.cols());
      constexpr int N = numerics::kExpmTaylorDegree;
      for (int j = 1; j < N; ++j) {
        const Matrix& q_next = tr.horner[static_cast<std::size_t>(j)];
        const double inv = 1.0 / static_cast<double>(j);
        b_bar.noalias() += inv * (bar * q_next.transpose());
        Matrix next_bar = inv * (b.transpose() * bar);
        bar = std::move(next_bar);
      }
      b_bar += bar / static_cast<double>(N);
      const Matrix a_bar = std::ldexp(1.0, -tr.squarings) * b_bar;
      Matrix& pg = nodes_[n.a].adjoint;
      const Index dim = n.i0;
      Index k = 0;
      for (Index i = 0; i < dim; ++i) {
        for (Index j = i + 1; j < dim; ++j, ++k) pg(k) += a_bar(i, j) - a_bar(j, i);
      }
      return;
    }
    case Op::Kron: {
      const Matrix& av = nodes_[n.a].value;
      const Matrix& bv = nodes_[n.b].value;
      Matrix& ag = nodes_[n.a].adjoint;
      Matrix& bg = nodes_[n.b].adjoint;
      const Index p2 = bv.rows(), q2 = bv.cols();
      for (Index i = 0; i < av.rows(); ++i) {
        for (Index j = 0; j < av.cols(); ++j) {
          const auto blk = g.block(i * p2, j * q2, p2, q2);
          ag(i, j) += blk.cwiseProduct(bv).sum();
          bg += av(i, j) * blk;
        }
      }
      return;
    }
    case Op::SliceCols:
      nodes_[n.a].adjoint.middleCols(n.i0, n.i1) += g;
      return;
    case Op::ScaleCols: {
      const Matrix& av = nodes_[n.a].value;
      const Matrix& wv = nodes_[n.b].value;
      Matrix& ag = nodes_[n.a].adjoint;
      Matrix& wg = nodes_[n.b].adjoint;
      for (Index j = 0; j < av.cols(); ++j) {
        ag.col(j) += wv(0, j) * g.col(j);
        wg(0, j) += g.col(j).dot(av.col(j));
      }
      return;
    }
    case Op::Transpose:
      nodes_[n.a].adjoint += g.transpose();
      return;
    case Op::OffDiagonal: {
      Matrix masked = g;
      masked.diagonal().setZero();
      nodes_[n.a].adjoint += masked;
      return;
    }
  }
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: cannot multiply " + shape(a.value()) + " by " + shape(b.value()));
  }
  return t.record(make(Op::MatMul, a.value() * b.value(), a.id(), b.id()));
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  require_same_shape(a, b, "add");
  return t.record(make(Op::Add, a.value() + b.value(), a.id(), b.id()));
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  require_same_shape(a, b, "sub");
  return t.record(make(Op::Sub, a.value() - b.value(), a.id(), b.id()));
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a, "scale");
  Tape::Node n = make(Op::Scale, s * a.value(), a.id());
  n.scalar = s;
  return t.record(std::move(n));
}

Var add_column(Var a, Var b) {
  Tape& t = same_tape(a, b, "add_column");
  if (b.cols() != 1 || b.rows() != a.rows()) {
    throw DimensionError("add_column: expected " + std::to_string(a.rows()) + "x1 column, got " +
                         shape(b.value()));
  }
  Matrix v = a.value();
  v.colwise() += b.value().col(0);
  return t.record(make(Op::AddColumn, std::move(v), a.id(), b.id()));
}

Var sub_scalar(Var a, Var s) {
  Tape& t = same_tape(a, s, "sub_scalar");
  if (s.value().size() != 1) throw DimensionError("sub_scalar: subtrahend must be 1x1");
  Matrix v = a.value().array() - s.value()(0, 0);
  return t.record(make(Op::SubScalar, std::move(v), a.id(), s.id()));
}

Var tanh(Var a) {
  Tape& t = tape_of(a, "tanh");
  return t.record(make(Op::Tanh, a.value().array().tanh().matrix(), a.id()));
}

Var exp(Var a) {
  Tape& t = tape_of(a, "exp");
  return t.record(make(Op::Exp, a.value().array().exp().matrix(), a.id()));
}

Var pow(Var a, double exponent) {
  Tape& t = tape_of(a, "pow");
  Tape::Node n = make(Op::Pow, a.value().array().pow(exponent).matrix(), a.id());
  n.scalar = exponent;
  return t.record(std::move(n));
}

Var sum_squares(Var a) {
  Tape& t = tape_of(a, "sum_squares");
  return t.record(make(Op::SumSquares, Matrix::Constant(1, 1, a.value().squaredNorm()), a.id()));
}

Var col_sum_squares(Var a) {
  Tape& t = tape_of(a, "col_sum_squares");
  return t.record(make(Op::ColSumSquares, a.value().colwise().squaredNorm(), a.id()));
}

Var inner(Var a, Var b) {
  Tape& t = same_tape(a, b, "inner");
  require_same_shape(a, b, "inner");
  const double v = a.value().cwiseProduct(b.value()).sum();
  return t.record(make(Op::Inner, Matrix::Constant(1, 1, v), a.id(), b.id()));
}

Var expm_skew(Var params, Index dim) {
  Tape& t = tape_of(params, "expm_skew");
  const Index expected = orthogonal::SkewParams::count_for(dim);
  if (params.value().size() != expected) {
    throw DimensionError("expm_skew: dimension " + std::to_string(dim) + " needs " +
                         std::to_string(expected) + " parameters, got " +
                         std::to_string(params.value().size()));
  }
  const Matrix skew = orthogonal::alpha(dim, params.value().reshaped());
  auto trace = std::make_unique<numerics::ExpmTrace>();
  Matrix k = numerics::expm(skew, trace.get());
  Tape::Node n = make(Op::ExpmSkew, std::move(k), params.id());
  n.i0 = dim;
  n.trace = std::move(trace);
  return t.record(std::move(n));
}

Var kron(Var a, Var b) {
  Tape& t = same_tape(a, b, "kron");
  return t.record(make(Op::Kron, numerics::kron(a.value(), b.value()), a.id(), b.id()));
}

Var slice_cols(Var a, Index start, Index count) {
  Tape& t = tape_of(a, "slice_cols");
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw DimensionError("slice_cols: range [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") outside " + shape(a.value()));
  }
  Tape::Node n = make(Op::SliceCols, a.value().middleCols(start, count), a.id());
  n.i0 = start;
  n.i1 = count;
  return t.record(std::move(n));
}

Var scale_cols(Var a, Var w) {
  Tape& t = same_tape(a, w, "scale_cols");
  if (w.rows() != 1 || w.cols() != a.cols()) {
    throw DimensionError("scale_cols: weights " + shape(w.value()) + " do not match " +
                         shape(a.value()));
  }
  Matrix v = a.value() * w.value().row(0).asDiagonal();
  return t.record(make(Op::ScaleCols, std::move(v), a.id(), w.id()));
}

Var transpose(Var a) {
  Tape& t = tape_of(a, "transpose");
  return t.record(make(Op::Transpose, a.value().transpose(), a.id()));
}

Var off_diagonal(Var a) {
  Tape& t = tape_of(a, "off_diagonal");
  Matrix v = a.value();
  v.diagonal().setZero();
  return t.record(make(Op::OffDiagonal, std::move(v), a.id()));
}

}  // namespace hnko::ad
