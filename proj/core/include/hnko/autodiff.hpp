#pragma once

// Reverse-mode differentiation over the small fixed set of matrix primitives
// the HNKO losses are built from. Every value is a dense matrix; scalars are
// 1x1. Nodes are appended in evaluation order, so reverse index order is a
// reverse topological order and backward() visits each node once.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "hnko/numerics.hpp"

namespace hnko::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  /// Adjoint after Tape::backward(); zero-shaped like value() before.
  const Matrix& grad() const;
  /// Convenience for 1x1 values.
  double scalar() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

enum class Op : std::uint8_t {
  Leaf,
  Constant,
  MatMul,
  Add,
  Sub,
  Scale,
  AddColumn,
  SubScalar,
  Tanh,
  Exp,
  Pow,
  SumSquares,
  ColSumSquares,
  Inner,
  ExpmSkew,
  Kron,
  SliceCols,
  ScaleCols,
  Transpose,
  OffDiagonal,
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input.
  Var leaf(Matrix value);
  /// Input that receives no gradient bookkeeping beyond a zero adjoint.
  Var constant(Matrix value);

  /// Zeroes all adjoints, seeds d(loss)/d(loss) = 1 and propagates.
  /// Throws DimensionError when loss is not 1x1.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  struct Node {
    Op op = Op::Constant;
    std::size_t a = 0;
    std::size_t b = 0;
    Matrix value;
    Matrix adjoint;
    double scalar = 0.0;
    Index i0 = 0;
    Index i1 = 0;
    std::unique_ptr<numerics::ExpmTrace> trace;
  };

  /// Low-level: append a node whose value the caller already computed.
  Var record(Node node);
  const Node& node(std::size_t id) const { return nodes_[id]; }

 private:
  void propagate(std::size_t id);
  std::vector<Node> nodes_;
};

// Primitives. All operands must live on the same tape.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
/// a (r x c) plus column b (r x 1) broadcast over columns.
Var add_column(Var a, Var b);
/// a minus the 1x1 value s in every entry.
Var sub_scalar(Var a, Var s);
Var tanh(Var a);
Var exp(Var a);
Var pow(Var a, double exponent);
/// Sum of squared entries (squared 2-norm / Frobenius norm), 1x1.
Var sum_squares(Var a);
/// Row vector of squared column norms, 1 x cols.
Var col_sum_squares(Var a);
/// Frobenius inner product, 1x1.
Var inner(Var a, Var b);
/// exp(A - Aᵀ) where A is the strictly upper triangle of a dim x dim matrix
/// filled row-major from the dim(dim-1)/2 entries of params.
Var expm_skew(Var params, Index dim);
Var kron(Var a, Var b);
Var slice_cols(Var a, Index start, Index count);
/// a (r x c) with column j multiplied by w(0, j); w is 1 x c.
Var scale_cols(Var a, Var w);
Var transpose(Var a);
/// a with its diagonal set to zero.
Var off_diagonal(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

}  // namespace hnko::ad
