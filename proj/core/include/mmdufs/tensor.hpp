#pragma once

// Dense matrices and a reverse-mode differentiation tape over coarse matrix
// primitives. Every loss in the library is a short chain of large dense ops,
// so the tape records whole-matrix operations rather than scalars.

#include <Eigen/Dense>

#include <cstddef>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mmdufs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class OpKind {
  Leaf,
  Matmul,
  Add,
  Sub,
  Scale,
  Hadamard,
  Exp,
  NegSqScaled,
  RowSum,
  DiagRsqrtSandwich,
  Inverse,
  Trace,
  Clamp01Shifted,
  BroadcastColGate,
  PairwiseSqDist,
  // Helpers beyond the core set: the losses need transposes, full sums and
  // the Gaussian CDF of the expected-L0 regularizer.
  Transpose,
  Sum,
  NormalCdf,
};

std::string_view to_string(OpKind kind);

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  [[nodiscard]] std::size_t id() const { return id_; }
  [[nodiscard]] const Matrix& value() const;
  [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
  [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  [[nodiscard]] double scalar() const;
  [[nodiscard]] Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

using Gradients = std::unordered_map<std::size_t, Matrix>;

/// Records matrix primitives in topological order and replays them backwards.
///
/// Single-threaded: one tape per training run. Nodes whose inputs do not
/// depend on a trainable leaf are skipped during the backward sweep.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = delete;
  Tape& operator=(Tape&&) = delete;

  Var leaf(Matrix value, bool trainable = false);
  /// A leaf that never receives a gradient (stop-gradient).
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double factor);
  Var hadamard(Var a, Var b);
  Var exp(Var a);
  /// Elementwise -factor * a^2.
  Var neg_sq_scaled(Var a, double factor);
  /// n x m -> n x 1.
  Var row_sum(Var a);
  /// diag(d)^-1/2 * k * diag(d)^-1/2 for a column vector d of positive entries.
  Var diag_rsqrt_sandwich(Var k, Var d);
  /// LU with partial pivoting; rejects matrices with condition estimate > 1e12.
  Var inverse(Var a);
  /// Square matrix -> 1x1.
  Var trace(Var a);
  /// Hard sigmoid max(0, min(1, 0.5 + a)); subgradient 1 strictly inside.
  Var clamp01_shifted(Var a);
  /// data * diag(z) for an n x p matrix and a p x 1 gate column.
  Var broadcast_col_gate(Var data, Var z);
  /// Squared Euclidean distances between rows; exactly symmetric, zero diagonal.
  Var pairwise_sq_dist(Var a);
  Var transpose(Var a);
  /// Sum of all entries -> 1x1.
  Var sum(Var a);
  /// Elementwise standard normal CDF of (a + shift) / spread.
  Var normal_cdf(Var a, double shift, double spread);

  /// Gradients of a 1x1 node with respect to every trainable leaf.
  /// Trainable leaves the loss does not reach get a zero matrix.
  Gradients backward(Var loss) const;

  [[nodiscard]] const Matrix& value(Var v) const;
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] OpKind kind(Var v) const;

 private:
  struct Node {
    OpKind kind = OpKind::Leaf;
    std::size_t lhs = 0;
    std::size_t rhs = 0;
    int arity = 0;
    double param = 0.0;
    double param2 = 0.0;
    bool trainable = false;
    bool needs_grad = false;
    Matrix value;
    Matrix cache;
  };

  Var push(Node node);
  void check_owned(Var v) const;
  [[nodiscard]] bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  std::vector<Node> nodes_;
};

/// Eigendecomposition of a symmetric matrix (symmetrized as (A + A^T)/2).
/// Analysis only: never recorded on a tape.
struct SymmetricEigen {
  Vector values;   ///< descending
  Matrix vectors;  ///< column i pairs with values(i)
};

SymmetricEigen eigendecompose_symmetric(const Matrix& a);

/// Standard normal CDF and density.
double normal_cdf(double x);
double normal_pdf(double x);

}  // namespace mmdufs
