#include "mmdufs/tensor.hpp"

#include "mmdufs/errors.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

namespace mmdufs {

namespace {

constexpr double kMaxCondition = 1e12;

std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

[[noreturn]] void shape_error(std::string_view op, const Matrix& a, const Matrix& b) {
  std::ostringstream os;
  os << op << ": shape mismatch " << shape(a) << " vs " << shape(b);
  throw DimensionError(os.str());
}

void require_same_shape(std::string_view op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a, b);
}

void require_square(std::string_view op, const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw DimensionError(std::string(op) + ": expected a square matrix, got " + shape(a));
  }
}

void require_nonempty(const Matrix& a) {
  if (a.rows() < 1 || a.cols() < 1) {
    throw DimensionError("matrix must have at least one row and one column, got " + shape(a));
  }
}

void accumulate(Matrix& slot, const Matrix& g) {
  if (slot.size() == 0) {
    slot = g;
  } else {
    slot += g;
  }
}

}  // namespace

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Matmul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Scale: return "scale";
    case OpKind::Hadamard: return "hadamard";
    case OpKind::Exp: return "elementwise-exp";
    case OpKind::NegSqScaled: return "elementwise-neg-sq-scaled";
    case OpKind::RowSum: return "row-sum";
    case OpKind::DiagRsqrtSandwich: return "diag-rsqrt-sandwich";
    case OpKind::Inverse: return "matrix-inverse";
    case OpKind::Trace: return "trace";
    case OpKind::Clamp01Shifted: return "clamp01-shifted";
    case OpKind::BroadcastColGate: return "broadcast-col-gate";
    case OpKind::PairwiseSqDist: return "pairwise-sq-dist";
    case OpKind::Transpose: return "transpose";
    case OpKind::Sum: return "sum";
    case OpKind::NormalCdf: return "normal-cdf";
  }
  return "unknown";
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

const Matrix& Var::value() const { return tape_->value(*this); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw ContractError("scalar(): node is " + shape(v) + ", not 1x1");
  }
  return v(0, 0);
}

const Matrix& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id_].value;
}

OpKind Tape::kind(Var v) const {
  check_owned(v);
  return nodes_[v.id_].kind;
}

void Tape::check_owned(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) {
    throw ContractError("variable does not belong to this tape");
  }
}

Var Tape::push(Node node) {
  require_nonempty(node.value);
  if (!node.value.allFinite()) {
    if (node.kind == OpKind::Leaf) throw InputError("leaf: input contains non-finite values");
    throw NumericalError(std::string(to_string(node.kind)) + ": produced non-finite values");
  }
  if (node.kind != OpKind::Leaf) {
    node.needs_grad = nodes_[node.lhs].needs_grad || (node.arity == 2 && nodes_[node.rhs].needs_grad);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Matrix value, bool trainable) {
  Node n;
  n.kind = OpKind::Leaf;
  n.trainable = trainable;
  n.needs_grad = trainable;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  check_owned(a);
  check_owned(b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  Node n{.kind = OpKind::Matmul, .lhs = a.id_, .rhs = b.id_, .arity = 2};
  n.value.noalias() = av * bv;
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  check_owned(a);
  check_owned(b);
  require_same_shape("add", a.value(), b.value());
  Node n{.kind = OpKind::Add, .lhs = a.id_, .rhs = b.id_, .arity = 2};
  n.value = a.value() + b.value();
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  check_owned(a);
  check_owned(b);
  require_same_shape("sub", a.value(), b.value());
  Node n{.kind = OpKind::Sub, .lhs = a.id_, .rhs = b.id_, .arity = 2};
  n.value = a.value() - b.value();
  return push(std::move(n));
}

Var Tape::scale(Var a, double factor) {
  check_owned(a);
  Node n{.kind = OpKind::Scale, .lhs = a.id_, .arity = 1, .param = factor};
  n.value = factor * a.value();
  return push(std::move(n));
}

Var Tape::hadamard(Var a, Var b) {
  check_owned(a);
  check_owned(b);
  require_same_shape("hadamard", a.value(), b.value());
  Node n{.kind = OpKind::Hadamard, .lhs = a.id_, .rhs = b.id_, .arity = 2};
  n.value = a.value().cwiseProduct(b.value());
  return push(std::move(n));
}

Var Tape::exp(Var a) {
  check_owned(a);
  Node n{.kind = OpKind::Exp, .lhs = a.id_, .arity = 1};
  n.value = a.value().array().exp().matrix();
  return push(std::move(n));
}

Var Tape::neg_sq_scaled(Var a, double factor) {
  check_owned(a);
  Node n{.kind = OpKind::NegSqScaled, .lhs = a.id_, .arity = 1, .param = factor};
  n.value = (-factor) * a.value().array().square().matrix();
  return push(std::move(n));
}

Var Tape::row_sum(Var a) {
  check_owned(a);
  Node n{.kind = OpKind::RowSum, .lhs = a.id_, .arity = 1};
  n.value = a.value().rowwise().sum();
  return push(std::move(n));
}

Var Tape::diag_rsqrt_sandwich(Var k, Var d) {
  check_owned(k);
  check_owned(d);
  const Matrix& kv = k.value();
  const Matrix& dv = d.value();
  require_square("diag-rsqrt-sandwich", kv);
  if (dv.cols() != 1 || dv.rows() != kv.rows()) shape_error("diag-rsqrt-sandwich", kv, dv);
  if ((dv.array() <= 0.0).any() || !dv.allFinite()) {
    throw DegeneracyError("diag-rsqrt-sandwich: degrees must be strictly positive");
  }
  Node n{.kind = OpKind::DiagRsqrtSandwich, .lhs = k.id_, .rhs = d.id_, .arity = 2};
  const Vector r = dv.col(0).array().rsqrt();
  n.value = r.asDiagonal() * kv * r.asDiagonal();
  return push(std::move(n));
}

Var Tape::inverse(Var a) {
  check_owned(a);
  const Matrix& av = a.value();
  require_square("matrix-inverse", av);
  Eigen::PartialPivLU<Matrix> lu(av);
  const double rcond = lu.rcond();
  if (!(rcond > 0.0) || 1.0 / rcond > kMaxCondition) {
    std::ostringstream os;
    os << "matrix-inverse: condition estimate " << (rcond > 0.0 ? 1.0 / rcond : INFINITY)
       << " exceeds " << kMaxCondition;
    throw SingularityError(os.str());
  }
  Node n{.kind = OpKind::Inverse, .lhs = a.id_, .arity = 1};
  n.value = lu.inverse();
  return push(std::move(n));
}

Var Tape::trace(Var a) {
  check_owned(a);
  require_square("trace", a.value());
  Node n{.kind = OpKind::Trace, .lhs = a.id_, .arity = 1};
  n.value = Matrix::Constant(1, 1, a.value().trace());
  return push(std::move(n));
}

Var Tape::clamp01_shifted(Var a) {
  check_owned(a);
  Node n{.kind = OpKind::Clamp01Shifted, .lhs = a.id_, .arity = 1};
  n.value = (a.value().array() + 0.5).max(0.0).min(1.0).matrix();
  return push(std::move(n));
}

Var Tape::broadcast_col_gate(Var data, Var z) {
  check_owned(data);
  check_owned(z);
  const Matrix& xv = data.value();
  const Matrix& zv = z.value();
  if (zv.cols() != 1 || zv.rows() != xv.cols()) shape_error("broadcast-col-gate", xv, zv);
  Node n{.kind = OpKind::BroadcastColGate, .lhs = data.id_, .rhs = z.id_, .arity = 2};
  n.value = xv * zv.col(0).asDiagonal();
  return push(std::move(n));
}

Var Tape::pairwise_sq_dist(Var a) {
  check_owned(a);
  const Matrix& x = a.value();
  const Eigen::Index n = x.rows();
  Matrix gram;
  gram.noalias() = x * x.transpose();
  Matrix d(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    d(j, j) = 0.0;
    for (Eigen::Index i = 0; i < j; ++i) {
      const double v = std::max(0.0, gram(i, i) + gram(j, j) - 2.0 * gram(i, j));
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  Node node{.kind = OpKind::PairwiseSqDist, .lhs = a.id_, .arity = 1};
  node.value = std::move(d);
  return push(std::move(node));
}

Var Tape::transpose(Var a) {
  check_owned(a);
  Node n{.kind = OpKind::Transpose, .lhs = a.id_, .arity = 1};
  n.value = a.value().transpose();
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  check_owned(a);
  Node n{.kind = OpKind::Sum, .lhs = a.id_, .arity = 1};
  n.value = Matrix::Constant(1, 1, a.value().sum());
  return push(std::move(n));
}

Var Tape::normal_cdf(Var a, double shift, double spread) {
  check_owned(a);
  if (!(spread > 0.0)) throw ContractError("normal-cdf: spread must be positive");
  Node n{.kind = OpKind::NormalCdf, .lhs = a.id_, .arity = 1, .param = shift, .param2 = spread};
  n.value = a.value().unaryExpr([&](double v) { return mmdufs::normal_cdf((v + shift) / spread); });
  return push(std::move(n));
}

Gradients Tape::backward(Var loss) const {
  check_owned(loss);
  const Matrix& lv = loss.value();
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ContractError("backward: loss must be a 1x1 node, got " + shape(lv));
  }

  std::vector<Matrix> adj(loss.id_ + 1);
  adj[loss.id_] = Matrix::Ones(1, 1);

  for (std::size_t idx = loss.id_ + 1; idx-- > 0;) {
    const Node& node = nodes_[idx];
    if (node.kind == OpKind::Leaf || !node.needs_grad || adj[idx].size() == 0) continue;
    const Matrix& g = adj[idx];
    const Matrix& a = nodes_[node.lhs].value;
    const bool ga = needs_grad(node.lhs);
    const bool gb = node.arity == 2 && needs_grad(node.rhs);

    switch (node.kind) {
      case OpKind::Matmul: {
        const Matrix& b = nodes_[node.rhs].value;
        if (ga) accumulate(adj[node.lhs], g * b.transpose());
        if (gb) accumulate(adj[node.rhs], a.transpose() * g);
        break;
      }
      case OpKind::Add:
        if (ga) accumulate(adj[node.lhs], g);
        if (gb) accumulate(adj[node.rhs], g);
        break;
      case OpKind::Sub:
        if (ga) accumulate(adj[node.lhs], g);
        if (gb) accumulate(adj[node.rhs], -g);
        break;
      case OpKind::Scale:
        accumulate(adj[node.lhs], node.param * g);
        break;
      case OpKind::Hadamard: {
        const Matrix& b = nodes_[node.rhs].value;
        if (ga) accumulate(adj[node.lhs], g.cwiseProduct(b));
        if (gb) accumulate(adj[node.rhs], g.cwiseProduct(a));
        break;
      }
      case OpKind::Exp:
        accumulate(adj[node.lhs], g.cwiseProduct(node.value));
        break;
      case OpKind::NegSqScaled:
        accumulate(adj[node.lhs], (-2.0 * node.param) * g.cwiseProduct(a));
        break;
      case OpKind::RowSum:
        accumulate(adj[node.lhs], g.col(0).replicate(1, a.cols()));
        break;
      case OpKind::DiagRsqrtSandwich: {
        const Matrix& d = nodes_[node.rhs].value;
        if (ga) {
          const Vector r = d.col(0).array().rsqrt();
          accumulate(adj[node.lhs], r.asDiagonal() * g * r.asDiagonal());
        }
        if (gb) {
          const Matrix gl = g.cwiseProduct(node.value);
          const Vector s = gl.rowwise().sum() + gl.colwise().sum().transpose();
          accumulate(adj[node.rhs], (-0.5 * s.array() / d.col(0).array()).matrix());
        }
        break;
      }
      case OpKind::Inverse: {
        // d(A^-1) = -A^-1 dA A^-1, so dL/dA = -(A^-1)^T G (A^-1)^T.
        const Matrix& inv = node.value;
        Matrix t;
        t.noalias() = inv.transpose() * g;
        Matrix r;
        r.noalias() = -(t * inv.transpose());
        accumulate(adj[node.lhs], r);
        break;
      }
      case OpKind::Trace:
        accumulate(adj[node.lhs], g(0, 0) * Matrix::Identity(a.rows(), a.cols()));
        break;
      case OpKind::Clamp01Shifted: {
        const auto inside = ((a.array() + 0.5) > 0.0 && (a.array() + 0.5) < 1.0).cast<double>();
        accumulate(adj[node.lhs], (g.array() * inside).matrix());
        break;
      }
      case OpKind::BroadcastColGate: {
        const Matrix& z = nodes_[node.rhs].value;
        if (ga) accumulate(adj[node.lhs], g * z.col(0).asDiagonal());
        if (gb) accumulate(adj[node.rhs], g.cwiseProduct(a).colwise().sum().transpose());
        break;
      }
      case OpKind::PairwiseSqDist: {
        // d/dx_i sum_jk G_jk |x_j - x_k|^2 = 2 (rowsum(S)_i x_i - (S x)_i), S = G + G^T.
        const Matrix s = g + g.transpose();
        const Vector rs = s.rowwise().sum();
        Matrix sx;
        sx.noalias() = s * a;
        accumulate(adj[node.lhs], 2.0 * (rs.asDiagonal() * a - sx));
        break;
      }
      case OpKind::Transpose:
        accumulate(adj[node.lhs], g.transpose());
        break;
      case OpKind::Sum:
        accumulate(adj[node.lhs], Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
        break;
      case OpKind::NormalCdf: {
        const double shift = node.param;
        const double spread = node.param2;
        const Matrix dens =
            a.unaryExpr([&](double v) { return mmdufs::normal_pdf((v + shift) / spread) / spread; });
        accumulate(adj[node.lhs], g.cwiseProduct(dens));
        break;
      }
      case OpKind::Leaf:
        break;
    }
  }

  Gradients grads;
  for (std::size_t idx = 0; idx < nodes_.size(); ++idx) {
    const Node& node = nodes_[idx];
    if (node.kind != OpKind::Leaf || !node.trainable) continue;
    if (idx <= loss.id_ && adj[idx].size() != 0) {
      grads.emplace(idx, adj[idx]);
    } else {
      grads.emplace(idx, Matrix::Zero(node.value.rows(), node.value.cols()));
    }
  }
  return grads;
}

SymmetricEigen eigendecompose_symmetric(const Matrix& a) {
  require_square("eigendecompose_symmetric", a);
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw InputError("eigendecompose_symmetric: solver did not converge");
  }
  // Eigen returns ascending order.
  SymmetricEigen out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

}  // namespace mmdufs
