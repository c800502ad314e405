#include "mmdufs/operators.hpp"

#include "mmdufs/errors.hpp"

#include <cmath>
#include <string>

namespace mmdufs {

namespace {

void require_square_pair(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw DimensionError(std::string(op) + ": operands must be square with equal size");
  }
}

}  // namespace

Var shared_operator(Tape& tape, Var lx, Var ly, double b) {
  require_square_pair("shared_operator", lx.value(), ly.value());
  const Var prod = tape.matmul(lx, ly);
  return tape.scale(tape.add(prod, tape.transpose(prod)), b);
}

Matrix shared_operator(const Matrix& lx, const Matrix& ly, double b) {
  Tape tape;
  return shared_operator(tape, tape.constant(lx), tape.constant(ly), b).value();
}

Var differential_operator(Tape& tape, Var l_target, Var l_other, double c, double b) {
  require_square_pair("differential_operator", l_target.value(), l_other.value());
  if (!(c > 0.0)) throw ContractError("differential_operator: c must be positive");
  const Eigen::Index n = l_other.rows();
  const Var shifted = tape.add(l_other, tape.constant(c * Matrix::Identity(n, n)));
  const Var inv = tape.inverse(shifted);
  const Var q = tape.matmul(tape.matmul(inv, l_target), inv);
  return tape.scale(tape.add(q, tape.transpose(q)), 0.5 * b);
}

Matrix differential_operator(const Matrix& l_target, const Matrix& l_other, double c, double b) {
  Tape tape;
  return differential_operator(tape, tape.constant(l_target), tape.constant(l_other), c, b).value();
}

OperatorBundle build_operators(Tape& tape, Var lx, Var ly, double c, double b) {
  OperatorBundle ops;
  ops.c = c;
  ops.b = b;
  ops.shared = shared_operator(tape, lx, ly, b);
  ops.diff_x = differential_operator(tape, lx, ly, c, b);
  ops.diff_y = differential_operator(tape, ly, lx, c, b);
  return ops;
}

double generalized_laplacian_score(const Vector& f, const Matrix& op) {
  if (op.rows() != op.cols() || f.size() != op.rows()) {
    throw DimensionError("generalized_laplacian_score: feature length " + std::to_string(f.size()) +
                         " does not match operator size " + std::to_string(op.rows()));
  }
  if (!f.allFinite()) throw InputError("generalized_laplacian_score: feature has non-finite values");
  return f.dot(op * f);
}

Vector score_all_features(const Matrix& data, const Matrix& op) {
  if (op.rows() != op.cols() || data.rows() != op.rows()) {
    throw DimensionError("score_all_features: data has " + std::to_string(data.rows()) +
                         " rows, operator is " + std::to_string(op.rows()) + "x" + std::to_string(op.cols()));
  }
  Matrix projected;
  projected.noalias() = op * data;
  return data.cwiseProduct(projected).colwise().sum().transpose();
}

Matrix standardize_columns(const Matrix& data) {
  Matrix out = data.rowwise() - data.colwise().mean();
  const double n = static_cast<double>(data.rows());
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double sd = std::sqrt(out.col(j).squaredNorm() / n);
    if (sd > 1e-12 * std::max(1.0, data.col(j).cwiseAbs().maxCoeff())) {
      out.col(j) /= sd;
    } else {
      out.col(j).setZero();
    }
  }
  return out;
}

Matrix unit_norm_columns(const Matrix& data) {
  return standardize_columns(data) / std::sqrt(static_cast<double>(data.rows()));
}

}  // namespace mmdufs
