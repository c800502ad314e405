#pragma once

#include "mmdufs/tensor.hpp"

namespace mmdufs {

/// Default regularization constant of the differential operators.
inline constexpr double kDefaultRegularization = 0.1;

/// Shared, X-differential and Y-differential operators for one set of graphs.
struct OperatorBundle {
  Var shared;
  Var diff_x;
  Var diff_y;
  double c = kDefaultRegularization;
  double b = 1.0;
};

/// b * (L_x L_y + L_y L_x). For symmetric inputs L_y L_x = (L_x L_y)^T, so
/// the result is formed as b * (M + M^T) with M = L_x L_y, which is exactly
/// symmetric.
Var shared_operator(Tape& tape, Var lx, Var ly, double b = 1.0);
Matrix shared_operator(const Matrix& lx, const Matrix& ly, double b = 1.0);

/// b * (L_other + cI)^-1 L_target (L_other + cI)^-1, symmetrized.
Var differential_operator(Tape& tape, Var l_target, Var l_other, double c, double b = 1.0);
Matrix differential_operator(const Matrix& l_target, const Matrix& l_other, double c, double b = 1.0);

OperatorBundle build_operators(Tape& tape, Var lx, Var ly, double c, double b);

/// f^T op f.
double generalized_laplacian_score(const Vector& f, const Matrix& op);

/// Per-column scores diag(data^T op data).
Vector score_all_features(const Matrix& data, const Matrix& op);

/// Columns shifted to zero mean and scaled to unit (population) variance.
/// Constant columns become zero.
Matrix standardize_columns(const Matrix& data);

/// Columns centred and scaled to unit Euclidean norm (z-score / sqrt(n)).
Matrix unit_norm_columns(const Matrix& data);

}  // namespace mmdufs
