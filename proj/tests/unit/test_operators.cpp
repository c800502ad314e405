#include "mmdufs/datagen.hpp"
#include "mmdufs/errors.hpp"
#include "mmdufs/graph.hpp"
#include "mmdufs/operators.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>

using namespace mmdufs;

namespace {

Matrix random_laplacian(std::mt19937_64& rng, Eigen::Index n) {
  const Matrix data = oracle::random_matrix(rng, n, 3);
  return laplacian_from_data(data, {});
}

Matrix random_symmetric(std::mt19937_64& rng, Eigen::Index n) {
  const Matrix m = oracle::random_matrix(rng, n, n);
  return m + m.transpose();
}

}  // namespace

TEST_CASE("shared operator") {
  std::mt19937_64 rng(1);
  CHECK(shared_operator(Matrix::Identity(4, 4), Matrix::Identity(4, 4)) == 2.0 * Matrix::Identity(4, 4));
  const Matrix l = random_laplacian(rng, 7);
  CHECK(shared_operator(l, l).isApprox(2.0 * l * l));
  CHECK_THROWS_AS(shared_operator(Matrix::Identity(3, 3), Matrix::Identity(4, 4)), DimensionError);

  SUBCASE("symmetric and b-scaled") {
    const Matrix lx = random_laplacian(rng, 12);
    const Matrix ly = random_laplacian(rng, 12);
    const Matrix p = shared_operator(lx, ly, 3.0);
    CHECK((p - p.transpose()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(p.isApprox(3.0 * (lx * ly + ly * lx)));
  }
  SUBCASE("scaling both laplacians by alpha scales P by alpha squared") {
    const Matrix lx = random_laplacian(rng, 9);
    const Matrix ly = random_laplacian(rng, 9);
    const double alpha = 0.5;
    CHECK(shared_operator(alpha * lx, alpha * ly) == alpha * alpha * shared_operator(lx, ly));
  }
  SUBCASE("feature ranking does not depend on b") {
    const Matrix lx = random_laplacian(rng, 15);
    const Matrix ly = random_laplacian(rng, 15);
    const Matrix data = oracle::random_matrix(rng, 15, 6);
    const Vector s1 = score_all_features(data, shared_operator(lx, ly, 1.0));
    const Vector s2 = score_all_features(data, shared_operator(lx, ly, 250.0));
    Eigen::Index a1 = 0;
    Eigen::Index a2 = 0;
    s1.maxCoeff(&a1);
    s2.maxCoeff(&a2);
    CHECK(a1 == a2);
  }
}

TEST_CASE("differential operator") {
  std::mt19937_64 rng(2);
  const Matrix lt = random_laplacian(rng, 8);
  const double c = 0.1;
  CHECK(differential_operator(lt, Matrix::Identity(8, 8), c).isApprox(lt / ((1 + c) * (1 + c))));
  CHECK(differential_operator(Matrix::Zero(8, 8), random_laplacian(rng, 8), c).isZero());
  CHECK_THROWS_AS(differential_operator(lt, lt, 0.0), ContractError);
  CHECK_THROWS_AS(differential_operator(lt, Matrix::Identity(3, 3), c), DimensionError);
  // L_other = -cI makes the shifted matrix singular.
  CHECK_THROWS_AS(differential_operator(lt, -c * Matrix::Identity(8, 8), c), SingularityError);

  const Matrix lo = random_laplacian(rng, 8);
  const Matrix q = differential_operator(lt, lo, c, 2.0);
  CHECK((q - q.transpose()).cwiseAbs().maxCoeff() < 1e-8);
  const Matrix inv = (lo + c * Matrix::Identity(8, 8)).inverse();
  CHECK(q.isApprox(2.0 * inv * lt * inv, 1e-9));

  Tape tape;
  const OperatorBundle b = build_operators(tape, tape.constant(lt), tape.constant(lo), c, 2.0);
  CHECK(b.shared.value().isApprox(shared_operator(lt, lo, 2.0)));
  CHECK(b.diff_x.value().isApprox(differential_operator(lt, lo, c, 2.0)));
  CHECK(b.diff_y.value().isApprox(differential_operator(lo, lt, c, 2.0)));
}

TEST_CASE("ideal clusters: shared operator isolates the shared indicators") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const oracle::IdealClusters ic = oracle::make_ideal_clusters(seed);
    const Matrix lx = laplacian_from_data(ic.x, {.bandwidth = ic.bandwidth});
    const Matrix ly = laplacian_from_data(ic.y, {.bandwidth = ic.bandwidth});
    const SymmetricEigen e = eigendecompose_symmetric(shared_operator(lx, ly));
    const Matrix top = e.vectors.leftCols(3);
    CHECK(oracle::max_principal_angle_deg(top, ic.shared_indicators) < 5.0);
    const Eigen::JacobiSVD<Matrix> svd(top.transpose() * ic.split_directions);
    CHECK(svd.singularValues()(0) < 0.1);
  }
}

TEST_CASE("ideal clusters: differential operator separates c^-2 and (1+c)^-2") {
  const double c = 0.1;
  for (std::uint64_t seed : {1, 2, 3}) {
    const oracle::IdealClusters ic = oracle::make_ideal_clusters(seed);
    const Matrix lx = laplacian_from_data(ic.x, {.bandwidth = ic.bandwidth});
    const Matrix ly = laplacian_from_data(ic.y, {.bandwidth = ic.bandwidth});
    const SymmetricEigen e = eigendecompose_symmetric(differential_operator(lx, ly, c));
    CHECK(oracle::max_principal_angle_deg(e.vectors.leftCols(2), ic.split_directions) < 5.0);
    const double high = 1.0 / (c * c);
    const double low = 1.0 / ((1 + c) * (1 + c));
    for (int i = 0; i < 2; ++i) CHECK(std::abs(e.values(i) - high) / high < 0.1);
    for (int i = 2; i < 5; ++i) CHECK(std::abs(e.values(i) - low) / low < 0.1);
    CHECK(e.values(0) / e.values(4) == doctest::Approx(121.0).epsilon(0.1));
  }
}

TEST_CASE("generalized laplacian score") {
  std::mt19937_64 rng(3);
  const Matrix op = random_symmetric(rng, 10);
  const SymmetricEigen e = eigendecompose_symmetric(op);
  CHECK(generalized_laplacian_score(e.vectors.col(0), op) == doctest::Approx(e.values(0)));

  Matrix low_rank = Matrix::Zero(10, 10);
  low_rank += 2.0 * e.vectors.col(0) * e.vectors.col(0).transpose();
  CHECK(std::abs(generalized_laplacian_score(e.vectors.col(5), low_rank)) < 1e-12);

  for (int trial = 0; trial < 5; ++trial) {
    const Vector f = oracle::random_matrix(rng, 10, 1);
    double expected = 0.0;
    for (int i = 0; i < 10; ++i) expected += e.values(i) * std::pow(f.dot(e.vectors.col(i)), 2);
    CHECK(std::abs(generalized_laplacian_score(f, op) - expected) < 1e-10);
  }
  CHECK_THROWS_AS(generalized_laplacian_score(Vector::Ones(3), op), DimensionError);
}

TEST_CASE("score_all_features") {
  std::mt19937_64 rng(4);
  const Matrix op = random_symmetric(rng, 12);
  const Matrix data = oracle::random_matrix(rng, 12, 5);
  const Vector s = score_all_features(data, op);
  CHECK(s(2) == doctest::Approx(generalized_laplacian_score(data.col(2), op)));
  CHECK(std::abs(s.sum() - (data.transpose() * op * data).trace()) < 1e-10);
  CHECK(score_all_features(data.leftCols(1), op)(0) == doctest::Approx(generalized_laplacian_score(data.col(0), op)));
  CHECK_THROWS_AS(score_all_features(Matrix::Ones(3, 2), op), DimensionError);
}

TEST_CASE("informative gaussian mixture features outrank noise under P_shared") {
  const ModalPair pair = gen_gaussian_mixture(0);
  const Matrix lx = laplacian_from_data(pair.x, {});
  const Matrix ly = laplacian_from_data(pair.y, {});
  const Matrix p = shared_operator(lx, ly);
  auto check_view = [&](const Matrix& data, const IndexList& informative, Eigen::Index first_noise) {
    const Vector s = score_all_features(standardize_columns(data), p);
    std::vector<double> noise(s.data() + first_noise, s.data() + s.size());
    std::sort(noise.begin(), noise.end());
    const double p95 = noise[static_cast<std::size_t>(0.95 * static_cast<double>(noise.size() - 1))];
    for (Eigen::Index i : informative) CHECK(s(i) > p95);
  };
  check_view(pair.x, pair.truth.shared_x, 70);
  check_view(pair.y, pair.truth.shared_y, 60);
}

TEST_CASE("column scaling helpers") {
  std::mt19937_64 rng(5);
  Matrix data = oracle::random_matrix(rng, 20, 4, -3.0, 5.0);
  data.col(3).setConstant(2.5);
  const Matrix z = standardize_columns(data);
  for (Eigen::Index j = 0; j < 3; ++j) {
    CHECK(std::abs(z.col(j).mean()) < 1e-12);
    CHECK(z.col(j).squaredNorm() / 20.0 == doctest::Approx(1.0));
  }
  CHECK(z.col(3).isZero());
  const Matrix u = unit_norm_columns(data);
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(u.col(j).norm() == doctest::Approx(1.0));
  CHECK(u.col(3).isZero());
}
