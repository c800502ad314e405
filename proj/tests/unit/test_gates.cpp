#include "mmdufs/errors.hpp"
#include "mmdufs/gates.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>

using namespace mmdufs;

TEST_CASE("sample_gates saturates for large |mu|") {
  GateState state((Vector(2) << 10.0, -10.0).finished(), 0.5, 1);
  for (int i = 0; i < 1000; ++i) {
    const Vector z = sample_gates(state, true);
    CHECK(z(0) == 1.0);
    CHECK(z(1) == 0.0);
  }
}

TEST_CASE("train-mode gates lie in [0, 1] and eval mode is deterministic") {
  std::mt19937_64 rng(2);
  GateState state(Vector(oracle::random_matrix(rng, 50, 1, -1.0, 1.0)), 0.5, 3);
  for (int i = 0; i < 100; ++i) {
    const Vector z = sample_gates(state, true);
    CHECK(z.minCoeff() >= 0.0);
    CHECK(z.maxCoeff() <= 1.0);
  }
  const Vector e1 = sample_gates(state, false);
  const Vector e2 = eval_gates(state);
  CHECK(e1 == e2);
  CHECK(e1 == (0.5 + state.mu().array()).max(0.0).min(1.0).matrix());
}

TEST_CASE("monte-carlo gate mean matches the clamped gaussian mean") {
  GateState state(Vector::Zero(1), 0.5, 4);
  double total = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) total += sample_gates(state, true)(0);
  CHECK(std::abs(total / draws - oracle::clamped_gaussian_mean(0.5, 0.5)) < 0.01);
}

TEST_CASE("open-gate frequency matches Phi((0.5 + mu) / sigma) within 3 standard errors") {
  for (double mu : {-0.5, 0.0, 0.5}) {
    CAPTURE(mu);
    GateState state(Vector::Constant(1, mu), 0.5, 5);
    const int draws = 100000;
    int open = 0;
    for (int i = 0; i < draws; ++i) open += sample_gates(state, true)(0) > 0.0 ? 1 : 0;
    const double p = normal_cdf((0.5 + mu) / 0.5);
    const double se = std::sqrt(p * (1 - p) / draws);
    CHECK(std::abs(static_cast<double>(open) / draws - p) < 3.0 * se);
  }
}

TEST_CASE("expected L0") {
  CHECK(expected_l0(GateState(Vector::Zero(1), 0.5, 0)) == doctest::Approx(0.841344746).epsilon(1e-8));
  CHECK(expected_l0(GateState(Vector::Zero(4), 0.5, 0)) == doctest::Approx(4 * 0.841344746).epsilon(1e-8));
  CHECK(expected_l0(GateState(Vector::Constant(1, 50.0), 0.5, 0)) == doctest::Approx(1.0));

  SUBCASE("gradient at mu = 0.2") {
    Tape tape;
    const Var mu = tape.leaf(Vector::Constant(1, 0.2), true);
    const double g = tape.backward(expected_l0(tape, mu, 0.5)).at(mu.id())(0, 0);
    const double analytic = normal_pdf(0.7 / 0.5) / 0.5;
    const double h = 1e-5;
    const double fd = (normal_cdf((0.7 + h) / 0.5) - normal_cdf((0.7 - h) / 0.5)) / (2 * h);
    CHECK(std::abs(g - analytic) / analytic < 1e-12);
    CHECK(std::abs(g - fd) / fd < 1e-6);
  }
  SUBCASE("monotone in every mu") {
    std::mt19937_64 rng(6);
    Vector mu = oracle::random_matrix(rng, 8, 1, -2.0, 2.0);
    double prev = expected_l0(GateState(mu, 0.5, 0));
    for (int step = 0; step < 40; ++step) {
      mu(step % 8) += 0.1;
      const double now = expected_l0(GateState(mu, 0.5, 0));
      CHECK(now >= prev);
      prev = now;
    }
  }
  SUBCASE("sigma must be positive") { CHECK_THROWS_AS(GateState(Vector::Zero(2), 0.0, 0), ContractError); }
}

TEST_CASE("apply_gates") {
  std::mt19937_64 rng(7);
  const Matrix data = oracle::random_matrix(rng, 6, 4);
  CHECK(apply_gates(data, Vector::Ones(4)) == data);
  CHECK(apply_gates(data, Vector::Zero(4)).isZero(0.0));
  const Vector z = (Vector(4) << 0.0, 0.3, 1.0, 0.75).finished();
  const Matrix out = apply_gates(data, z);
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < 6; ++i) CHECK(out(i, j) == data(i, j) * z(j));
  }
  CHECK_THROWS_AS(apply_gates(data, Vector::Ones(3)), DimensionError);
}

TEST_CASE("select_features") {
  GateState converged((Vector(3) << 10.0, -10.0, 10.0).finished(), 0.5, 0);
  CHECK(select_features(converged, SelectionPolicy::Converged) == std::vector<Eigen::Index>{0, 2});
  GateState top((Vector(3) << 0.2, 0.9, 0.1).finished(), 0.5, 0);
  CHECK(select_features(top, SelectionPolicy::TopK, 1) == std::vector<Eigen::Index>{1});
  CHECK_THROWS_AS(select_features(top, SelectionPolicy::TopK, 4), ContractError);

  SUBCASE("top-k agrees with a stable-sort oracle on values with duplicates") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> level(0, 5);
    for (int trial = 0; trial < 20; ++trial) {
      Vector v(30);
      for (Eigen::Index i = 0; i < 30; ++i) v(i) = 0.1 * level(rng);
      std::vector<Eigen::Index> order(30);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return v(a) > v(b); });
      for (Eigen::Index k : {0, 1, 7, 30}) {
        std::vector<Eigen::Index> expected(order.begin(), order.begin() + k);
        std::vector<Eigen::Index> got = top_k_indices(v, k);
        std::sort(expected.begin(), expected.end());
        std::sort(got.begin(), got.end());
        CHECK(got == expected);
      }
    }
  }
}

TEST_CASE("gate CSV round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "mmdufs_test_gates";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(9);
  GateState state(Vector(oracle::random_matrix(rng, 7, 1, -3.0, 3.0)), 0.5, 0);
  write_gates_csv(dir / "g.csv", state);
  const GateState back = read_gates_csv(dir / "g.csv");
  CHECK(back.mu() == state.mu());
  std::filesystem::remove_all(dir);
}

TEST_CASE("noise draws are reproducible from the seed") {
  GateState a(5, 0.5, 42);
  GateState b(5, 0.5, 42);
  GateState c(5, 0.5, 43);
  const Vector na = a.draw_noise();
  CHECK(na == b.draw_noise());
  CHECK(na != c.draw_noise());
  CHECK(a.mu().isZero(0.0));
}
