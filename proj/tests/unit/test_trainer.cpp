#include "mmdufs/datagen.hpp"
#include "mmdufs/errors.hpp"
#include "mmdufs/graph.hpp"
#include "mmdufs/operators.hpp"
#include "mmdufs/trainer.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mmdufs;

namespace {

RunConfig short_config(int epochs, double lambda = 1e-4) {
  RunConfig cfg;
  cfg.epochs = epochs;
  cfg.lambda_x = cfg.lambda_y = lambda;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("shared loss with closed gates and no penalty is zero") {
  std::mt19937_64 rng(1);
  Tape tape;
  const Var zx = tape.constant(Matrix::Zero(6, 3));
  const Var zy = tape.constant(Matrix::Zero(6, 2));
  const Var p = tape.constant(oracle::random_matrix(rng, 6, 6));
  const LossTerms t = shared_loss(tape, zx, zy, p, tape.constant(Vector::Constant(3, -5.0)),
                                  tape.constant(Vector::Constant(2, -5.0)), 0.5, 0.0, 0.0);
  CHECK(t.loss.scalar() == 0.0);
  CHECK(t.score_x.scalar() == 0.0);
}

TEST_CASE("shared loss matches a hand-expanded n = 2 oracle") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    oracle::PipelineInstance inst;
    inst.x = oracle::random_matrix(rng, 2, 1);
    inst.y = oracle::random_matrix(rng, 2, 1);
    inst.noise_x = oracle::random_matrix(rng, 1, 1, -0.2, 0.2);
    inst.noise_y = oracle::random_matrix(rng, 1, 1, -0.2, 0.2);
    inst.bandwidth_x = 0.4 + 0.5 * (u(rng) + 1.0);
    inst.bandwidth_y = 0.4 + 0.5 * (u(rng) + 1.0);
    inst.b = 1.7;
    const double mx = 0.2 * u(rng);
    const double my = 0.2 * u(rng);
    Tape tape;
    const double got = oracle::pipeline_loss(tape, inst, tape.constant(Vector::Constant(1, mx)),
                                             tape.constant(Vector::Constant(1, my)), true)
                           .scalar();
    const double expected = oracle::shared_loss_n2(inst.x(0, 0), inst.x(1, 0), inst.y(0, 0), inst.y(1, 0), mx, my,
                                                   inst.noise_x(0), inst.noise_y(0), inst.bandwidth_x,
                                                   inst.bandwidth_y, inst.b, inst.lambda_x, inst.lambda_y, 0.5);
    CHECK(std::abs(got - expected) < 1e-10);
  }
}

TEST_CASE("differential loss closed forms") {
  std::mt19937_64 rng(3);
  const Matrix d = oracle::random_matrix(rng, 5, 3);
  const Vector mu = oracle::random_matrix(rng, 3, 1);
  double el0 = 0.0;
  for (int i = 0; i < 3; ++i) el0 += normal_cdf((0.5 + mu(i)) / 0.5);
  {
    Tape tape;
    const LossTerms t =
        differential_loss(tape, tape.constant(d), tape.constant(Matrix::Zero(5, 5)), tape.constant(mu), 0.5, 0.0);
    CHECK(t.loss.scalar() == 0.0);
  }
  {
    Tape tape;
    const LossTerms t =
        differential_loss(tape, tape.constant(d), tape.constant(Matrix::Identity(5, 5)), tape.constant(mu), 0.5, 0.3);
    CHECK(t.loss.scalar() == doctest::Approx(-d.squaredNorm() / 5.0 + 0.3 * el0).epsilon(1e-12));
  }
}

TEST_CASE("end-to-end gradients match central differences") {
  std::mt19937_64 rng(4);
  for (bool shared : {true, false}) {
    CAPTURE(shared);
    for (int trial = 0; trial < 5; ++trial) {
      const oracle::PipelineInstance inst = oracle::random_instance(rng, 12, 5, 4);
      const Vector mu_x = oracle::random_matrix(rng, 5, 1, -0.2, 0.2);
      const Vector mu_y = oracle::random_matrix(rng, 4, 1, -0.2, 0.2);
      const oracle::GradientCheck g = oracle::check_pipeline_gradient(inst, mu_x, mu_y, shared, 1e-4);
      CHECK(g.error_x < 1e-3);
      CHECK(g.error_y < 1e-3);
    }
  }
}

TEST_CASE("clean gates score above random gates on the gaussian mixture") {
  const ModalPair pair = gen_gaussian_mixture(0);
  const Matrix x = unit_norm_columns(pair.x);
  const Matrix y = unit_norm_columns(pair.y);
  auto score = [&](const Vector& zx, const Vector& zy) {
    const Matrix gx = apply_gates(x, zx);
    const Matrix gy = apply_gates(y, zy);
    const Matrix p = shared_operator(laplacian_from_data(gx, {}), laplacian_from_data(gy, {}));
    const double n = static_cast<double>(x.rows());
    return ((gx.array() * (p * gx).array()).sum() + (gy.array() * (p * gy).array()).sum()) / n;
  };
  Vector clean_x = Vector::Zero(x.cols());
  Vector clean_y = Vector::Zero(y.cols());
  for (auto i : pair.truth.shared_x) clean_x(i) = 1.0;
  for (auto i : pair.truth.shared_y) clean_y(i) = 1.0;
  const double clean = score(clean_x, clean_y);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    Vector rx = Vector::Zero(x.cols());
    Vector ry = Vector::Zero(y.cols());
    std::vector<Eigen::Index> ix(static_cast<std::size_t>(x.cols()));
    std::vector<Eigen::Index> iy(static_cast<std::size_t>(y.cols()));
    std::iota(ix.begin(), ix.end(), 0);
    std::iota(iy.begin(), iy.end(), 0);
    std::shuffle(ix.begin(), ix.end(), rng);
    std::shuffle(iy.begin(), iy.end(), rng);
    for (std::size_t i = 0; i < pair.truth.shared_x.size(); ++i) rx(ix[i]) = 1.0;
    for (std::size_t i = 0; i < pair.truth.shared_y.size(); ++i) ry(iy[i]) = 1.0;
    CHECK(clean > score(rx, ry));
  }
}

TEST_CASE("train preconditions") {
  const ModalPair pair = gen_gaussian_mixture(0);
  RunConfig cfg = short_config(0);
  CHECK_THROWS_WITH_AS(train(pair, cfg), doctest::Contains("epochs"), ContractError);
  cfg = short_config(1);
  cfg.batch_size = 1000;
  CHECK_THROWS_WITH_AS(train(pair, cfg), doctest::Contains("batch_size"), ContractError);
  ModalPair broken = pair;
  broken.y = broken.y.topRows(10);
  CHECK_THROWS_AS(train(broken, short_config(1)), DimensionError);
}

TEST_CASE("a non-finite step aborts with the epoch and last record") {
  const ModalPair pair = gen_gaussian_mixture(0);
  RunConfig cfg = short_config(5);
  cfg.learning_rate = 1e308;
  cfg.lambda_x = cfg.lambda_y = 1e10;
  CHECK_THROWS_WITH_AS(train(pair, cfg), doctest::Contains("training aborted at epoch"), NumericalError);
}

TEST_CASE("training log has one record per epoch and is bit-identical for a fixed seed") {
  const ModalPair pair = gen_gaussian_mixture(1);
  for (bool minibatch : {false, true}) {
    for (Mode mode : {Mode::Shared, Mode::Differential}) {
      RunConfig cfg = short_config(15);
      cfg.mode = mode;
      cfg.seed = 17;
      if (minibatch) cfg.batch_size = 100;
      const TrainResult a = train(pair, cfg, pair.truth);
      const TrainResult b = train(pair, cfg, pair.truth);
      REQUIRE(a.log.records.size() == 15);
      for (std::size_t i = 0; i < a.log.records.size(); ++i) {
        CHECK(a.log.records[i].epoch == static_cast<int>(i));
        CHECK(a.log.records[i].loss == b.log.records[i].loss);
        CHECK(a.log.records[i].score_y == b.log.records[i].score_y);
        CHECK(a.log.records[i].f1_x.has_value());
      }
      CHECK(a.gates_x.mu() == b.gates_x.mu());
      CHECK(a.gates_y.mu() == b.gates_y.mu());
      cfg.seed = 18;
      CHECK(train(pair, cfg).gates_x.mu() != a.gates_x.mu());
    }
  }
}

TEST_CASE("train log CSV") {
  const ModalPair pair = gen_gaussian_mixture(2);
  const TrainResult r = train(pair, short_config(3), pair.truth);
  const auto path = std::filesystem::temp_directory_path() / "mmdufs_trainlog.csv";
  r.log.write_csv(path);
  const std::string text = slurp(path);
  CHECK(text.rfind("epoch,loss,score_x,score_y,reg_x,reg_y,open_x,open_y,f1_x,f1_y\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  std::filesystem::remove(path);
}

TEST_CASE("median bandwidth is frozen after the first epoch by default") {
  const ModalPair pair = gen_gaussian_mixture(3);
  RunConfig cfg = short_config(30, 0.5);
  const TrainResult frozen = train(pair, cfg);
  cfg.freeze_bandwidth = false;
  const TrainResult moving = train(pair, cfg);
  RunConfig one = cfg;
  one.epochs = 1;
  const TrainResult first = train(pair, one);
  CHECK(frozen.bandwidth_x == first.bandwidth_x);
  CHECK(moving.bandwidth_x != first.bandwidth_x);
}

TEST_CASE("with no penalty the score term rises over training") {
  int rising = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ModalPair pair = gen_gaussian_mixture(seed);
    // b = 100 lifts the unit-norm score gradient out of the gate noise.
    RunConfig cfg = short_config(300, 0.0);
    cfg.b = 100.0;
    cfg.seed = seed;
    const TrainResult r = train(pair, cfg);
    // Window means damp the per-epoch gate noise.
    const std::size_t window = 50;
    std::vector<double> means;
    for (std::size_t start = 0; start < r.log.records.size(); start += window) {
      double s = 0.0;
      for (std::size_t i = start; i < start + window; ++i) s += r.log.records[i].score_x + r.log.records[i].score_y;
      means.push_back(s / static_cast<double>(window));
    }
    bool ok = true;
    for (std::size_t i = 1; i < means.size(); ++i) ok = ok && means[i] >= means[i - 1];
    rising += ok ? 1 : 0;
  }
  CHECK(rising >= 9);
}

TEST_CASE("raising lambda never opens more gates") {
  const ModalPair pair = gen_gaussian_mixture(0);
  int previous = std::numeric_limits<int>::max();
  int most = 0;
  for (double lambda : default_lambda_grid()) {
    CAPTURE(lambda);
    RunConfig cfg = short_config(300, lambda);
    cfg.b = 100.0;
    const TrainResult r = train(pair, cfg);
    const int open = r.log.records.back().open_x + r.log.records.back().open_y;
    CHECK(open <= previous);
    previous = open;
    most = std::max(most, open);
  }
  CHECK(most > 0);
}

TEST_CASE("warm-up tuning") {
  const ModalPair pair = gen_gaussian_mixture(0);
  const RunConfig base = short_config(1);
  SUBCASE("a single grid value is returned") {
    const TuneResult t = warmup_tune(pair, base, {0.01}, 5);
    CHECK(t.lambda_x == 0.01);
    CHECK(t.lambda_y == 0.01);
    CHECK(t.rows.size() == 1);
  }
  SUBCASE("ties go to the smaller lambda") {
    // Both penalties shut every gate, so both scores are zero.
    const TuneResult t = warmup_tune(pair, base, {1e4, 1e3}, 50);
    CHECK(t.rows[0].score == 0.0);
    CHECK(t.rows[1].score == 0.0);
    CHECK(t.lambda_x == 1e3);
  }
  SUBCASE("the chosen lambda has the highest score and parallel jobs agree") {
    const std::vector<double> grid = {1e-4, 1e-2, 1e0};
    const TuneResult serial = warmup_tune(pair, base, grid, 100, 1);
    const TuneResult parallel = warmup_tune(pair, base, grid, 100, 3);
    double best = -1.0;
    double chosen = -1.0;
    for (const auto& r : serial.rows) {
      best = std::max(best, r.score);
      if (r.lambda == serial.lambda_x) chosen = r.score;
    }
    CHECK(chosen == best);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(serial.rows[i].score == parallel.rows[i].score);
    CHECK(serial.lambda_x == parallel.lambda_x);
  }
  SUBCASE("contracts") {
    CHECK_THROWS_AS(warmup_tune(pair, base, {}, 5), ContractError);
    CHECK_THROWS_AS(warmup_tune(pair, base, {1.0}, 0), ContractError);
  }
  CHECK(default_lambda_grid().size() == 9);
}

TEST_CASE("adam optimizer runs and is deterministic") {
  const ModalPair pair = gen_gaussian_mixture(4);
  RunConfig cfg = short_config(10);
  cfg.optimizer = OptimizerKind::Adam;
  cfg.learning_rate = 0.05;
  const TrainResult a = train(pair, cfg);
  const TrainResult b = train(pair, cfg);
  CHECK(a.gates_x.mu() == b.gates_x.mu());
  CHECK(!a.gates_x.mu().isZero());
}

TEST_CASE("differential mode recovers the modality-specific clusters") {
  const ModalPair pair = gen_gaussian_mixture(0);
  RunConfig cfg;
  cfg.mode = Mode::Differential;
  cfg.lambda_x = cfg.lambda_y = 1e-3;
  cfg.c = 0.1;
  cfg.b = 0.1;
  cfg.learning_rate = 1.0;
  cfg.epochs = 3000;
  const TrainResult r = train(pair, cfg, pair.truth);
  CHECK(*r.log.records.back().f1_x >= 0.9);
  CHECK(*r.log.records.back().f1_y >= 0.9);
}
