#include "mmdufs/config.hpp"
#include "mmdufs/errors.hpp"
#include "mmdufs/io.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>

using namespace mmdufs;

TEST_CASE("CSV round trip keeps every bit") {
  const auto path = std::filesystem::temp_directory_path() / "mmdufs_io_roundtrip.csv";
  std::mt19937_64 rng(1);
  Matrix m = oracle::random_matrix(rng, 7, 5, -1e6, 1e6);
  m(0, 0) = 1e-300;
  m(1, 1) = -0.0;
  m(2, 2) = std::numeric_limits<double>::max();
  write_csv(path, m, {"a", "b", "c", "d", "e"});
  const CsvTable t = read_csv(path);
  CHECK(t.header == std::vector<std::string>{"a", "b", "c", "d", "e"});
  CHECK(t.values == m);
  std::filesystem::remove(path);
}

TEST_CASE("index files") {
  const auto path = std::filesystem::temp_directory_path() / "mmdufs_io_index.txt";
  write_index_file(path, {3, 1, 4});
  CHECK(read_index_file(path) == std::vector<Eigen::Index>{3, 1, 4});
  {
    std::ofstream out(path);
    out << "1\n\nx\n";
  }
  CHECK_THROWS_AS(read_index_file(path), IngestionError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_csv(path), IngestionError);
}

TEST_CASE("run config parsing") {
  const RunConfig d = parse_run_config("{}");
  CHECK(d.mode == Mode::Shared);
  CHECK(d.epochs == 10000);
  CHECK(d.learning_rate == 2.0);
  CHECK(!d.batch_size.has_value());
  CHECK(d.sigma_g == 0.5);
  CHECK(d.c == 0.1);

  const RunConfig c = parse_run_config(R"({"mode": "differential", "lambda_x": 0.4, "lambda_y": 0.2, "c": 0.01,
      "b": 3, "learning_rate": 1, "epochs": 50, "batch_size": 64, "optimizer": "adam", "seed": 9,
      "bandwidth_x": 0.5, "bandwidth_y": "median", "normalize": false, "standardize": false,
      "freeze_bandwidth": false, "sigma_g": 0.3})");
  CHECK(c.mode == Mode::Differential);
  CHECK(c.lambda_y == 0.2);
  CHECK(c.batch_size == 64);
  CHECK(c.optimizer == OptimizerKind::Adam);
  CHECK(c.seed == 9);
  CHECK(c.kernel_x.bandwidth == 0.5);
  CHECK(!c.kernel_y.bandwidth.has_value());
  CHECK(!c.kernel_x.normalize);
  CHECK(!c.standardize);
  CHECK(!c.freeze_bandwidth);

  SUBCASE("round trip through to_json") {
    const RunConfig back = parse_run_config(to_json(c));
    CHECK(back.lambda_x == c.lambda_x);
    CHECK(back.batch_size == c.batch_size);
    CHECK(back.kernel_x.bandwidth == c.kernel_x.bandwidth);
    CHECK(to_json(back) == to_json(c));
  }
  SUBCASE("errors name the field") {
    CHECK_THROWS_WITH_AS(parse_run_config(R"({"epochs": 0})"), doctest::Contains("'epochs'"), ContractError);
    CHECK_THROWS_WITH_AS(parse_run_config(R"({"lambda_x": -1})"), doctest::Contains("'lambda_x'"), ContractError);
    CHECK_THROWS_WITH_AS(parse_run_config(R"({"c": 0})"), doctest::Contains("'c'"), ContractError);
    CHECK_THROWS_WITH_AS(parse_run_config(R"({"mode": "both"})"), doctest::Contains("'mode'"), ContractError);
    CHECK_THROWS_WITH_AS(parse_run_config(R"({"batch_size": 1})"), doctest::Contains("'batch_size'"),
                         ContractError);
    CHECK_THROWS_WITH_AS(parse_run_config(R"({"lr": 1})"), doctest::Contains("'lr'"), ContractError);
    CHECK_NOTHROW(parse_run_config(R"({"lr": 1})", true));
    CHECK_THROWS_AS(parse_run_config("[1, 2]"), ContractError);
    CHECK_THROWS_AS(parse_run_config("{"), ContractError);
  }
  SUBCASE("batch size bounded by the sample count") {
    RunConfig cfg;
    cfg.batch_size = 300;
    CHECK_THROWS_AS(cfg.validate(260), ContractError);
    CHECK_NOTHROW(cfg.validate(300));
  }
}
