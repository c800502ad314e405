#pragma once

#include "mmdufs/gates.hpp"
#include "mmdufs/graph.hpp"
#include "mmdufs/operators.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace mmdufs {

enum class Mode { Shared, Differential };
enum class OptimizerKind { Sgd, Adam };

std::string_view to_string(Mode mode);
std::string_view to_string(OptimizerKind kind);

/// Hyperparameters of one training run. JSON keys mirror the field names.
struct RunConfig {
  Mode mode = Mode::Shared;
  double lambda_x = 1e-4;
  double lambda_y = 1e-4;
  double c = kDefaultRegularization;
  double b = 1.0;
  double learning_rate = 2.0;
  int epochs = 10000;
  std::optional<int> batch_size;  ///< empty means full batch
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  KernelConfig kernel_x;
  KernelConfig kernel_y;
  bool freeze_bandwidth = true;  ///< median bandwidths fixed after epoch 0
  double sigma_g = kDefaultGateNoise;
  bool standardize = true;  ///< centre columns and scale to unit norm before training

  /// Throws ContractError naming the offending field.
  void validate() const;
  void validate(Eigen::Index samples) const;
};

/// Parses a JSON object. Unknown keys are rejected unless `allow_unknown`.
RunConfig parse_run_config(std::string_view json_text, bool allow_unknown = false);
RunConfig load_run_config(const std::filesystem::path& path, bool allow_unknown = false);
std::string to_json(const RunConfig& cfg);

}  // namespace mmdufs
