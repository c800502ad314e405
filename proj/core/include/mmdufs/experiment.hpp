#pragma once

#include "mmdufs/bench.hpp"
#include "mmdufs/config.hpp"
#include "mmdufs/datagen.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace mmdufs {

/// Dataset presets: gaussian, gaussian+10, gaussian+30, gaussian+50, tree, cube.
std::vector<std::string> dataset_presets();
bool is_dataset_preset(const std::string& name);
ModalPair make_dataset(const std::string& preset, std::uint64_t seed);

/// mmDUFS hyperparameters for a dataset preset (shared mode).
RunConfig preset_config(const std::string& preset);
/// Differential-mode hyperparameters where a preset has them.
RunConfig preset_differential_config(const std::string& preset);

struct ExperimentSpec {
  std::vector<std::string> datasets;
  std::vector<std::string> methods = {"MC", "mmKS", "mmKP", "mmDUFS"};
  std::vector<std::uint64_t> seeds = {0};
  std::optional<RunConfig> config_override;  ///< replaces the preset hyperparameters
  std::optional<int> epochs;                 ///< overrides the epoch count only
  int jobs = 1;
};

ExperimentSpec parse_experiment_spec(const std::string& json_text);

struct ExperimentCell {
  std::string dataset;
  std::string method;
  std::uint64_t seed = 0;
  double f1_x = 0.0;
  double f1_y = 0.0;
  double seconds = 0.0;
  std::string error;  ///< non-empty when the run failed
};

struct ExperimentReport {
  std::vector<ExperimentCell> cells;

  /// Mean over successful seeds; nullopt if every seed failed or the cell is absent.
  [[nodiscard]] std::optional<std::pair<double, double>> mean_f1(const std::string& dataset,
                                                                 const std::string& method) const;
  void write_csv(const std::filesystem::path& path) const;
  /// Aligned text table: one row per (dataset, modality), one column per method.
  void print_table(std::ostream& out) const;
};

/// Runs every (dataset, method, seed) cell. A failing cell records its error
/// and the rest continue.
ExperimentReport run_experiment(const ExperimentSpec& spec);

/// Cube preset: side lengths and a fixed kernel bandwidth for both views.
struct CubePreset {
  int samples = 1000;
  double l_s = 1.0;
  double l_a = 0.8;
  double l_b = 0.8;
  double bandwidth = 0.2;
};

/// R^2 of least-squares regression of v onto [1 | regressors].
double regression_r2(const Vector& v, const Matrix& regressors);

/// Leading non-trivial eigenvectors of P_shared and of L_x alone, each
/// regressed onto cos(pi l theta_s / l_s), l = 1..3.
struct CubeAnalysis {
  std::vector<double> r2_shared;
  std::vector<double> r2_x;
  Matrix vectors_shared;  ///< n x modes
  Matrix vectors_x;
};

CubeAnalysis analyze_cube(const ModalPair& cube, const CubePreset& preset = {}, int modes = 3);

/// mmDUFS selection for one pair: top-k by mu with k = shared truth size.
SelectionResult mmdufs_select(const ModalPair& pair, const RunConfig& cfg);

}  // namespace mmdufs
