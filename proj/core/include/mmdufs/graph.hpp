#pragma once

#include "mmdufs/tensor.hpp"

#include <optional>

namespace mmdufs {

/// Kernel settings for one modality. An empty bandwidth selects the median
/// heuristic on the (gated) data.
struct KernelConfig {
  std::optional<double> bandwidth;
  bool normalize = true;
};

/// Laplacians of both modalities plus the degree vectors they were built from.
struct GraphPair {
  Var laplacian_x;
  Var laplacian_y;
  Var degrees_x;
  Var degrees_y;
  double bandwidth_x = 0.0;
  double bandwidth_y = 0.0;
};

/// K_ij = exp(-|row_i - row_j|^2 / (2 sigma^2)), on-tape.
Var gaussian_kernel(Tape& tape, Var data, double bandwidth);
Matrix gaussian_kernel(const Matrix& data, double bandwidth);

/// Median of the nonzero pairwise Euclidean distances between rows; 1 when
/// every pair coincides.
double median_bandwidth(const Matrix& data);

/// D^-1/2 K D^-1/2 with D the row sums of K.
Var normalized_laplacian(Tape& tape, Var kernel);
Matrix normalized_laplacian(const Matrix& kernel);

/// Laplacian of a data matrix under `cfg`. The resolved bandwidth is written
/// to `resolved` when non-null. Bandwidths never carry a gradient.
Var laplacian_from_data(Tape& tape, Var data, const KernelConfig& cfg, double* resolved = nullptr,
                        Var* degrees = nullptr);
Matrix laplacian_from_data(const Matrix& data, const KernelConfig& cfg);

GraphPair build_graph_pair(Tape& tape, Var gated_x, Var gated_y, const KernelConfig& cfg_x,
                           const KernelConfig& cfg_y);

}  // namespace mmdufs
