#include "mmdufs/graph.hpp"

#include "mmdufs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace mmdufs {

namespace {

void check_bandwidth(double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw ContractError("gaussian kernel: bandwidth must be a positive finite number, got " +
                        std::to_string(bandwidth));
  }
}

}  // namespace

Var gaussian_kernel(Tape& tape, Var data, double bandwidth) {
  check_bandwidth(bandwidth);
  if (data.rows() < 2) throw ContractError("gaussian kernel: need at least two rows");
  if (!data.value().allFinite()) throw InputError("gaussian kernel: data contains non-finite values");
  const Var sq = tape.pairwise_sq_dist(data);
  return tape.exp(tape.scale(sq, -1.0 / (2.0 * bandwidth * bandwidth)));
}

Matrix gaussian_kernel(const Matrix& data, double bandwidth) {
  Tape tape;
  return gaussian_kernel(tape, tape.constant(data), bandwidth).value();
}

double median_bandwidth(const Matrix& data) {
  if (data.rows() < 2) throw ContractError("median_bandwidth: need at least two rows");
  const Eigen::Index n = data.rows();
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (data.row(i) - data.row(j)).norm();
      if (d > 0.0) dists.push_back(d);
    }
  }
  if (dists.empty()) return 1.0;
  const std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid), dists.end());
  const double upper = dists[mid];
  if (dists.size() % 2 == 1) return upper;
  const double lower = *std::max_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

Var normalized_laplacian(Tape& tape, Var kernel) {
  const Var degrees = tape.row_sum(kernel);
  return tape.diag_rsqrt_sandwich(kernel, degrees);
}

Matrix normalized_laplacian(const Matrix& kernel) {
  Tape tape;
  return normalized_laplacian(tape, tape.constant(kernel)).value();
}

Var laplacian_from_data(Tape& tape, Var data, const KernelConfig& cfg, double* resolved, Var* degrees) {
  const double bw = cfg.bandwidth ? *cfg.bandwidth : median_bandwidth(data.value());
  if (resolved != nullptr) *resolved = bw;
  const Var k = gaussian_kernel(tape, data, bw);
  const Var d = tape.row_sum(k);
  if (degrees != nullptr) *degrees = d;
  if (!cfg.normalize) return k;
  return tape.diag_rsqrt_sandwich(k, d);
}

Matrix laplacian_from_data(const Matrix& data, const KernelConfig& cfg) {
  Tape tape;
  return laplacian_from_data(tape, tape.constant(data), cfg).value();
}

GraphPair build_graph_pair(Tape& tape, Var gated_x, Var gated_y, const KernelConfig& cfg_x,
                           const KernelConfig& cfg_y) {
  if (gated_x.rows() != gated_y.rows()) {
    throw DimensionError("build_graph_pair: modalities have " + std::to_string(gated_x.rows()) + " and " +
                         std::to_string(gated_y.rows()) + " rows");
  }
  GraphPair g;
  g.laplacian_x = laplacian_from_data(tape, gated_x, cfg_x, &g.bandwidth_x, &g.degrees_x);
  g.laplacian_y = laplacian_from_data(tape, gated_y, cfg_y, &g.bandwidth_y, &g.degrees_y);
  return g;
}

}  // namespace mmdufs
