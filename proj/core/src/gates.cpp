#include "mmdufs/gates.hpp"

#include "mmdufs/errors.hpp"
#include "mmdufs/io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <string>

namespace mmdufs {

namespace {

void check_sigma(double sigma_g) {
  if (!(sigma_g > 0.0)) throw ContractError("gate noise sigma_g must be positive");
}

}  // namespace

GateState::GateState(Eigen::Index features, double sigma_g, std::uint64_t seed)
    : GateState(Vector::Zero(features), sigma_g, seed) {}

GateState::GateState(Vector mu, double sigma_g, std::uint64_t seed)
    : mu_(std::move(mu)), sigma_g_(sigma_g), seed_(seed), rng_(seed) {
  check_sigma(sigma_g);
}

Vector GateState::draw_noise() {
  std::normal_distribution<double> normal(0.0, sigma_g_);
  Vector eps(mu_.size());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = normal(rng_);
  return eps;
}

Vector eval_gates(const GateState& state) {
  return (state.mu().array() + 0.5).max(0.0).min(1.0).matrix();
}

Vector sample_gates(GateState& state, bool train) {
  if (!train) return eval_gates(state);
  const Vector eps = state.draw_noise();
  return (state.mu().array() + eps.array() + 0.5).max(0.0).min(1.0).matrix();
}

Var gates_on_tape(Tape& tape, Var mu, const Vector& noise) {
  if (noise.size() != mu.rows() || mu.cols() != 1) {
    throw DimensionError("gates_on_tape: noise length does not match mu");
  }
  return tape.clamp01_shifted(tape.add(mu, tape.constant(noise)));
}

double expected_l0(const GateState& state) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    total += normal_cdf((0.5 + state.mu()(i)) / state.sigma_g());
  }
  return total;
}

Var expected_l0(Tape& tape, Var mu, double sigma_g) {
  check_sigma(sigma_g);
  return tape.sum(tape.normal_cdf(mu, 0.5, sigma_g));
}

Var apply_gates(Tape& tape, Var data, Var z) {
  if (z.cols() != 1 || z.rows() != data.cols()) {
    throw DimensionError("apply_gates: " + std::to_string(z.rows()) + " gates for " +
                         std::to_string(data.cols()) + " features");
  }
  return tape.broadcast_col_gate(data, z);
}

Matrix apply_gates(const Matrix& data, const Vector& z) {
  if (z.size() != data.cols()) {
    throw DimensionError("apply_gates: " + std::to_string(z.size()) + " gates for " +
                         std::to_string(data.cols()) + " features");
  }
  return data * z.asDiagonal();
}

std::vector<Eigen::Index> top_k_indices(const Vector& values, Eigen::Index k) {
  if (k < 0 || k > values.size()) {
    throw ContractError("top-k: k = " + std::to_string(k) + " exceeds " + std::to_string(values.size()) +
                        " features");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values(a) > values(b); });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

std::vector<Eigen::Index> select_features(const GateState& state, SelectionPolicy policy, Eigen::Index k) {
  if (policy == SelectionPolicy::TopK) return top_k_indices(state.mu(), k);
  const Vector z = eval_gates(state);
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z(i) >= 1.0 - 1e-6) out.push_back(i);
  }
  return out;
}

void write_gates_csv(const std::filesystem::path& path, const GateState& state) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot open " + path.string() + " for writing");
  out << "feature_id,mu,eval_gate\n";
  const Vector z = eval_gates(state);
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    out << i << ',' << state.mu()(i) << ',' << z(i) << '\n';
  }
}

GateState read_gates_csv(const std::filesystem::path& path, double sigma_g, std::uint64_t seed) {
  const CsvTable table = read_csv(path);
  if (table.values.cols() < 2) {
    throw IngestionError(path.string() + ": expected columns feature_id,mu,eval_gate");
  }
  Vector mu(table.values.rows());
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    const auto id = static_cast<Eigen::Index>(table.values(r, 0));
    if (id != r) {
      throw IngestionError(path.string() + ": line " + std::to_string(r + 2) + ": feature ids must be 0..p-1 in order");
    }
    mu(r) = table.values(r, 1);
  }
  return GateState(std::move(mu), sigma_g, seed);
}

}  // namespace mmdufs
