#pragma once

#include "mmdufs/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace mmdufs {

inline constexpr double kDefaultGateNoise = 0.5;

/// Stochastic gates z_i = clamp01(0.5 + mu_i + eps_i), eps_i ~ N(0, sigma_g^2).
///
/// sigma_g stays fixed for the lifetime of the state. Sampling draws from a
/// generator owned by the state, so a run is reproducible from its seed.
class GateState {
 public:
  GateState() = default;
  /// mu starts at zero: every gate opens with probability Phi(0.5 / sigma_g).
  GateState(Eigen::Index features, double sigma_g, std::uint64_t seed);
  GateState(Vector mu, double sigma_g, std::uint64_t seed);

  [[nodiscard]] const Vector& mu() const { return mu_; }
  Vector& mu() { return mu_; }
  [[nodiscard]] double sigma_g() const { return sigma_g_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] Eigen::Index size() const { return mu_.size(); }

  /// One draw of eps ~ N(0, sigma_g^2) per feature.
  Vector draw_noise();

 private:
  Vector mu_;
  double sigma_g_ = kDefaultGateNoise;
  std::uint64_t seed_ = 0;
  std::mt19937_64 rng_;
};

/// Train mode draws fresh noise; eval mode returns clamp01(0.5 + mu).
Vector sample_gates(GateState& state, bool train);
Vector eval_gates(const GateState& state);

/// On-tape gates from a trainable mu leaf and a fixed noise draw.
Var gates_on_tape(Tape& tape, Var mu, const Vector& noise);

/// Sum_i Phi((0.5 + mu_i) / sigma_g), the expected number of open gates.
double expected_l0(const GateState& state);
Var expected_l0(Tape& tape, Var mu, double sigma_g);

/// Column j of data scaled by z_j.
Var apply_gates(Tape& tape, Var data, Var z);
Matrix apply_gates(const Matrix& data, const Vector& z);

enum class SelectionPolicy { Converged, TopK };

/// Converged: gates whose eval value reached 1 (within 1e-6).
/// TopK: indices of the k largest mu, ties broken by lower index.
std::vector<Eigen::Index> select_features(const GateState& state, SelectionPolicy policy, Eigen::Index k = 0);
std::vector<Eigen::Index> top_k_indices(const Vector& values, Eigen::Index k);

/// CSV with header `feature_id,mu,eval_gate`.
void write_gates_csv(const std::filesystem::path& path, const GateState& state);
/// Reads mu back; sigma_g and seed are supplied by the caller.
GateState read_gates_csv(const std::filesystem::path& path, double sigma_g = kDefaultGateNoise,
                         std::uint64_t seed = 0);

}  // namespace mmdufs
