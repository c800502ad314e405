#pragma once

#include "mmdufs/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mmdufs {

using IndexList = std::vector<Eigen::Index>;

/// Informative-feature index sets. Shared and differential sets are disjoint
/// within a modality.
struct GroundTruth {
  IndexList shared_x;
  IndexList shared_y;
  IndexList diff_x;
  IndexList diff_y;

  [[nodiscard]] bool empty() const {
    return shared_x.empty() && shared_y.empty() && diff_x.empty() && diff_y.empty();
  }
};

/// Two registered modalities over the same n samples.
struct ModalPair {
  Matrix x;
  Matrix y;
  GroundTruth truth;
  std::vector<int> labels;  ///< optional per-sample group ids
  Matrix latent;            ///< optional latent coordinates (cube: theta_s, theta_a, theta_b)

  [[nodiscard]] Eigen::Index samples() const { return x.rows(); }
  void validate() const;
};

/// Three-cluster-per-modality Gaussian mixture, 260 samples.
///
/// Every sample carries a shared label (cluster 1, cluster 2 or neither) and
/// two independent modality-specific memberships (cluster 3 in X, cluster 4
/// in Y). Informative entries are N(mu_j, 1) with mu_j ~ U(2, 4); everything
/// else is N(0, 1).
///
/// X columns: [0,20) cluster 1, [20,30) cluster 2, [30,70) cluster 3, then noise.
/// Y columns: [0,10) cluster 1, [10,20) cluster 2, [20,60) cluster 4, then noise.
ModalPair gen_gaussian_mixture(std::uint64_t seed, int extra_noise_features = 0);

struct TreeParams {
  int samples = 1000;
  int shared_features = 50;  ///< per modality
  int diff_features = 50;
  int noise_features = 200;
  double base_mean = 10.0;
  double fold_change = 3.0;
  double shared_dispersion = 0.02;
  double diff_low_mean = 4.0;
  double diff_high_mean = 20.0;
  double diff_dispersion = 0.1;
  double library_size = 1e4;
};

/// Raw negative-binomial counts of the tree generator before normalization.
struct TreeCounts {
  Matrix shared;  ///< n x 2*shared_features; the first half goes to X
  Matrix diff_x;
  Matrix diff_y;
  std::vector<int> groups;     ///< 1..6
  std::vector<int> segments;   ///< 0 trunk, 1 branch A, 2 branch B
  std::vector<double> positions;  ///< arc position within the segment, [0,1)
};

TreeCounts gen_tree_counts(std::uint64_t seed, const TreeParams& params = {});

/// Group ids used in ModalPair::labels by gen_tree: 1..6 for G1..G6.
/// Trunk: G5 then G6. Branch A holds G1 and G2 mixed; branch B holds G3 and G4.
ModalPair gen_tree(std::uint64_t seed, const TreeParams& params = {});

/// Uniform samples on [0,l_s] x [0,l_a] x [0,l_b]. Y = (theta_s, theta_a),
/// X = (theta_s, theta_b); latent keeps all three.
ModalPair gen_cube(std::uint64_t seed, int n, double l_s, double l_a, double l_b);

enum class NoiseTarget { All, NonInformative };

/// Adds i.i.d. N(0, sigma^2) to the targeted entries.
ModalPair inject_noise(const ModalPair& pair, double sigma, NoiseTarget target, std::uint64_t seed);

struct IngestOptions {
  std::optional<std::filesystem::path> truth_shared_x;
  std::optional<std::filesystem::path> truth_shared_y;
  std::optional<std::filesystem::path> truth_diff_x;
  std::optional<std::filesystem::path> truth_diff_y;
  bool standardize = false;
};

ModalPair ingest(const std::filesystem::path& path_x, const std::filesystem::path& path_y,
                 const IngestOptions& options = {});

/// Writes X.csv, Y.csv and the non-empty truth files into `dir`.
void write_pair(const std::filesystem::path& dir, const ModalPair& pair);

/// Indices of the top `fraction` of columns ranked by standard deviation
/// (the image-matrix ground-truth rule).
IndexList truth_by_std(const Matrix& data, double fraction = 0.25);

/// Draw from a negative binomial with the given mean and dispersion
/// (variance mean + dispersion * mean^2), as a Gamma-Poisson mixture.
template <typename Rng>
double sample_negative_binomial(Rng& rng, double mean, double dispersion);

}  // namespace mmdufs

#include <random>

namespace mmdufs {

template <typename Rng>
double sample_negative_binomial(Rng& rng, double mean, double dispersion) {
  std::gamma_distribution<double> gamma(1.0 / dispersion, dispersion * mean);
  const double rate = gamma(rng);
  if (rate <= 0.0) return 0.0;
  std::poisson_distribution<long long> poisson(rate);
  return static_cast<double>(poisson(rng));
}

}  // namespace mmdufs
