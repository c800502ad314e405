#include "mmdufs/datagen.hpp"

#include "mmdufs/errors.hpp"
#include "mmdufs/io.hpp"
#include "mmdufs/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace mmdufs {

namespace {

IndexList iota_list(Eigen::Index begin, Eigen::Index end) {
  IndexList out(static_cast<std::size_t>(end - begin));
  std::iota(out.begin(), out.end(), begin);
  return out;
}

void fill_normal(Matrix& m, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = normal(rng);
  }
}

// Informative block: rows in `members` get N(mu_j, 1) on columns [c0, c0 + width).
void plant_cluster(Matrix& m, const std::vector<bool>& members, Eigen::Index c0, Eigen::Index width,
                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> centre(2.0, 4.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index j = c0; j < c0 + width; ++j) {
    const double mu = centre(rng);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (members[static_cast<std::size_t>(i)]) m(i, j) = mu + normal(rng);
    }
  }
}

void check_indices(const IndexList& idx, Eigen::Index bound, const char* what) {
  for (auto i : idx) {
    if (i < 0 || i >= bound) {
      throw ContractError(std::string(what) + ": index " + std::to_string(i) + " out of range");
    }
  }
}

}  // namespace

void ModalPair::validate() const {
  if (x.rows() != y.rows()) {
    throw DimensionError("modalities must share the sample count: " + std::to_string(x.rows()) + " vs " +
                         std::to_string(y.rows()));
  }
  check_indices(truth.shared_x, x.cols(), "truth_shared_x");
  check_indices(truth.diff_x, x.cols(), "truth_diff_x");
  check_indices(truth.shared_y, y.cols(), "truth_shared_y");
  check_indices(truth.diff_y, y.cols(), "truth_diff_y");
}

ModalPair gen_gaussian_mixture(std::uint64_t seed, int extra_noise_features) {
  if (extra_noise_features < 0) throw ContractError("extra noise feature count must be non-negative");
  constexpr Eigen::Index n = 260;
  std::mt19937_64 rng(seed);

  ModalPair pair;
  pair.x.resize(n, 130 + extra_noise_features);
  pair.y.resize(n, 90 + extra_noise_features);
  fill_normal(pair.x, rng);
  fill_normal(pair.y, rng);

  std::vector<bool> c1(n), c2(n), c3(n), c4(n);
  pair.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto s = static_cast<int>(i % 3);
    const bool in3 = (i / 3) % 2 == 0;
    const bool in4 = (i / 6) % 2 == 0;
    const auto k = static_cast<std::size_t>(i);
    c1[k] = s == 1;
    c2[k] = s == 2;
    c3[k] = in3;
    c4[k] = in4;
    pair.labels[k] = 4 * s + 2 * static_cast<int>(in3) + static_cast<int>(in4);
  }

  plant_cluster(pair.x, c1, 0, 20, rng);
  plant_cluster(pair.x, c2, 20, 10, rng);
  plant_cluster(pair.x, c3, 30, 40, rng);
  plant_cluster(pair.y, c1, 0, 10, rng);
  plant_cluster(pair.y, c2, 10, 10, rng);
  plant_cluster(pair.y, c4, 20, 40, rng);

  pair.truth.shared_x = iota_list(0, 30);
  pair.truth.diff_x = iota_list(30, 70);
  pair.truth.shared_y = iota_list(0, 20);
  pair.truth.diff_y = iota_list(20, 60);
  return pair;
}

TreeCounts gen_tree_counts(std::uint64_t seed, const TreeParams& p) {
  if (p.samples < 10 || p.shared_features < 1 || p.diff_features < 0 || p.noise_features < 0) {
    throw ContractError("gen_tree: invalid parameters");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(p.samples);
  const auto count = static_cast<std::size_t>(n);

  // Latent tree: trunk (root -> branch point), branch A and branch B, each of
  // unit length. Node order: root, branch point, tip A, tip B.
  enum Segment { Trunk = 0, BranchA = 1, BranchB = 2 };
  TreeCounts out;
  out.segments.resize(count);
  out.positions.resize(count);
  out.groups.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double u = 3.0 * unit(rng);
    out.segments[k] = std::min(2, static_cast<int>(u));
    out.positions[k] = u - out.segments[k];
    const bool coin = unit(rng) < 0.5;
    switch (out.segments[k]) {
      case Trunk: out.groups[k] = out.positions[k] < 0.5 ? 5 : 6; break;
      case BranchA: out.groups[k] = coin ? 1 : 2; break;
      default: out.groups[k] = coin ? 3 : 4; break;
    }
  }

  // Shared block: each feature is up by the fold change at one tree node and
  // at baseline elsewhere; log-means are interpolated along each segment.
  const int total_shared = 2 * p.shared_features;
  const double log_fold = std::log(p.fold_change);
  Matrix node_profile = Matrix::Zero(total_shared, 4);
  std::uniform_int_distribution<int> node(0, 3);
  for (int j = 0; j < total_shared; ++j) node_profile(j, node(rng)) = log_fold;
  out.shared.resize(n, total_shared);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    int from = 0;
    int to = 1;
    if (out.segments[k] == BranchA) { from = 1; to = 2; }
    if (out.segments[k] == BranchB) { from = 1; to = 3; }
    const double t = out.positions[k];
    for (int j = 0; j < total_shared; ++j) {
      const double lm = (1.0 - t) * node_profile(j, from) + t * node_profile(j, to);
      out.shared(i, j) = sample_negative_binomial(rng, p.base_mean * std::exp(lm), p.shared_dispersion);
    }
  }

  auto differential_block = [&](int low_group) {
    Matrix block(n, p.diff_features);
    for (Eigen::Index j = 0; j < block.cols(); ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double mean = out.groups[static_cast<std::size_t>(i)] == low_group ? p.diff_low_mean : p.diff_high_mean;
        block(i, j) = sample_negative_binomial(rng, mean, p.diff_dispersion);
      }
    }
    return block;
  };
  out.diff_x = differential_block(1);
  out.diff_y = differential_block(3);
  return out;
}

ModalPair gen_tree(std::uint64_t seed, const TreeParams& p) {
  const TreeCounts counts = gen_tree_counts(seed, p);
  const Eigen::Index n = counts.shared.rows();
  std::mt19937_64 rng(seed ^ 0x5eed5eedULL);

  auto finish = [&](const Matrix& shared, const Matrix& diff) {
    Matrix raw(n, shared.cols() + diff.cols());
    raw << shared, diff;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double total = raw.row(i).sum();
      if (total > 0.0) raw.row(i) *= p.library_size / total;
    }
    const Matrix z = standardize_columns(raw.array().log1p().matrix());
    Matrix noise(n, p.noise_features);
    fill_normal(noise, rng);
    Matrix out(n, z.cols() + noise.cols());
    out << z, noise;
    return out;
  };

  ModalPair pair;
  pair.x = finish(counts.shared.leftCols(p.shared_features), counts.diff_x);
  pair.y = finish(counts.shared.rightCols(p.shared_features), counts.diff_y);
  pair.labels = counts.groups;
  pair.latent.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    pair.latent(i, 0) = counts.segments[static_cast<std::size_t>(i)];
    pair.latent(i, 1) = counts.positions[static_cast<std::size_t>(i)];
  }
  pair.truth.shared_x = iota_list(0, p.shared_features);
  pair.truth.shared_y = iota_list(0, p.shared_features);
  pair.truth.diff_x = iota_list(p.shared_features, p.shared_features + p.diff_features);
  pair.truth.diff_y = pair.truth.diff_x;
  return pair;
}

ModalPair gen_cube(std::uint64_t seed, int n, double l_s, double l_a, double l_b) {
  if (n < 10) throw ContractError("gen_cube: need n >= 10");
  if (!(l_s > 0.0 && l_a > 0.0 && l_b > 0.0)) throw ContractError("gen_cube: side lengths must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ModalPair pair;
  pair.latent.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    pair.latent(i, 0) = l_s * unit(rng);
    pair.latent(i, 1) = l_a * unit(rng);
    pair.latent(i, 2) = l_b * unit(rng);
  }
  pair.y.resize(n, 2);
  pair.y << pair.latent.col(0), pair.latent.col(1);
  pair.x.resize(n, 2);
  pair.x << pair.latent.col(0), pair.latent.col(2);
  return pair;
}

ModalPair inject_noise(const ModalPair& pair, double sigma, NoiseTarget target, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ContractError("inject_noise: sigma must be non-negative");
  ModalPair out = pair;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);

  auto perturb = [&](Matrix& m, const IndexList& a, const IndexList& b) {
    std::set<Eigen::Index> informative(a.begin(), a.end());
    informative.insert(b.begin(), b.end());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (target == NoiseTarget::NonInformative && informative.contains(j)) continue;
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) += normal(rng);
    }
  };
  perturb(out.x, pair.truth.shared_x, pair.truth.diff_x);
  perturb(out.y, pair.truth.shared_y, pair.truth.diff_y);
  return out;
}

ModalPair ingest(const std::filesystem::path& path_x, const std::filesystem::path& path_y,
                 const IngestOptions& options) {
  ModalPair pair;
  pair.x = read_csv(path_x).values;
  pair.y = read_csv(path_y).values;
  if (pair.x.rows() != pair.y.rows()) {
    throw IngestionError(path_y.string() + ": has " + std::to_string(pair.y.rows()) + " rows but " +
                         path_x.string() + " has " + std::to_string(pair.x.rows()));
  }
  if (options.truth_shared_x) pair.truth.shared_x = read_index_file(*options.truth_shared_x);
  if (options.truth_shared_y) pair.truth.shared_y = read_index_file(*options.truth_shared_y);
  if (options.truth_diff_x) pair.truth.diff_x = read_index_file(*options.truth_diff_x);
  if (options.truth_diff_y) pair.truth.diff_y = read_index_file(*options.truth_diff_y);
  if (options.standardize) {
    pair.x = standardize_columns(pair.x);
    pair.y = standardize_columns(pair.y);
  }
  try {
    pair.validate();
  } catch (const Error& e) {
    throw IngestionError(std::string("truth files: ") + e.what());
  }
  return pair;
}

void write_pair(const std::filesystem::path& dir, const ModalPair& pair) {
  std::filesystem::create_directories(dir);
  write_csv(dir / "X.csv", pair.x);
  write_csv(dir / "Y.csv", pair.y);
  if (!pair.truth.shared_x.empty()) write_index_file(dir / "truth_shared_x.txt", pair.truth.shared_x);
  if (!pair.truth.shared_y.empty()) write_index_file(dir / "truth_shared_y.txt", pair.truth.shared_y);
  if (!pair.truth.diff_x.empty()) write_index_file(dir / "truth_diff_x.txt", pair.truth.diff_x);
  if (!pair.truth.diff_y.empty()) write_index_file(dir / "truth_diff_y.txt", pair.truth.diff_y);
  if (pair.latent.size() > 0) write_csv(dir / "latent.csv", pair.latent);
}

IndexList truth_by_std(const Matrix& data, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ContractError("truth_by_std: fraction must lie in (0, 1]");
  const Eigen::Index p = data.cols();
  const auto k = static_cast<Eigen::Index>(std::ceil(fraction * static_cast<double>(p)));
  const Matrix centred = data.rowwise() - data.colwise().mean();
  const Vector sd = (centred.colwise().squaredNorm() / static_cast<double>(data.rows())).array().sqrt();
  IndexList order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return sd(a) > sd(b); });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace mmdufs
