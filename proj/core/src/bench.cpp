#include "mmdufs/bench.hpp"

#include "mmdufs/errors.hpp"
#include "mmdufs/gates.hpp"
#include "mmdufs/operators.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <set>

namespace mmdufs {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::ranges::transform(out, out.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

}  // namespace

std::string_view to_string(Baseline method) {
  switch (method) {
    case Baseline::MC: return "MC";
    case Baseline::MmKS: return "mmKS";
    case Baseline::MmKP: return "mmKP";
  }
  return "?";
}

std::optional<Baseline> parse_baseline(std::string_view name) {
  const std::string s = lower(name);
  if (s == "mc") return Baseline::MC;
  if (s == "mmks") return Baseline::MmKS;
  if (s == "mmkp") return Baseline::MmKP;
  return std::nullopt;
}

double f1_score(const IndexList& selected, const IndexList& truth) {
  if (truth.empty()) throw ContractError("f1: truth set is empty");
  const std::set<Eigen::Index> s(selected.begin(), selected.end());
  const std::set<Eigen::Index> t(truth.begin(), truth.end());
  std::size_t tp = 0;
  for (auto i : s) tp += t.contains(i) ? 1 : 0;
  const double fp = static_cast<double>(s.size() - tp);
  const double fn = static_cast<double>(t.size() - tp);
  const double tp2 = 2.0 * static_cast<double>(tp);
  return tp2 / (tp2 + fp + fn);
}

std::pair<Vector, Vector> baseline_scores(const ModalPair& pair, Baseline method, const KernelConfig& kernel) {
  pair.validate();
  Matrix op_x;
  Matrix op_y;
  if (method == Baseline::MC) {
    Matrix joint(pair.samples(), pair.x.cols() + pair.y.cols());
    joint << pair.x, pair.y;
    op_x = laplacian_from_data(joint, kernel);
    op_y = op_x;
  } else {
    const Matrix lx = laplacian_from_data(pair.x, kernel);
    const Matrix ly = laplacian_from_data(pair.y, kernel);
    op_x = method == Baseline::MmKS ? Matrix(lx + ly) : Matrix(lx * ly);
    op_y = op_x;
  }
  return {score_all_features(standardize_columns(pair.x), op_x), score_all_features(standardize_columns(pair.y), op_y)};
}

SelectionResult baseline_select(const ModalPair& pair, Baseline method, Eigen::Index k_x, Eigen::Index k_y,
                                const KernelConfig& kernel) {
  if (k_x < 0 || k_x > pair.x.cols()) throw ContractError("baseline: k_x out of range");
  if (k_y < 0 || k_y > pair.y.cols()) throw ContractError("baseline: k_y out of range");
  const auto start = std::chrono::steady_clock::now();
  const auto [sx, sy] = baseline_scores(pair, method, kernel);
  SelectionResult r;
  r.method = std::string(to_string(method));
  r.selected_x = top_k_indices(sx, k_x);
  r.selected_y = top_k_indices(sy, k_y);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!pair.truth.shared_x.empty()) r.f1_x = f1_score(r.selected_x, pair.truth.shared_x);
  if (!pair.truth.shared_y.empty()) r.f1_y = f1_score(r.selected_y, pair.truth.shared_y);
  return r;
}

}  // namespace mmdufs
