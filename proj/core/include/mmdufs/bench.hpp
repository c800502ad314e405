#pragma once

#include "mmdufs/datagen.hpp"
#include "mmdufs/graph.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace mmdufs {

enum class Baseline { MC, MmKS, MmKP };

std::string_view to_string(Baseline method);
/// Accepts "MC", "mmKS", "mmKP" (case-insensitive).
std::optional<Baseline> parse_baseline(std::string_view name);

struct SelectionResult {
  std::string method;
  IndexList selected_x;
  IndexList selected_y;
  std::optional<double> f1_x;
  std::optional<double> f1_y;
  double seconds = 0.0;
};

/// 2TP / (2TP + FP + FN). Duplicates in `selected` count once.
double f1_score(const IndexList& selected, const IndexList& truth);

/// Scores every z-scored feature of each modality by the method's operator
/// and keeps the k highest per modality (ties to the lower index).
/// MC builds one graph from [X|Y]; mmKS uses L_x + L_y; mmKP uses L_x L_y.
/// F1 is filled in against the shared truth sets when present.
SelectionResult baseline_select(const ModalPair& pair, Baseline method, Eigen::Index k_x, Eigen::Index k_y,
                                const KernelConfig& kernel = {});

/// Per-feature scores under the method's operator, one vector per modality.
std::pair<Vector, Vector> baseline_scores(const ModalPair& pair, Baseline method, const KernelConfig& kernel = {});

}  // namespace mmdufs
