#pragma once

#include "mmdufs/config.hpp"
#include "mmdufs/datagen.hpp"
#include "mmdufs/gates.hpp"
#include "mmdufs/tensor.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace mmdufs {

/// Loss and its parts, all on the tape. Scores are the positive trace terms
/// (1/n) Tr[D^T op D]; regularizers are the unscaled expected L0 counts.
struct LossTerms {
  Var loss;
  Var score_x;
  Var score_y;
  Var reg_x;
  Var reg_y;
};

/// -(1/n)Tr[X^T P X] - (1/n)Tr[Y^T P Y] + lambda_x E|z_x|_0 + lambda_y E|z_y|_0.
LossTerms shared_loss(Tape& tape, Var gated_x, Var gated_y, Var p, Var mu_x, Var mu_y, double sigma_g,
                      double lambda_x, double lambda_y);

/// -(1/n)Tr[D^T Q D] + lambda E|z|_0. Only the *_x members are set.
LossTerms differential_loss(Tape& tape, Var gated, Var q, Var mu, double sigma_g, double lambda);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double score_x = 0.0;
  double score_y = 0.0;
  double reg_x = 0.0;
  double reg_y = 0.0;
  int open_x = 0;  ///< converged-open gates after the step
  int open_y = 0;
  std::optional<double> f1_x;
  std::optional<double> f1_y;
};

struct TrainLog {
  std::vector<EpochRecord> records;

  void write_csv(const std::filesystem::path& path) const;
};

struct TrainResult {
  GateState gates_x;
  GateState gates_y;
  TrainLog log;
  double bandwidth_x = 0.0;
  double bandwidth_y = 0.0;
};

/// Runs the gate optimization. When `truth` is given each record carries the
/// top-k F1 of the mode's informative sets (k = truth size).
///
/// Differential mode trains X gates against Q_x and Y gates against Q_y; the
/// Laplacian of the other modality enters each operator as a constant.
TrainResult train(const ModalPair& pair, const RunConfig& cfg, const std::optional<GroundTruth>& truth = std::nullopt);

struct TuneRow {
  double lambda = 0.0;
  double score = 0.0;  ///< S_shared, or S_x + S_y in differential mode
  double score_x = 0.0;
  double score_y = 0.0;
  int open_x = 0;
  int open_y = 0;
};

struct TuneResult {
  double lambda_x = 0.0;
  double lambda_y = 0.0;
  std::vector<TuneRow> rows;  ///< grid order
};

/// Short-run grid search over lambda = lambda_x = lambda_y. Scores use
/// eval-mode gates on the full data. Highest score wins; ties go to the
/// smaller lambda. `jobs` grid points run concurrently.
TuneResult warmup_tune(const ModalPair& pair, const RunConfig& base, const std::vector<double>& grid,
                       int warmup_epochs = 1000, int jobs = 1);

/// The default grid 1e-6, 1e-5, ..., 1e2.
std::vector<double> default_lambda_grid();

}  // namespace mmdufs
