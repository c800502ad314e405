#include "mmdufs/trainer.hpp"

#include "mmdufs/errors.hpp"
#include "mmdufs/graph.hpp"
#include "mmdufs/io.hpp"
#include "mmdufs/operators.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace mmdufs {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) { return splitmix64(seed ^ splitmix64(stream)); }

// (1/n) Tr[D^T op D] = (1/n) sum(D o (op D)).
Var trace_score(Tape& tape, Var gated, Var op) {
  const double n = static_cast<double>(gated.rows());
  return tape.scale(tape.sum(tape.hadamard(gated, tape.matmul(op, gated))), 1.0 / n);
}

double topk_f1(const Vector& mu, const IndexList& truth) {
  if (truth.empty()) return 0.0;
  const auto picked = top_k_indices(mu, static_cast<Eigen::Index>(truth.size()));
  const std::set<Eigen::Index> t(truth.begin(), truth.end());
  std::size_t tp = 0;
  for (auto i : picked) tp += t.contains(i) ? 1 : 0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(picked.size() + truth.size());
}

int count_open(const GateState& state) {
  return static_cast<int>(select_features(state, SelectionPolicy::Converged).size());
}

class Optimizer {
 public:
  Optimizer(const RunConfig& cfg, Eigen::Index p) : cfg_(cfg), m_(Vector::Zero(p)), v_(Vector::Zero(p)) {}

  void step(Vector& mu, const Vector& grad) {
    if (cfg_.optimizer == OptimizerKind::Sgd) {
      mu -= cfg_.learning_rate * grad;
      return;
    }
    ++t_;
    m_ = cfg_.adam_beta1 * m_ + (1.0 - cfg_.adam_beta1) * grad;
    v_ = cfg_.adam_beta2 * v_ + (1.0 - cfg_.adam_beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg_.adam_beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.adam_beta2, t_);
    mu.array() -= cfg_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.adam_epsilon);
  }

 private:
  const RunConfig& cfg_;
  Vector m_;
  Vector v_;
  int t_ = 0;
};

Matrix take_rows(const Matrix& data, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), data.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = data.row(rows[r]);
  return out;
}

// Every epoch allocates and frees dozens of n x n temporaries. glibc serves
// blocks above its mmap threshold straight from the kernel, which makes the
// training loop syscall-bound; keep them on the heap instead.
void keep_large_blocks_on_heap() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    return true;
  }();
  (void)once;
#endif
}

std::string describe(const EpochRecord& r) {
  return "epoch " + std::to_string(r.epoch) + " loss " + format_double(r.loss) + " score_x " +
         format_double(r.score_x) + " score_y " + format_double(r.score_y) + " open " + std::to_string(r.open_x) +
         "/" + std::to_string(r.open_y);
}

}  // namespace

LossTerms shared_loss(Tape& tape, Var gated_x, Var gated_y, Var p, Var mu_x, Var mu_y, double sigma_g,
                      double lambda_x, double lambda_y) {
  if (gated_x.rows() != gated_y.rows() || p.rows() != gated_x.rows() || p.cols() != p.rows()) {
    throw DimensionError("shared_loss: operator and gated inputs disagree on n");
  }
  LossTerms t;
  t.score_x = trace_score(tape, gated_x, p);
  t.score_y = trace_score(tape, gated_y, p);
  t.reg_x = expected_l0(tape, mu_x, sigma_g);
  t.reg_y = expected_l0(tape, mu_y, sigma_g);
  const Var scores = tape.add(t.score_x, t.score_y);
  const Var reg = tape.add(tape.scale(t.reg_x, lambda_x), tape.scale(t.reg_y, lambda_y));
  t.loss = tape.sub(reg, scores);
  return t;
}

LossTerms differential_loss(Tape& tape, Var gated, Var q, Var mu, double sigma_g, double lambda) {
  if (q.rows() != gated.rows() || q.cols() != q.rows()) {
    throw DimensionError("differential_loss: operator and gated input disagree on n");
  }
  LossTerms t;
  t.score_x = trace_score(tape, gated, q);
  t.reg_x = expected_l0(tape, mu, sigma_g);
  t.loss = tape.sub(tape.scale(t.reg_x, lambda), t.score_x);
  return t;
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IngestionError(path.string() + ": cannot open for writing");
  const bool with_f1 = !records.empty() && records.front().f1_x.has_value();
  out << "epoch,loss,score_x,score_y,reg_x,reg_y,open_x,open_y";
  if (with_f1) out << ",f1_x,f1_y";
  out << '\n';
  for (const auto& r : records) {
    out << r.epoch << ',' << format_double(r.loss) << ',' << format_double(r.score_x) << ','
        << format_double(r.score_y) << ',' << format_double(r.reg_x) << ',' << format_double(r.reg_y) << ','
        << r.open_x << ',' << r.open_y;
    if (with_f1) out << ',' << format_double(r.f1_x.value_or(0.0)) << ',' << format_double(r.f1_y.value_or(0.0));
    out << '\n';
  }
}

TrainResult train(const ModalPair& pair, const RunConfig& cfg, const std::optional<GroundTruth>& truth) {
  pair.validate();
  const Eigen::Index n = pair.samples();
  cfg.validate(n);
  keep_large_blocks_on_heap();

  const Matrix x = cfg.standardize ? unit_norm_columns(pair.x) : pair.x;
  const Matrix y = cfg.standardize ? unit_norm_columns(pair.y) : pair.y;

  TrainResult result;
  result.gates_x = GateState(x.cols(), cfg.sigma_g, stream_seed(cfg.seed, 1));
  result.gates_y = GateState(y.cols(), cfg.sigma_g, stream_seed(cfg.seed, 2));
  std::mt19937_64 batch_rng(stream_seed(cfg.seed, 3));
  Optimizer opt_x(cfg, x.cols());
  Optimizer opt_y(cfg, y.cols());

  KernelConfig kx = cfg.kernel_x;
  KernelConfig ky = cfg.kernel_y;
  const Eigen::Index batch = cfg.batch_size ? *cfg.batch_size : n;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  const IndexList* truth_x = nullptr;
  const IndexList* truth_y = nullptr;
  if (truth) {
    truth_x = cfg.mode == Mode::Shared ? &truth->shared_x : &truth->diff_x;
    truth_y = cfg.mode == Mode::Shared ? &truth->shared_y : &truth->diff_y;
  }

  result.log.records.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    try {
      Matrix xb;
      Matrix yb;
      if (batch < n) {
        for (Eigen::Index i = 0; i < batch; ++i) {
          std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
          std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(batch_rng))]);
        }
        std::vector<Eigen::Index> rows(order.begin(), order.begin() + batch);
        std::sort(rows.begin(), rows.end());
        xb = take_rows(x, rows);
        yb = take_rows(y, rows);
      }
      const Matrix& xs = batch < n ? xb : x;
      const Matrix& ys = batch < n ? yb : y;

      const Vector noise_x = result.gates_x.draw_noise();
      const Vector noise_y = result.gates_y.draw_noise();

      Tape tape;
      const Var mu_x = tape.leaf(result.gates_x.mu(), true);
      const Var mu_y = tape.leaf(result.gates_y.mu(), true);
      const Var gx = apply_gates(tape, tape.constant(xs), gates_on_tape(tape, mu_x, noise_x));
      const Var gy = apply_gates(tape, tape.constant(ys), gates_on_tape(tape, mu_y, noise_y));
      GraphPair graphs = build_graph_pair(tape, gx, gy, kx, ky);
      if (epoch == 0 && cfg.freeze_bandwidth) {
        kx.bandwidth = graphs.bandwidth_x;
        ky.bandwidth = graphs.bandwidth_y;
      }
      result.bandwidth_x = graphs.bandwidth_x;
      result.bandwidth_y = graphs.bandwidth_y;

      LossTerms terms;
      if (cfg.mode == Mode::Shared) {
        const Var p = shared_operator(tape, graphs.laplacian_x, graphs.laplacian_y, cfg.b);
        terms = shared_loss(tape, gx, gy, p, mu_x, mu_y, cfg.sigma_g, cfg.lambda_x, cfg.lambda_y);
      } else {
        const Var fixed_ly = tape.constant(graphs.laplacian_y.value());
        const Var fixed_lx = tape.constant(graphs.laplacian_x.value());
        const Var qx = differential_operator(tape, graphs.laplacian_x, fixed_ly, cfg.c, cfg.b);
        const Var qy = differential_operator(tape, graphs.laplacian_y, fixed_lx, cfg.c, cfg.b);
        const LossTerms tx = differential_loss(tape, gx, qx, mu_x, cfg.sigma_g, cfg.lambda_x);
        const LossTerms ty = differential_loss(tape, gy, qy, mu_y, cfg.sigma_g, cfg.lambda_y);
        terms.loss = tape.add(tx.loss, ty.loss);
        terms.score_x = tx.score_x;
        terms.score_y = ty.score_x;
        terms.reg_x = tx.reg_x;
        terms.reg_y = ty.reg_x;
      }

      const Gradients grads = tape.backward(terms.loss);
      opt_x.step(result.gates_x.mu(), grads.at(mu_x.id()));
      opt_y.step(result.gates_y.mu(), grads.at(mu_y.id()));
      if (!result.gates_x.mu().allFinite() || !result.gates_y.mu().allFinite()) {
        throw NumericalError("gate parameters became non-finite after the optimizer step");
      }

      rec.loss = terms.loss.scalar();
      rec.score_x = terms.score_x.scalar();
      rec.score_y = terms.score_y.scalar();
      rec.reg_x = terms.reg_x.scalar();
      rec.reg_y = terms.reg_y.scalar();
    } catch (const NumericalError& e) {
      std::string msg = "training aborted at epoch " + std::to_string(epoch) + ": " + e.what();
      if (!result.log.records.empty()) msg += "; last finite record: " + describe(result.log.records.back());
      throw NumericalError(msg);
    }
    rec.open_x = count_open(result.gates_x);
    rec.open_y = count_open(result.gates_y);
    if (truth) {
      rec.f1_x = topk_f1(result.gates_x.mu(), *truth_x);
      rec.f1_y = topk_f1(result.gates_y.mu(), *truth_y);
    }
    result.log.records.push_back(rec);
  }
  return result;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int e = -6; e <= 2; ++e) grid.push_back(std::pow(10.0, e));
  return grid;
}

TuneResult warmup_tune(const ModalPair& pair, const RunConfig& base, const std::vector<double>& grid,
                       int warmup_epochs, int jobs) {
  if (grid.empty()) throw ContractError("warmup_tune: lambda grid is empty");
  if (warmup_epochs < 1) throw ContractError("warmup_tune: warm-up epochs must be >= 1");
  for (double l : grid) {
    if (!(l >= 0.0)) throw ContractError("warmup_tune: grid values must be non-negative");
  }

  const Matrix x = base.standardize ? unit_norm_columns(pair.x) : pair.x;
  const Matrix y = base.standardize ? unit_norm_columns(pair.y) : pair.y;
  const double n = static_cast<double>(pair.samples());

  auto evaluate = [&](double lambda) {
    RunConfig cfg = base;
    cfg.lambda_x = cfg.lambda_y = lambda;
    cfg.epochs = warmup_epochs;
    const TrainResult run = train(pair, cfg);

    TuneRow row;
    row.lambda = lambda;
    row.open_x = count_open(run.gates_x);
    row.open_y = count_open(run.gates_y);
    const Matrix gx = apply_gates(x, eval_gates(run.gates_x));
    const Matrix gy = apply_gates(y, eval_gates(run.gates_y));
    KernelConfig kx = base.kernel_x;
    KernelConfig ky = base.kernel_y;
    kx.bandwidth = run.bandwidth_x;
    ky.bandwidth = run.bandwidth_y;
    const Matrix lx = laplacian_from_data(gx, kx);
    const Matrix ly = laplacian_from_data(gy, ky);
    const double d = row.open_x;
    const double m = row.open_y;
    auto trace_of = [](const Matrix& data, const Matrix& op) { return (data.array() * (op * data).array()).sum(); };
    if (base.mode == Mode::Shared) {
      const Matrix p = shared_operator(lx, ly, base.b);
      const double tx = trace_of(gx, p);
      const double ty = trace_of(gy, p);
      row.score_x = m > 0 ? tx / (2.0 * n * m) : 0.0;
      row.score_y = d > 0 ? ty / (2.0 * n * d) : 0.0;
    } else {
      const Matrix qx = differential_operator(lx, ly, base.c, base.b);
      const Matrix qy = differential_operator(ly, lx, base.c, base.b);
      row.score_x = d > 0 ? trace_of(gx, qx) / (d * n) : 0.0;
      row.score_y = m > 0 ? trace_of(gy, qy) / (m * n) : 0.0;
    }
    row.score = row.score_x + row.score_y;
    return row;
  };

  TuneResult result;
  result.rows.resize(grid.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        result.rows[i] = evaluate(grid[i]);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, static_cast<int>(grid.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::size_t best = 0;
  for (std::size_t i = 1; i < result.rows.size(); ++i) {
    const auto& r = result.rows[i];
    const auto& b = result.rows[best];
    if (r.score > b.score || (r.score == b.score && r.lambda < b.lambda)) best = i;
  }
  result.lambda_x = result.lambda_y = result.rows[best].lambda;
  return result;
}

}  // namespace mmdufs
