#include "mmdufs/experiment.hpp"

#include "mmdufs/errors.hpp"
#include "mmdufs/io.hpp"
#include "mmdufs/operators.hpp"
#include "mmdufs/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <thread>

#include <json.hpp>

namespace mmdufs {

namespace {

const CubePreset kCube;

}  // namespace

std::vector<std::string> dataset_presets() {
  return {"gaussian", "gaussian+10", "gaussian+30", "gaussian+50", "tree", "cube"};
}

bool is_dataset_preset(const std::string& name) {
  const auto all = dataset_presets();
  return std::ranges::find(all, name) != all.end();
}

ModalPair make_dataset(const std::string& preset, std::uint64_t seed) {
  if (preset == "gaussian") return gen_gaussian_mixture(seed, 0);
  if (preset == "gaussian+10") return gen_gaussian_mixture(seed, 10);
  if (preset == "gaussian+30") return gen_gaussian_mixture(seed, 30);
  if (preset == "gaussian+50") return gen_gaussian_mixture(seed, 50);
  if (preset == "tree") return gen_tree(seed);
  if (preset == "cube") return gen_cube(seed, kCube.samples, kCube.l_s, kCube.l_a, kCube.l_b);
  throw ContractError("unknown dataset preset '" + preset + "'");
}

RunConfig preset_config(const std::string& preset) {
  RunConfig cfg;
  cfg.mode = Mode::Shared;
  cfg.learning_rate = 2.0;
  if (preset == "gaussian") {
    cfg.epochs = 10000;
    cfg.lambda_x = cfg.lambda_y = 1e-4;
    cfg.b = 1.0;
  } else if (preset == "gaussian+10") {
    cfg.epochs = 20000;
    cfg.lambda_x = 1e-8;
    cfg.lambda_y = 1e-6;
    cfg.b = 1.0;
  } else if (preset == "gaussian+30") {
    cfg.epochs = 40000;
    cfg.lambda_x = cfg.lambda_y = 1e-4;
    cfg.b = 1.0;
  } else if (preset == "gaussian+50") {
    cfg.epochs = 10000;
    cfg.lambda_x = 1e-2;
    cfg.lambda_y = 1e-3;
    cfg.b = 1e2;
  } else if (preset == "tree") {
    cfg.epochs = 2000;
    cfg.batch_size = 250;
    cfg.lambda_x = cfg.lambda_y = 3e-4;
    cfg.b = 1e2;
  } else {
    throw ContractError("no mmDUFS hyperparameters for preset '" + preset + "'");
  }
  return cfg;
}

RunConfig preset_differential_config(const std::string& preset) {
  RunConfig cfg;
  cfg.mode = Mode::Differential;
  if (preset.starts_with("gaussian")) {
    cfg.learning_rate = 1.0;
    cfg.epochs = 10000;
    cfg.lambda_x = cfg.lambda_y = 1e-3;
    cfg.c = 0.1;
    cfg.b = 0.1;
  } else if (preset == "tree") {
    cfg.learning_rate = 1.0;
    cfg.epochs = 2000;
    cfg.batch_size = 250;
    cfg.lambda_x = cfg.lambda_y = 1e-3;
    cfg.c = 0.1;
    cfg.b = 0.1;
  } else {
    throw ContractError("no differential hyperparameters for preset '" + preset + "'");
  }
  return cfg;
}

ExperimentSpec parse_experiment_spec(const std::string& json_text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ContractError(std::string("experiment config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ContractError("experiment config must be a JSON object");
  ExperimentSpec spec;
  try {
    if (j.contains("dataset")) spec.datasets = {j["dataset"].get<std::string>()};
    if (j.contains("datasets")) spec.datasets = j["datasets"].get<std::vector<std::string>>();
    if (j.contains("methods")) spec.methods = j["methods"].get<std::vector<std::string>>();
    if (j.contains("seeds")) spec.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("jobs")) spec.jobs = j["jobs"].get<int>();
    if (j.contains("epochs")) spec.epochs = j["epochs"].get<int>();
  } catch (const json::exception& e) {
    throw ContractError(std::string("experiment config: ") + e.what());
  }
  if (j.contains("train")) spec.config_override = parse_run_config(j["train"].dump());
  if (spec.datasets.empty()) throw ContractError("experiment config field 'datasets': at least one dataset required");
  for (const auto& d : spec.datasets) {
    if (!is_dataset_preset(d) || d == "cube") {
      throw ContractError("experiment config field 'datasets': unknown or unsupported preset '" + d + "'");
    }
  }
  for (const auto& m : spec.methods) {
    if (m != "mmDUFS" && !parse_baseline(m)) {
      throw ContractError("experiment config field 'methods': unknown method '" + m + "'");
    }
  }
  if (spec.seeds.empty()) throw ContractError("experiment config field 'seeds': at least one seed required");
  if (spec.epochs && *spec.epochs < 1) throw ContractError("experiment config field 'epochs': must be >= 1");
  return spec;
}

double regression_r2(const Vector& v, const Matrix& regressors) {
  if (regressors.rows() != v.size()) throw DimensionError("regression_r2: row mismatch");
  Matrix design(v.size(), regressors.cols() + 1);
  design << Vector::Ones(v.size()), regressors;
  const Vector coef = design.colPivHouseholderQr().solve(v);
  const double ss_res = (v - design * coef).squaredNorm();
  const double ss_tot = (v.array() - v.mean()).matrix().squaredNorm();
  if (ss_tot == 0.0) return 0.0;
  return 1.0 - ss_res / ss_tot;
}

CubeAnalysis analyze_cube(const ModalPair& cube, const CubePreset& preset, int modes) {
  if (cube.latent.cols() < 1 || cube.latent.rows() != cube.samples()) {
    throw ContractError("analyze_cube: pair carries no latent coordinates");
  }
  const KernelConfig kernel{.bandwidth = preset.bandwidth, .normalize = true};
  const Matrix lx = laplacian_from_data(cube.x, kernel);
  const Matrix ly = laplacian_from_data(cube.y, kernel);
  const Matrix p = shared_operator(lx, ly);

  const Eigen::Index n = cube.samples();
  Matrix cosines(n, 3);
  for (int l = 1; l <= 3; ++l) {
    cosines.col(l - 1) = (cube.latent.col(0).array() * (std::numbers::pi * l / preset.l_s)).cos().matrix();
  }

  CubeAnalysis out;
  const SymmetricEigen ep = eigendecompose_symmetric(p);
  const SymmetricEigen ex = eigendecompose_symmetric(lx);
  // Column 0 is the trivial degree-aligned vector.
  out.vectors_shared = ep.vectors.middleCols(1, modes);
  out.vectors_x = ex.vectors.middleCols(1, modes);
  for (int i = 0; i < modes; ++i) {
    out.r2_shared.push_back(regression_r2(out.vectors_shared.col(i), cosines));
    out.r2_x.push_back(regression_r2(out.vectors_x.col(i), cosines));
  }
  return out;
}

SelectionResult mmdufs_select(const ModalPair& pair, const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const TrainResult run = train(pair, cfg);
  const bool shared = cfg.mode == Mode::Shared;
  const IndexList& tx = shared ? pair.truth.shared_x : pair.truth.diff_x;
  const IndexList& ty = shared ? pair.truth.shared_y : pair.truth.diff_y;
  SelectionResult r;
  r.method = "mmDUFS";
  if (!tx.empty()) {
    r.selected_x = top_k_indices(run.gates_x.mu(), static_cast<Eigen::Index>(tx.size()));
    r.f1_x = f1_score(r.selected_x, tx);
  } else {
    r.selected_x = select_features(run.gates_x, SelectionPolicy::Converged);
  }
  if (!ty.empty()) {
    r.selected_y = top_k_indices(run.gates_y.mu(), static_cast<Eigen::Index>(ty.size()));
    r.f1_y = f1_score(r.selected_y, ty);
  } else {
    r.selected_y = select_features(run.gates_y, SelectionPolicy::Converged);
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  struct Job {
    std::string dataset;
    std::string method;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& d : spec.datasets) {
    for (const auto& m : spec.methods) {
      for (auto s : spec.seeds) jobs.push_back({d, m, s});
    }
  }

  ExperimentReport report;
  report.cells.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      ExperimentCell& cell = report.cells[i];
      cell.dataset = job.dataset;
      cell.method = job.method;
      cell.seed = job.seed;
      try {
        const ModalPair pair = make_dataset(job.dataset, job.seed);
        SelectionResult r;
        if (job.method == "mmDUFS") {
          RunConfig cfg = spec.config_override ? *spec.config_override : preset_config(job.dataset);
          cfg.seed = job.seed;
          if (spec.epochs) cfg.epochs = *spec.epochs;
          r = mmdufs_select(pair, cfg);
        } else {
          r = baseline_select(pair, *parse_baseline(job.method), static_cast<Eigen::Index>(pair.truth.shared_x.size()),
                              static_cast<Eigen::Index>(pair.truth.shared_y.size()));
        }
        cell.f1_x = r.f1_x.value_or(0.0);
        cell.f1_y = r.f1_y.value_or(0.0);
        cell.seconds = r.seconds;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };
  const int threads = std::clamp(spec.jobs, 1, static_cast<int>(std::max<std::size_t>(jobs.size(), 1)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return report;
}

std::optional<std::pair<double, double>> ExperimentReport::mean_f1(const std::string& dataset,
                                                                   const std::string& method) const {
  double sx = 0.0;
  double sy = 0.0;
  int count = 0;
  for (const auto& c : cells) {
    if (c.dataset != dataset || c.method != method || !c.error.empty()) continue;
    sx += c.f1_x;
    sy += c.f1_y;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return std::make_pair(sx / count, sy / count);
}

void ExperimentReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IngestionError(path.string() + ": cannot open for writing");
  out << "dataset,method,seed,f1_x,f1_y,seconds,error\n";
  for (const auto& c : cells) {
    std::string err = c.error;
    std::ranges::replace(err, ',', ';');
    std::ranges::replace(err, '\n', ' ');
    out << c.dataset << ',' << c.method << ',' << c.seed << ',' << format_double(c.f1_x) << ','
        << format_double(c.f1_y) << ',' << format_double(c.seconds) << ',' << err << '\n';
  }
}

void ExperimentReport::print_table(std::ostream& out) const {
  std::vector<std::string> datasets;
  std::vector<std::string> methods;
  for (const auto& c : cells) {
    if (std::ranges::find(datasets, c.dataset) == datasets.end()) datasets.push_back(c.dataset);
    if (std::ranges::find(methods, c.method) == methods.end()) methods.push_back(c.method);
  }
  out << std::left << std::setw(14) << "dataset" << std::setw(6) << "view";
  for (const auto& m : methods) out << std::right << std::setw(9) << m;
  out << '\n';
  for (const auto& d : datasets) {
    for (int view = 0; view < 2; ++view) {
      out << std::left << std::setw(14) << d << std::setw(6) << (view == 0 ? "X" : "Y");
      for (const auto& m : methods) {
        const auto mean = mean_f1(d, m);
        char buf[16];
        if (mean) {
          std::snprintf(buf, sizeof buf, "%.4f", view == 0 ? mean->first : mean->second);
        } else {
          std::snprintf(buf, sizeof buf, "%s", "fail");
        }
        out << std::right << std::setw(9) << buf;
      }
      out << '\n';
    }
  }
}

}  // namespace mmdufs
