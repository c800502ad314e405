#include "mmdufs/bench.hpp"
#include "mmdufs/config.hpp"
#include "mmdufs/datagen.hpp"
#include "mmdufs/errors.hpp"
#include "mmdufs/experiment.hpp"
#include "mmdufs/gates.hpp"
#include "mmdufs/io.hpp"
#include "mmdufs/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mmdufs;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool force = false;
  int jobs = 0;
};

std::optional<std::uint64_t> resolve_seed(const Common& c) {
  if (c.seed) return c.seed;
  if (const char* env = std::getenv("MMDUFS_SEED"); env != nullptr && *env != '\0') {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError(std::string("MMDUFS_SEED is not an integer: ") + env);
    }
  }
  return std::nullopt;
}

int resolve_jobs(const Common& c) {
  if (c.jobs > 0) return c.jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(path.string() + ": cannot open config");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ": invalid JSON: " + e.what());
  }
}

fs::path require_out(const Common& c) {
  if (c.out.empty()) throw UsageError("--out DIR is required");
  return c.out;
}

// Refuses to clobber existing artifacts unless --force.
void prepare_out(const fs::path& dir, const std::vector<std::string>& files, bool force) {
  fs::create_directories(dir);
  if (force) return;
  for (const auto& f : files) {
    if (fs::exists(dir / f)) {
      throw UsageError((dir / f).string() + " already exists (pass --force to overwrite)");
    }
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IngestionError(path.string() + ": cannot open for writing");
  out << j.dump(2) << '\n';
}

fs::path relative_to(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

// "data": {"preset": NAME, "seed": N} or {"x": PATH, "y": PATH, truth_*: PATH, "standardize": bool}
ModalPair load_data(const json& doc, const fs::path& base) {
  if (!doc.contains("data") || !doc["data"].is_object()) throw UsageError("config field 'data': object required");
  const json& d = doc["data"];
  if (d.contains("preset")) {
    const auto preset = d["preset"].get<std::string>();
    if (!is_dataset_preset(preset)) throw UsageError("config field 'data.preset': unknown preset '" + preset + "'");
    return make_dataset(preset, d.value("seed", std::uint64_t{0}));
  }
  if (!d.contains("x") || !d.contains("y")) throw UsageError("config field 'data': needs 'preset' or 'x' and 'y'");
  IngestOptions opt;
  auto truth = [&](const char* key, std::optional<fs::path>& slot) {
    if (d.contains(key)) slot = relative_to(base, d[key].get<std::string>());
  };
  truth("truth_shared_x", opt.truth_shared_x);
  truth("truth_shared_y", opt.truth_shared_y);
  truth("truth_diff_x", opt.truth_diff_x);
  truth("truth_diff_y", opt.truth_diff_y);
  opt.standardize = d.value("standardize", false);
  return ingest(relative_to(base, d["x"].get<std::string>()), relative_to(base, d["y"].get<std::string>()), opt);
}

RunConfig load_train_config(const json& doc, const Common& c) {
  RunConfig cfg = doc.contains("train") ? parse_run_config(doc["train"].dump()) : RunConfig{};
  if (auto s = resolve_seed(c)) cfg.seed = *s;
  return cfg;
}

json manifest(const std::string& command, const Common& c, const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  if (!c.config.empty()) m["config"] = fs::absolute(c.config).string();
  if (auto s = resolve_seed(c)) m["seed"] = *s;
  m["outputs"] = outputs;
  m["version"] = "0.1.0";
  return m;
}

std::string join(const IndexList& idx) {
  std::string s;
  for (std::size_t i = 0; i < idx.size(); ++i) s += (i ? " " : "") + std::to_string(idx[i]);
  return s;
}

// ---------------------------------------------------------------------------

int cmd_generate(const Common& c, const std::string& preset) {
  if (!is_dataset_preset(preset)) throw UsageError("unknown preset '" + preset + "'");
  const fs::path out = require_out(c);
  const std::uint64_t seed = resolve_seed(c).value_or(0);
  const ModalPair pair = make_dataset(preset, seed);
  std::vector<std::string> files = {"X.csv", "Y.csv", "manifest.json"};
  if (!pair.truth.shared_x.empty()) files.insert(files.end(), {"truth_shared_x.txt", "truth_shared_y.txt"});
  if (!pair.truth.diff_x.empty()) files.insert(files.end(), {"truth_diff_x.txt", "truth_diff_y.txt"});
  if (pair.latent.size() > 0) files.emplace_back("latent.csv");
  if (!pair.labels.empty()) files.emplace_back("labels.txt");
  prepare_out(out, files, c.force);

  write_pair(out, pair);
  if (!pair.labels.empty()) {
    std::ofstream lab(out / "labels.txt");
    for (int l : pair.labels) lab << l << '\n';
  }
  json m = manifest("generate", c, files);
  m["preset"] = preset;
  m["seed"] = seed;
  m["shapes"] = {{"x", {pair.x.rows(), pair.x.cols()}}, {"y", {pair.y.rows(), pair.y.cols()}}};
  write_json(out / "manifest.json", m);
  std::cout << "generated " << preset << " (seed " << seed << "): X " << pair.x.rows() << "x" << pair.x.cols()
            << ", Y " << pair.y.rows() << "x" << pair.y.cols() << " -> " << out.string() << '\n';
  return 0;
}

int cmd_train(const Common& c) {
  if (c.config.empty()) throw UsageError("--config PATH is required");
  const json doc = read_json(c.config);
  const fs::path base = fs::path(c.config).parent_path();
  const RunConfig cfg = load_train_config(doc, c);
  const ModalPair pair = load_data(doc, base);
  const fs::path out = require_out(c);
  const std::vector<std::string> files = {"gates_x.csv", "gates_y.csv", "train_log.csv", "selection.json",
                                          "manifest.json"};
  prepare_out(out, files, c.force);

  std::optional<GroundTruth> truth;
  if (!pair.truth.empty()) truth = pair.truth;
  const TrainResult run = train(pair, cfg, truth);
  write_gates_csv(out / "gates_x.csv", run.gates_x);
  write_gates_csv(out / "gates_y.csv", run.gates_y);
  run.log.write_csv(out / "train_log.csv");

  json sel;
  sel["policy"] = "converged";
  sel["selected_x"] = select_features(run.gates_x, SelectionPolicy::Converged);
  sel["selected_y"] = select_features(run.gates_y, SelectionPolicy::Converged);
  const bool shared = cfg.mode == Mode::Shared;
  const IndexList& tx = shared ? pair.truth.shared_x : pair.truth.diff_x;
  const IndexList& ty = shared ? pair.truth.shared_y : pair.truth.diff_y;
  if (!tx.empty() && !ty.empty()) {
    const auto kx = top_k_indices(run.gates_x.mu(), static_cast<Eigen::Index>(tx.size()));
    const auto ky = top_k_indices(run.gates_y.mu(), static_cast<Eigen::Index>(ty.size()));
    sel["topk_x"] = kx;
    sel["topk_y"] = ky;
    sel["f1_x"] = f1_score(kx, tx);
    sel["f1_y"] = f1_score(ky, ty);
    std::cout << "top-k F1: X " << format_double(f1_score(kx, tx)) << ", Y " << format_double(f1_score(ky, ty))
              << '\n';
  }
  sel["bandwidth_x"] = run.bandwidth_x;
  sel["bandwidth_y"] = run.bandwidth_y;
  write_json(out / "selection.json", sel);

  json m = manifest("train", c, files);
  m["seed"] = cfg.seed;
  m["train"] = json::parse(to_json(cfg));
  write_json(out / "manifest.json", m);
  std::cout << "trained " << cfg.epochs << " epochs (" << to_string(cfg.mode) << "); open gates X "
            << run.log.records.back().open_x << ", Y " << run.log.records.back().open_y << '\n';
  return 0;
}

int cmd_tune(const Common& c) {
  if (c.config.empty()) throw UsageError("--config PATH is required");
  const json doc = read_json(c.config);
  const fs::path base = fs::path(c.config).parent_path();
  const RunConfig cfg = load_train_config(doc, c);
  const ModalPair pair = load_data(doc, base);
  const auto grid = doc.contains("grid") ? doc["grid"].get<std::vector<double>>() : default_lambda_grid();
  const int warmup = doc.value("warmup_epochs", 1000);
  const fs::path out = require_out(c);
  const std::vector<std::string> files = {"lambda_grid.csv", "tune.json", "manifest.json"};
  prepare_out(out, files, c.force);

  const TuneResult r = warmup_tune(pair, cfg, grid, warmup, resolve_jobs(c));
  std::ofstream csv(out / "lambda_grid.csv");
  csv << "lambda,score,score_x,score_y,open_x,open_y\n";
  for (const auto& row : r.rows) {
    csv << format_double(row.lambda) << ',' << format_double(row.score) << ',' << format_double(row.score_x) << ','
        << format_double(row.score_y) << ',' << row.open_x << ',' << row.open_y << '\n';
  }
  write_json(out / "tune.json", {{"lambda_x", r.lambda_x}, {"lambda_y", r.lambda_y}});
  json m = manifest("tune", c, files);
  m["seed"] = cfg.seed;
  write_json(out / "manifest.json", m);
  std::cout << "best lambda " << format_double(r.lambda_x) << '\n';
  return 0;
}

int cmd_select(const Common& c, const std::string& gx, const std::string& gy, const std::string& policy, int kx,
               int ky) {
  if (gx.empty() || gy.empty()) throw UsageError("--gates-x and --gates-y are required");
  const fs::path out = require_out(c);
  prepare_out(out, {"selection.json"}, c.force);
  const GateState sx = read_gates_csv(gx);
  const GateState sy = read_gates_csv(gy);
  json sel;
  sel["policy"] = policy;
  if (policy == "converged") {
    sel["selected_x"] = select_features(sx, SelectionPolicy::Converged);
    sel["selected_y"] = select_features(sy, SelectionPolicy::Converged);
  } else if (policy == "topk") {
    if (kx < 0 || ky < 0) throw UsageError("--k-x and --k-y are required with --policy topk");
    sel["selected_x"] = select_features(sx, SelectionPolicy::TopK, kx);
    sel["selected_y"] = select_features(sy, SelectionPolicy::TopK, ky);
  } else {
    throw UsageError("--policy must be converged or topk");
  }
  write_json(out / "selection.json", sel);
  std::cout << "selected " << sel["selected_x"].size() << " X and " << sel["selected_y"].size() << " Y features\n";
  return 0;
}

int cmd_baseline(const Common& c) {
  if (c.config.empty()) throw UsageError("--config PATH is required");
  const json doc = read_json(c.config);
  const fs::path base = fs::path(c.config).parent_path();
  const ModalPair pair = load_data(doc, base);
  std::vector<std::string> methods = {"MC", "mmKS", "mmKP"};
  if (doc.contains("method")) methods = {doc["method"].get<std::string>()};
  if (doc.contains("methods")) methods = doc["methods"].get<std::vector<std::string>>();
  const auto kx = doc.value("k_x", static_cast<Eigen::Index>(pair.truth.shared_x.size()));
  const auto ky = doc.value("k_y", static_cast<Eigen::Index>(pair.truth.shared_y.size()));
  if (kx <= 0 || ky <= 0) throw UsageError("config fields 'k_x'/'k_y': required when the data has no shared truth");
  const fs::path out = require_out(c);
  prepare_out(out, {"baseline.csv", "manifest.json"}, c.force);

  std::ofstream csv(out / "baseline.csv");
  csv << "method,f1_x,f1_y,seconds,selected_x,selected_y\n";
  for (const auto& name : methods) {
    const auto method = parse_baseline(name);
    if (!method) throw UsageError("config field 'method': unknown baseline '" + name + "'");
    const SelectionResult r = baseline_select(pair, *method, kx, ky);
    csv << r.method << ',' << (r.f1_x ? format_double(*r.f1_x) : "") << ',' << (r.f1_y ? format_double(*r.f1_y) : "")
        << ',' << format_double(r.seconds) << ',' << join(r.selected_x) << ',' << join(r.selected_y) << '\n';
    std::cout << r.method;
    if (r.f1_x && r.f1_y) std::cout << ": F1 X " << format_double(*r.f1_x) << ", Y " << format_double(*r.f1_y);
    std::cout << '\n';
  }
  write_json(out / "manifest.json", manifest("baseline", c, {"baseline.csv", "manifest.json"}));
  return 0;
}

int cmd_evaluate(const Common& c) {
  if (c.config.empty()) throw UsageError("--config PATH is required");
  const json doc = read_json(c.config);
  const fs::path base = fs::path(c.config).parent_path();
  IndexList sx;
  IndexList sy;
  if (doc.contains("selection")) {
    const json sel = read_json(relative_to(base, doc["selection"].get<std::string>()));
    sx = sel.at("selected_x").get<IndexList>();
    sy = sel.at("selected_y").get<IndexList>();
  } else {
    if (!doc.contains("selected_x") || !doc.contains("selected_y")) {
      throw UsageError("config fields 'selected_x'/'selected_y' (or 'selection') required");
    }
    sx = read_index_file(relative_to(base, doc["selected_x"].get<std::string>()));
    sy = read_index_file(relative_to(base, doc["selected_y"].get<std::string>()));
  }
  if (!doc.contains("truth_x") || !doc.contains("truth_y")) throw UsageError("config fields 'truth_x'/'truth_y' required");
  const IndexList tx = read_index_file(relative_to(base, doc["truth_x"].get<std::string>()));
  const IndexList ty = read_index_file(relative_to(base, doc["truth_y"].get<std::string>()));
  const std::string method = doc.value("method", std::string("selection"));
  const fs::path out = require_out(c);
  prepare_out(out, {"evaluation.csv"}, c.force);
  const double fx = f1_score(sx, tx);
  const double fy = f1_score(sy, ty);
  std::ofstream csv(out / "evaluation.csv");
  csv << "method,f1_x,f1_y\n" << method << ',' << format_double(fx) << ',' << format_double(fy) << '\n';
  std::cout << method << ": F1 X " << format_double(fx) << ", Y " << format_double(fy) << '\n';
  return 0;
}

int cmd_reproduce(const Common& c, const std::string& table, std::vector<std::string> datasets,
                  std::vector<std::uint64_t> seeds, std::optional<int> epochs) {
  if (epochs && *epochs < 1) throw UsageError("--epochs must be >= 1");
  const fs::path out = require_out(c);
  if (auto s = resolve_seed(c); s && seeds.empty()) seeds = {*s};

  if (table == "gaussian-table" || table == "tree-table") {
    ExperimentSpec spec;
    if (table == "gaussian-table") {
      spec.datasets = datasets.empty() ? std::vector<std::string>{"gaussian", "gaussian+10", "gaussian+30", "gaussian+50"}
                                       : datasets;
      spec.seeds = seeds.empty() ? std::vector<std::uint64_t>{0} : seeds;
    } else {
      spec.datasets = {"tree"};
      spec.seeds = seeds.empty() ? std::vector<std::uint64_t>{0, 1, 2} : seeds;
    }
    for (const auto& d : spec.datasets) {
      if (!is_dataset_preset(d) || d == "cube") throw UsageError("unknown dataset '" + d + "'");
    }
    spec.jobs = resolve_jobs(c);
    spec.epochs = epochs;
    const std::string name = table + ".csv";
    prepare_out(out, {name}, c.force);
    const ExperimentReport report = run_experiment(spec);
    report.write_csv(out / name);
    report.print_table(std::cout);
    for (const auto& cell : report.cells) {
      if (!cell.error.empty()) std::cerr << cell.dataset << '/' << cell.method << '/' << cell.seed << ": " << cell.error << '\n';
    }
    return 0;
  }

  if (table == "cube-figure") {
    prepare_out(out, {"cube_eigenvectors.csv", "cube_r2.csv"}, c.force);
    const CubePreset preset;
    const std::uint64_t seed = seeds.empty() ? 0 : seeds.front();
    const ModalPair cube = make_dataset("cube", seed);
    const CubeAnalysis a = analyze_cube(cube, preset);
    Matrix table_out(cube.samples(), 3 + a.vectors_shared.cols() + a.vectors_x.cols());
    table_out << cube.latent, a.vectors_shared, a.vectors_x;
    write_csv(out / "cube_eigenvectors.csv", table_out,
              {"theta_s", "theta_a", "theta_b", "shared_1", "shared_2", "shared_3", "x_1", "x_2", "x_3"});
    std::ofstream r2(out / "cube_r2.csv");
    r2 << "mode,r2_shared,r2_x\n";
    for (std::size_t i = 0; i < a.r2_shared.size(); ++i) {
      r2 << i + 1 << ',' << format_double(a.r2_shared[i]) << ',' << format_double(a.r2_x[i]) << '\n';
      std::cout << "mode " << i + 1 << ": R2 shared " << format_double(a.r2_shared[i]) << ", L_x "
                << format_double(a.r2_x[i]) << '\n';
    }
    return 0;
  }

  if (table == "lambda-grid") {
    prepare_out(out, {"lambda_grid.csv"}, c.force);
    const std::uint64_t seed = seeds.empty() ? 0 : seeds.front();
    const ModalPair pair = make_dataset("gaussian", seed);
    RunConfig cfg = preset_config("gaussian");
    cfg.seed = seed;
    if (epochs) cfg.epochs = *epochs;
    const auto grid = default_lambda_grid();
    const TuneResult tuned = warmup_tune(pair, cfg, grid, std::min(1000, cfg.epochs), resolve_jobs(c));
    std::ofstream csv(out / "lambda_grid.csv");
    csv << "lambda,S_shared,f1_x,f1_y,open_x,open_y,chosen\n";
    for (const auto& row : tuned.rows) {
      RunConfig full = cfg;
      full.lambda_x = full.lambda_y = row.lambda;
      const SelectionResult r = mmdufs_select(pair, full);
      csv << format_double(row.lambda) << ',' << format_double(row.score) << ',' << format_double(r.f1_x.value_or(0))
          << ',' << format_double(r.f1_y.value_or(0)) << ',' << row.open_x << ',' << row.open_y << ','
          << (row.lambda == tuned.lambda_x ? 1 : 0) << '\n';
      std::cout << "lambda " << format_double(row.lambda) << ": S_shared " << format_double(row.score) << ", F1 X "
                << format_double(r.f1_x.value_or(0)) << ", Y " << format_double(r.f1_y.value_or(0)) << '\n';
    }
    std::cout << "warm-up choice: " << format_double(tuned.lambda_x) << '\n';
    return 0;
  }

  throw UsageError("unknown table '" + table + "' (gaussian-table, tree-table, cube-figure, lambda-grid)");
}

void add_common(CLI::App* app, Common& c, bool config, bool jobs) {
  if (config) app->add_option("--config", c.config, "JSON config")->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "output directory");
  app->add_option("--seed", c.seed, "seed override (falls back to MMDUFS_SEED)");
  app->add_flag("--force", c.force, "overwrite existing artifacts");
  if (jobs) app->add_option("--jobs", c.jobs, "worker threads (default: logical cores)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmdufs: multi-modal differentiable unsupervised feature selection"};
  app.require_subcommand(1);
  Common common;

  std::string preset;
  auto* generate = app.add_subcommand("generate", "write a synthetic dataset");
  generate->add_option("--preset,preset", preset, "gaussian, gaussian+10, gaussian+30, gaussian+50, tree, cube")->required();
  add_common(generate, common, false, false);

  auto* train_cmd = app.add_subcommand("train", "train gates");
  add_common(train_cmd, common, true, false);

  auto* tune = app.add_subcommand("tune", "warm-up grid search over lambda");
  add_common(tune, common, true, true);

  std::string gates_x;
  std::string gates_y;
  std::string policy = "converged";
  int k_x = -1;
  int k_y = -1;
  auto* select = app.add_subcommand("select", "select features from gate files");
  select->add_option("--gates-x", gates_x)->check(CLI::ExistingFile);
  select->add_option("--gates-y", gates_y)->check(CLI::ExistingFile);
  select->add_option("--policy", policy, "converged or topk");
  select->add_option("--k-x", k_x);
  select->add_option("--k-y", k_y);
  add_common(select, common, false, false);

  auto* baseline = app.add_subcommand("baseline", "run MC / mmKS / mmKP baselines");
  add_common(baseline, common, true, false);

  auto* evaluate = app.add_subcommand("evaluate", "F1 of a selection against truth");
  add_common(evaluate, common, true, false);

  std::string table;
  std::vector<std::string> datasets;
  std::vector<std::uint64_t> seeds;
  auto* reproduce = app.add_subcommand("reproduce", "end-to-end reproduction of a result table");
  reproduce->add_option("table", table, "gaussian-table, tree-table, cube-figure, lambda-grid")->required();
  reproduce->add_option("--datasets", datasets, "restrict gaussian-table rows");
  reproduce->add_option("--seeds", seeds, "generator/training seeds");
  std::optional<int> epochs;
  reproduce->add_option("--epochs", epochs, "override the preset epoch count");
  add_common(reproduce, common, false, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*generate) return cmd_generate(common, preset);
    if (*train_cmd) return cmd_train(common);
    if (*tune) return cmd_tune(common);
    if (*select) return cmd_select(common, gates_x, gates_y, policy, k_x, k_y);
    if (*baseline) return cmd_baseline(common);
    if (*evaluate) return cmd_evaluate(common);
    if (*reproduce) return cmd_reproduce(common, table, datasets, seeds, epochs);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 1;
  } catch (const SingularityError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 1;
  } catch (const DegeneracyError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
