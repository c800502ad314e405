#include "mmdufs/config.hpp"

#include "mmdufs/errors.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mmdufs {

namespace {

using nlohmann::json;

const std::set<std::string> kKnownKeys = {
    "mode",        "lambda_x",    "lambda_y",   "c",           "b",         "learning_rate",
    "epochs",      "batch_size",  "optimizer",  "adam_beta1",  "adam_beta2", "adam_epsilon",
    "seed",        "bandwidth_x", "bandwidth_y", "normalize",  "sigma_g",   "standardize", "freeze_bandwidth",
};

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw ContractError("config field '" + field + "': " + what);
}

double get_number(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) bad(key, "expected a number");
  return j[key].get<double>();
}

std::optional<double> get_bandwidth(const json& j, const std::string& key) {
  if (!j.contains(key)) return std::nullopt;
  const json& v = j[key];
  if (v.is_string() && v.get<std::string>() == "median") return std::nullopt;
  if (!v.is_number()) bad(key, "expected a number or \"median\"");
  return v.get<double>();
}

}  // namespace

std::string_view to_string(Mode mode) { return mode == Mode::Shared ? "shared" : "differential"; }

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "adam"; }

void RunConfig::validate() const {
  if (!(lambda_x >= 0.0)) bad("lambda_x", "must be non-negative");
  if (!(lambda_y >= 0.0)) bad("lambda_y", "must be non-negative");
  if (!(c > 0.0)) bad("c", "must be positive");
  if (!(b > 0.0)) bad("b", "must be positive");
  if (!(learning_rate > 0.0)) bad("learning_rate", "must be positive");
  if (epochs < 1) bad("epochs", "must be >= 1");
  if (batch_size && *batch_size < 2) bad("batch_size", "must be >= 2 or \"full\"");
  if (!(sigma_g > 0.0)) bad("sigma_g", "must be positive");
  if (kernel_x.bandwidth && !(*kernel_x.bandwidth > 0.0)) bad("bandwidth_x", "must be positive");
  if (kernel_y.bandwidth && !(*kernel_y.bandwidth > 0.0)) bad("bandwidth_y", "must be positive");
  if (optimizer == OptimizerKind::Adam) {
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) bad("adam_beta1", "must lie in [0, 1)");
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) bad("adam_beta2", "must lie in [0, 1)");
    if (!(adam_epsilon > 0.0)) bad("adam_epsilon", "must be positive");
  }
}

void RunConfig::validate(Eigen::Index samples) const {
  validate();
  if (batch_size && *batch_size > samples) {
    bad("batch_size", std::to_string(*batch_size) + " exceeds the " + std::to_string(samples) + " samples");
  }
}

RunConfig parse_run_config(std::string_view json_text, bool allow_unknown) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ContractError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ContractError("config must be a JSON object");
  if (!allow_unknown) {
    for (const auto& [key, _] : j.items()) {
      if (!kKnownKeys.contains(key)) bad(key, "unknown field");
    }
  }

  RunConfig cfg;
  if (j.contains("mode")) {
    const auto m = j["mode"].is_string() ? j["mode"].get<std::string>() : "";
    if (m == "shared") {
      cfg.mode = Mode::Shared;
    } else if (m == "differential") {
      cfg.mode = Mode::Differential;
    } else {
      bad("mode", "expected \"shared\" or \"differential\"");
    }
  }
  if (j.contains("optimizer")) {
    const auto o = j["optimizer"].is_string() ? j["optimizer"].get<std::string>() : "";
    if (o == "sgd") {
      cfg.optimizer = OptimizerKind::Sgd;
    } else if (o == "adam") {
      cfg.optimizer = OptimizerKind::Adam;
    } else {
      bad("optimizer", "expected \"sgd\" or \"adam\"");
    }
  }
  cfg.lambda_x = get_number(j, "lambda_x", cfg.lambda_x);
  cfg.lambda_y = get_number(j, "lambda_y", cfg.lambda_y);
  cfg.c = get_number(j, "c", cfg.c);
  cfg.b = get_number(j, "b", cfg.b);
  cfg.learning_rate = get_number(j, "learning_rate", cfg.learning_rate);
  cfg.adam_beta1 = get_number(j, "adam_beta1", cfg.adam_beta1);
  cfg.adam_beta2 = get_number(j, "adam_beta2", cfg.adam_beta2);
  cfg.adam_epsilon = get_number(j, "adam_epsilon", cfg.adam_epsilon);
  cfg.sigma_g = get_number(j, "sigma_g", cfg.sigma_g);
  if (j.contains("epochs")) {
    if (!j["epochs"].is_number_integer()) bad("epochs", "expected an integer");
    cfg.epochs = j["epochs"].get<int>();
  }
  if (j.contains("batch_size")) {
    const json& v = j["batch_size"];
    if (v.is_string() && v.get<std::string>() == "full") {
      cfg.batch_size.reset();
    } else if (v.is_number_integer()) {
      cfg.batch_size = v.get<int>();
    } else {
      bad("batch_size", "expected an integer or \"full\"");
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer()) bad("seed", "expected an integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  cfg.kernel_x.bandwidth = get_bandwidth(j, "bandwidth_x");
  cfg.kernel_y.bandwidth = get_bandwidth(j, "bandwidth_y");
  if (j.contains("normalize")) {
    if (!j["normalize"].is_boolean()) bad("normalize", "expected true or false");
    cfg.kernel_x.normalize = cfg.kernel_y.normalize = j["normalize"].get<bool>();
  }
  if (j.contains("freeze_bandwidth")) {
    if (!j["freeze_bandwidth"].is_boolean()) bad("freeze_bandwidth", "expected true or false");
    cfg.freeze_bandwidth = j["freeze_bandwidth"].get<bool>();
  }
  if (j.contains("standardize")) {
    if (!j["standardize"].is_boolean()) bad("standardize", "expected true or false");
    cfg.standardize = j["standardize"].get<bool>();
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, bool allow_unknown) {
  std::ifstream in(path);
  if (!in) throw ContractError(path.string() + ": cannot open config");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), allow_unknown);
}

std::string to_json(const RunConfig& cfg) {
  json j;
  j["mode"] = to_string(cfg.mode);
  j["lambda_x"] = cfg.lambda_x;
  j["lambda_y"] = cfg.lambda_y;
  j["c"] = cfg.c;
  j["b"] = cfg.b;
  j["learning_rate"] = cfg.learning_rate;
  j["epochs"] = cfg.epochs;
  if (cfg.batch_size) {
    j["batch_size"] = *cfg.batch_size;
  } else {
    j["batch_size"] = "full";
  }
  j["optimizer"] = to_string(cfg.optimizer);
  if (cfg.optimizer == OptimizerKind::Adam) {
    j["adam_beta1"] = cfg.adam_beta1;
    j["adam_beta2"] = cfg.adam_beta2;
    j["adam_epsilon"] = cfg.adam_epsilon;
  }
  j["seed"] = cfg.seed;
  j["bandwidth_x"] = cfg.kernel_x.bandwidth ? json(*cfg.kernel_x.bandwidth) : json("median");
  j["bandwidth_y"] = cfg.kernel_y.bandwidth ? json(*cfg.kernel_y.bandwidth) : json("median");
  j["normalize"] = cfg.kernel_x.normalize;
  j["sigma_g"] = cfg.sigma_g;
  j["freeze_bandwidth"] = cfg.freeze_bandwidth;
  j["standardize"] = cfg.standardize;
  return j.dump(2);
}

}  // namespace mmdufs
