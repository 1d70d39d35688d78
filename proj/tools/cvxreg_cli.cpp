#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cvxreg/errors.hpp"
#include "cvxreg/estimators.hpp"
#include "cvxreg/experiments.hpp"
#include "cvxreg/io.hpp"
#include "cvxreg/tuning.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cvxreg;

namespace {

enum LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("CVXREG_LOG");
  if (env == nullptr) return kInfo;
  const std::string v(env);
  if (v == "error") return kError;
  if (v == "debug") return kDebug;
  return kInfo;
}

void info(const std::string& line) {
  if (log_level() >= kInfo) std::printf("%s\n", line.c_str());
}

std::string human(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

Vector parse_vector(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ConfigError(flag + ": '" + cell + "' is not a number");
    }
  }
  if (values.empty()) throw ConfigError(flag + ": empty list");
  Vector out(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) out[static_cast<Eigen::Index>(i)] = values[i];
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) out.push_back(cell);
  return out;
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json cfg;
  try {
    in >> cfg;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!cfg.is_object()) throw ConfigError("config file must hold a JSON object");
  return cfg;
}

// Flags beat the config file, which beats defaults.
template <typename T>
void cfg_override(const json& cfg, const CLI::Option* opt, const char* key, T& target) {
  if (opt != nullptr && opt->count() > 0) return;
  if (auto it = cfg.find(key); it != cfg.end()) target = it->get<T>();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

struct FitArgs {
  std::string data_path, out_path, config_path;
  std::string estimator;
  double lambda = 0.0, L = 0.0, L0 = 0.0, q = -1.0;
  std::string b0, l0, u0;
  bool monotone = false;
  bool standardize = false;
  std::string min_norm = "auto";
  std::uint64_t seed = 0;
  CLI::Option *lambda_opt = nullptr, *L_opt = nullptr, *L0_opt = nullptr, *q_opt = nullptr,
              *b0_opt = nullptr, *l0_opt = nullptr, *u0_opt = nullptr, *mono_opt = nullptr,
              *std_opt = nullptr;
};

int run_fit(FitArgs& args) {
  const json cfg = load_config_file(args.config_path);
  cfg_override(cfg, args.lambda_opt, "lambda", args.lambda);
  cfg_override(cfg, args.L_opt, "L", args.L);
  cfg_override(cfg, args.L0_opt, "L0", args.L0);
  cfg_override(cfg, args.q_opt, "q", args.q);
  cfg_override(cfg, args.b0_opt, "b0", args.b0);
  cfg_override(cfg, args.l0_opt, "l0", args.l0);
  cfg_override(cfg, args.u0_opt, "u0", args.u0);
  cfg_override(cfg, args.mono_opt, "monotone", args.monotone);
  cfg_override(cfg, args.std_opt, "standardize", args.standardize);

  const Dataset data = read_dataset_csv(args.data_path);
  const int d = data.dim();

  auto given = [&](const CLI::Option* opt, const char* key) {
    return (opt != nullptr && opt->count() > 0) || cfg.contains(key);
  };

  EstimatorConfig config;
  std::string derived_note;
  if (args.estimator == "cr") {
    config = EstimatorConfig::cr();
  } else if (args.estimator == "pcr") {
    if (!given(args.lambda_opt, "lambda")) throw ConfigError("pcr requires --lambda");
    config = EstimatorConfig::pcr(args.lambda);
  } else if (args.estimator == "lcr") {
    if (!given(args.L_opt, "L")) throw ConfigError("lcr requires --L");
    config = EstimatorConfig::lcr(args.L);
  } else if (args.estimator == "alcr") {
    if (!given(args.b0_opt, "b0") || !given(args.L0_opt, "L0"))
      throw ConfigError("alcr requires --b0 and --L0");
    config = EstimatorConfig::alcr(parse_vector(args.b0, "--b0"), args.L0);
  } else if (args.estimator == "wrcr") {
    const bool have_bounds = given(args.l0_opt, "l0") && given(args.u0_opt, "u0");
    const bool have_q = given(args.q_opt, "q");
    if (!have_bounds && !have_q)
      throw ConfigError("wrcr requires either --l0 and --u0, or --q to derive them");
    if (have_bounds) {
      config = EstimatorConfig::wrcr(parse_vector(args.l0, "--l0"), parse_vector(args.u0, "--u0"));
    } else {
      // Remark-5 pipeline: percentile bounds of the CR subgradients.
      const auto cr = fit(data, EstimatorConfig::cr().with_monotone(args.monotone));
      auto [lo, hi] = percentile_bounds(subgradient_matrix(cr), args.q);
      std::ostringstream note;
      note << "derived bounds from cr subgradient percentiles at q = " << human(args.q)
           << ": l0 = [";
      for (int k = 0; k < d; ++k) note << (k ? ", " : "") << human(lo[k]);
      note << "], u0 = [";
      for (int k = 0; k < d; ++k) note << (k ? ", " : "") << human(hi[k]);
      note << "]";
      derived_note = note.str();
      config = EstimatorConfig::wrcr(std::move(lo), std::move(hi));
    }
  } else {
    throw ConfigError("unknown estimator '" + args.estimator + "'");
  }
  config.monotone = args.monotone;
  config.standardize = args.standardize;
  if (args.min_norm == "on") {
    config.min_norm_refinement = true;
  } else if (args.min_norm == "off") {
    config.min_norm_refinement = false;
  } else if (args.min_norm != "auto") {
    throw ConfigError("--min-norm must be auto, on, or off");
  }
  config.validate(d);

  FitOptions options;
  options.solver.verbose = log_level() >= kDebug;
  const PwlModel model = fit(data, config, options);
  if (!args.out_path.empty()) save_model(model, args.out_path);

  info("estimator: " + std::string(to_string(config.variant)) +
       (config.monotone ? " (monotone)" : ""));
  info("seed: " + std::to_string(args.seed));
  if (!derived_note.empty()) info(derived_note);
  info("n: " + std::to_string(data.n()) + "  d: " + std::to_string(d));
  info("sse: " + human(model.fit_stats.sse));
  {
    std::ostringstream line;
    line << "solver: " << to_string(model.fit_stats.solver_status) << " (kkt "
         << human(model.fit_stats.kkt_residual) << ")";
    info(line.str());
  }
  {
    const Matrix betas = subgradient_matrix(model);
    std::ostringstream line;
    line << "max |beta| per coordinate:";
    for (int k = 0; k < d; ++k) line << " " << human(betas.col(k).cwiseAbs().maxCoeff());
    info(line.str());
  }
  if (!args.out_path.empty()) info("wrote " + args.out_path);
  return 0;
}

struct PredictArgs {
  std::string model_path, data_path, out_path;
  bool subgradients = false;
};

int run_predict(const PredictArgs& args) {
  const PwlModel model = load_model(args.model_path);
  const Dataset data = read_dataset_csv(args.data_path);
  write_predictions_csv(data, model, args.subgradients, args.out_path);
  info("wrote " + args.out_path);
  return 0;
}

struct TuneArgs {
  std::string data_path, tuning_data_path, out_path, config_path;
  std::string estimator, grid_spec = "paper6";
  std::string b0;
  bool monotone = false;
  int k = 5;
  std::uint64_t seed = 0;
  int jobs = 1;
};

Grid parse_grid(const std::string& spec, Variant variant, const Matrix* cr_betas,
                const Vector* b0) {
  if (spec == "paper6") return default_grid(variant, GridProfile::Paper6, cr_betas, b0);
  if (spec == "paper7") return default_grid(variant, GridProfile::Paper7, cr_betas, b0);
  if (spec.rfind("file:", 0) == 0) {
    const std::string path = spec.substr(5);
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open grid file '" + path + "'");
    json doc;
    try {
      in >> doc;
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("grid file is not valid JSON: ") + e.what());
    }
    Grid grid;
    grid.parameter = doc.value("parameter", std::string("value"));
    if (!doc.contains("values") || !doc["values"].is_array())
      throw ConfigError("grid file needs a 'values' array");
    for (const auto& v : doc["values"]) grid.values.push_back(v.get<double>());
    grid.validate();
    return grid;
  }
  throw ConfigError("--grid must be paper6, paper7, or file:<path>");
}

int run_tune(TuneArgs& args) {
  const Dataset data = read_dataset_csv(args.data_path);
  const Dataset tuning =
      args.tuning_data_path.empty() ? data : read_dataset_csv(args.tuning_data_path);
  if (tuning.dim() != data.dim()) throw DataError("tuning data dimension mismatch");
  const int d = data.dim();

  const Variant variant = variant_from_string(args.estimator);
  if (variant == Variant::Cr) throw ConfigError("cr has no tuning parameter");

  TuneSpec spec;
  Matrix cr_betas;
  Vector b0;
  if (variant == Variant::Alcr) {
    // b0: explicit flag, else the OLS slope of the tuning data; the paper6
    // L0 grid additionally needs the CR subgradients of the main data.
    b0 = args.b0.empty() ? reference_vector_ols(tuning) : parse_vector(args.b0, "--b0");
    if (args.grid_spec == "paper6") {
      const auto cr = fit(data, EstimatorConfig::cr().with_monotone(args.monotone));
      cr_betas = subgradient_matrix(cr);
    }
  }
  switch (variant) {
    case Variant::Pcr:
      spec.base = EstimatorConfig::pcr(0.0);
      spec.parameter = TunedParameter::Lambda;
      break;
    case Variant::Lcr:
      spec.base = EstimatorConfig::lcr(1.0);
      spec.parameter = TunedParameter::Lipschitz;
      break;
    case Variant::Alcr:
      spec.base = EstimatorConfig::alcr(b0, 1.0);
      spec.parameter = TunedParameter::Radius;
      break;
    case Variant::Wrcr:
      spec.base = EstimatorConfig::wrcr(Vector::Zero(d), Vector::Ones(d));
      spec.parameter = TunedParameter::Quantile;
      break;
    default:
      break;
  }
  spec.base.monotone = args.monotone;

  const Grid grid = parse_grid(args.grid_spec, variant,
                               cr_betas.size() > 0 ? &cr_betas : nullptr,
                               b0.size() > 0 ? &b0 : nullptr);
  const CvResult result = cross_validate(tuning, spec, grid, args.k, args.seed, args.jobs);

  info("seed: " + std::to_string(args.seed));
  {
    std::ostringstream line;
    line << "grid: " << grid.parameter << ", " << grid.values.size() << " values from "
         << human(grid.values.front()) << " to " << human(grid.values.back());
    info(line.str());
  }
  info("chosen " + grid.parameter + ": " + human(result.best));
  if (!args.out_path.empty()) {
    write_text(args.out_path, cv_result_to_json(result, grid));
    info("wrote " + args.out_path);
  }
  return 0;
}

struct ExperimentArgs {
  std::string preset, out_dir = ".", fixture_path = "data/frontier_fixture.csv";
  std::string n_list, d_list, snr_list, estimators;
  std::string grid_profile;
  int reps = -1;
  std::uint64_t seed = 0;
  int jobs = 1;
};

std::vector<int> parse_int_list(const std::string& text, std::vector<int> fallback) {
  if (text.empty()) return fallback;
  std::vector<int> out;
  for (const auto& cell : split_list(text)) out.push_back(std::stoi(cell));
  return out;
}

std::vector<double> parse_double_list(const std::string& text, std::vector<double> fallback) {
  if (text.empty()) return fallback;
  std::vector<double> out;
  for (const auto& cell : split_list(text)) out.push_back(std::stod(cell));
  return out;
}

std::vector<Variant> parse_estimators(const std::string& text, std::vector<Variant> fallback) {
  if (text.empty()) return fallback;
  std::vector<Variant> out;
  for (const auto& cell : split_list(text)) out.push_back(variant_from_string(cell));
  return out;
}

int run_experiment(ExperimentArgs& args) {
  fs::create_directories(args.out_dir);
  const fs::path out_dir(args.out_dir);

  if (args.preset == "boundary") {
    const auto ns = parse_int_list(args.n_list, {100, 200, 400});
    const int reps = args.reps > 0 ? args.reps : 100;
    ExperimentReport combined;
    combined.preset = "boundary";
    combined.seed = args.seed;
    json echo;
    echo["n"] = ns;
    echo["replications"] = reps;
    combined.config_echo = echo.dump();
    std::ostringstream csv;
    csv << "n,replication,max_function_error,max_subgradient_error\n";
    for (int n : ns) {
      const auto report =
          boundary_diagnostic(n, reps, EstimatorConfig::cr(), args.seed, args.jobs);
      combined.failed_replications += report.failed_replications;
      for (auto metric : report.metrics) {
        std::ostringstream name;
        name << metric.name << "[n=" << n << "]";
        metric.name = name.str();
        combined.metrics.push_back(std::move(metric));
      }
      const auto* fe = report.find("max_function_error");
      const auto* ge = report.find("max_subgradient_error");
      for (std::size_t r = 0; r < fe->values.size(); ++r)
        csv << n << "," << r << "," << fe->values[r] << "," << ge->values[r] << "\n";
      info("n=" + std::to_string(n) +
           ": max function error mean " + human(fe->ci_available ? fe->mean : fe->values[0]) +
           " +- " + human(fe->ci_available ? fe->half_width : 0.0) +
           ", max subgradient error mean " + human(ge->ci_available ? ge->mean : ge->values[0]) +
           " +- " + human(ge->ci_available ? ge->half_width : 0.0));
    }
    write_text(out_dir / "report.json", combined.to_json());
    write_text(out_dir / "boundary.csv", csv.str());
    info("wrote " + (out_dir / "report.json").string() + " and " +
         (out_dir / "boundary.csv").string());
    return 0;
  }

  if (args.preset == "table2" || args.preset == "typeB-sweep" || args.preset == "snr-sweep") {
    McStudyConfig config;
    config.seed = args.seed;
    config.jobs = args.jobs;
    if (args.preset == "table2") {
      config.function = TestFunction::TypeA;
      config.n_list = parse_int_list(args.n_list, {100});
      config.d_list = {3};
      config.snr_list = parse_double_list(args.snr_list, {3.0});
      config.replications = args.reps > 0 ? args.reps : 50;
    } else if (args.preset == "typeB-sweep") {
      config.function = TestFunction::TypeB;
      config.n_list = parse_int_list(args.n_list, {100});
      config.d_list = parse_int_list(args.d_list, {2, 3, 4});
      config.snr_list = parse_double_list(args.snr_list, {3.0});
      config.replications = args.reps > 0 ? args.reps : 10;
    } else {
      config.function = TestFunction::TypeB;
      config.n_list = parse_int_list(args.n_list, {100});
      config.d_list = parse_int_list(args.d_list, {3});
      config.snr_list = parse_double_list(args.snr_list, {1.0, 1.5, 2.0, 2.5, 3.0});
      config.replications = args.reps > 0 ? args.reps : 10;
    }
    config.estimators = parse_estimators(
        args.estimators,
        {Variant::Cr, Variant::Pcr, Variant::Lcr, Variant::Alcr, Variant::Wrcr});
    if (args.grid_profile == "paper7") config.profile = GridProfile::Paper7;
    const auto report = mc_study(config);
    write_text(out_dir / "report.json", report.to_json());
    write_text(out_dir / "results.csv", report.rows_to_csv());
    for (const auto& metric : report.metrics) {
      std::ostringstream line;
      line << metric.name << ": mean " << human(metric.mean);
      if (metric.ci_available) line << " +- " << human(metric.half_width);
      info(line.str());
    }
    info("wrote " + (out_dir / "report.json").string() + " and " +
         (out_dir / "results.csv").string());
    return 0;
  }

  if (args.preset == "frontier-fixture") {
    const Dataset fixture = read_dataset_csv(args.fixture_path);
    auto [train, test] = frontier_split(fixture);
    const GridProfile profile =
        args.grid_profile == "paper6" ? GridProfile::Paper6 : GridProfile::Paper7;
    const auto rows = run_frontier_preset(train, test, profile, 5, args.seed, args.jobs);
    info("seed: " + std::to_string(args.seed));
    info("train rows: " + std::to_string(train.n()) + ", test rows: " + std::to_string(test.n()));
    std::printf("%-10s %-12s %-14s %-14s %s\n", "estimator", "tuned", "in_rmse", "out_rmse",
                "out/in");
    std::ostringstream csv;
    csv << "estimator,tuned,in_rmse,out_rmse\n";
    json report;
    report["schema"] = "cvxreg-report/1";
    report["preset"] = "frontier-fixture";
    report["seed"] = args.seed;
    json jrows = json::array();
    for (const auto& row : rows) {
      std::printf("%-10s %-12s %-14s %-14s %s\n", row.estimator.c_str(),
                  row.has_tuned_value ? human(row.tuned_value).c_str() : "-",
                  human(row.in_rmse).c_str(), human(row.out_rmse).c_str(),
                  human(row.out_rmse / row.in_rmse).c_str());
      csv << row.estimator << "," << (row.has_tuned_value ? std::to_string(row.tuned_value) : "")
          << "," << row.in_rmse << "," << row.out_rmse << "\n";
      json jr;
      jr["estimator"] = row.estimator;
      if (row.has_tuned_value) jr["tuned"] = row.tuned_value;
      jr["in_rmse"] = row.in_rmse;
      jr["out_rmse"] = row.out_rmse;
      jrows.push_back(std::move(jr));
    }
    report["results"] = std::move(jrows);
    write_text(out_dir / "report.json", report.dump(2));
    write_text(out_dir / "frontier.csv", csv.str());
    info("wrote " + (out_dir / "report.json").string() + " and " +
         (out_dir / "frontier.csv").string());
    return 0;
  }

  throw ConfigError("unknown preset '" + args.preset + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cvxreg: shape-constrained convex regression toolkit"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Fit an estimator to a dataset");
  fit_cmd->add_option("--data", fit_args.data_path, "Dataset CSV (header x1,...,xd,y)")
      ->required();
  fit_cmd->add_option("--estimator", fit_args.estimator, "cr|pcr|lcr|alcr|wrcr")->required();
  fit_args.lambda_opt = fit_cmd->add_option("--lambda", fit_args.lambda, "PCR penalty weight");
  fit_args.L_opt = fit_cmd->add_option("--L", fit_args.L, "LCR Lipschitz bound");
  fit_args.L0_opt = fit_cmd->add_option("--L0", fit_args.L0, "ALCR radius around b0");
  fit_args.b0_opt = fit_cmd->add_option("--b0", fit_args.b0, "ALCR reference vector (comma list)");
  fit_args.l0_opt = fit_cmd->add_option("--l0", fit_args.l0, "WRCR lower bounds (comma list)");
  fit_args.u0_opt = fit_cmd->add_option("--u0", fit_args.u0, "WRCR upper bounds (comma list)");
  fit_args.q_opt =
      fit_cmd->add_option("--q", fit_args.q, "WRCR percentile for derived bounds (0 <= q < 0.5)");
  fit_args.mono_opt = fit_cmd->add_flag("--monotone", fit_args.monotone, "Require beta >= 0");
  fit_args.std_opt =
      fit_cmd->add_flag("--standardize", fit_args.standardize, "Standardize inputs internally");
  fit_cmd->add_option("--min-norm", fit_args.min_norm,
                      "Minimum-norm subgradient refinement: auto|on|off");
  fit_cmd->add_option("--seed", fit_args.seed, "Seed echoed in outputs");
  fit_cmd->add_option("--config", fit_args.config_path, "JSON config file (flags override)");
  fit_cmd->add_option("--out", fit_args.out_path, "Model JSON output path");

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "Evaluate a saved model on a dataset");
  predict_cmd->add_option("--model", predict_args.model_path, "Model JSON")->required();
  predict_cmd->add_option("--data", predict_args.data_path, "Dataset CSV")->required();
  predict_cmd->add_option("--out", predict_args.out_path, "Output CSV")->required();
  predict_cmd->add_flag("--subgradients", predict_args.subgradients,
                        "Add beta1..betad columns");

  TuneArgs tune_args;
  auto* tune_cmd = app.add_subcommand("tune", "Cross-validate a tuning parameter");
  tune_cmd->add_option("--data", tune_args.data_path, "Dataset CSV")->required();
  tune_cmd->add_option("--tuning-data", tune_args.tuning_data_path,
                       "Separate dataset to run CV on (defaults to --data)");
  tune_cmd->add_option("--estimator", tune_args.estimator, "pcr|lcr|alcr|wrcr")->required();
  tune_cmd->add_option("--grid", tune_args.grid_spec, "paper6|paper7|file:<path>");
  tune_cmd->add_option("--b0", tune_args.b0,
                       "ALCR reference vector (defaults to the tuning data's OLS slope)");
  tune_cmd->add_flag("--monotone", tune_args.monotone, "Tune the monotone variant");
  tune_cmd->add_option("--k", tune_args.k, "Number of folds");
  tune_cmd->add_option("--seed", tune_args.seed, "Fold shuffle seed");
  tune_cmd->add_option("--jobs", tune_args.jobs, "Parallel fold/candidate fits");
  tune_cmd->add_option("--out", tune_args.out_path, "CV report JSON path");

  ExperimentArgs exp_args;
  auto* exp_cmd = app.add_subcommand("experiment", "Run a reproducible experiment preset");
  exp_cmd->add_option("--preset", exp_args.preset,
                      "boundary|table2|typeB-sweep|snr-sweep|frontier-fixture")
      ->required();
  exp_cmd->add_option("--n", exp_args.n_list, "Sample sizes (comma list)");
  exp_cmd->add_option("--d", exp_args.d_list, "Dimensions (comma list)");
  exp_cmd->add_option("--snr", exp_args.snr_list, "Signal-to-noise ratios (comma list)");
  exp_cmd->add_option("--reps", exp_args.reps, "Replications");
  exp_cmd->add_option("--estimators", exp_args.estimators, "Estimators (comma list)");
  exp_cmd->add_option("--grid-profile", exp_args.grid_profile, "paper6|paper7");
  exp_cmd->add_option("--fixture", exp_args.fixture_path, "Frontier fixture CSV");
  exp_cmd->add_option("--seed", exp_args.seed, "Master seed");
  exp_cmd->add_option("--jobs", exp_args.jobs, "Parallel replications");
  exp_cmd->add_option("--out", exp_args.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (fit_cmd->parsed()) return run_fit(fit_args);
    if (predict_cmd->parsed()) return run_predict(predict_args);
    if (tune_cmd->parsed()) return run_tune(tune_args);
    if (exp_cmd->parsed()) return run_experiment(exp_args);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return 4;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 2;
}
