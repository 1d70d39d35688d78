#include "cvxreg/model.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cvxreg/errors.hpp"

namespace cvxreg {

using nlohmann::json;

void Dataset::validate() const {
  if (x.rows() < 1 || x.cols() < 1) throw DataError("dataset needs n >= 1 and d >= 1");
  if (y.size() != x.rows()) throw DataError("dataset x and y row counts differ");
  if (!all_finite(x) || !all_finite(y)) throw DataError("dataset contains non-finite entries");
  if (!columns.empty() && static_cast<int>(columns.size()) != dim())
    throw DataError("dataset column names do not match d");
  if (!tags.empty() && static_cast<int>(tags.size()) != n())
    throw DataError("dataset tags do not match n");
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::Cr: return "cr";
    case Variant::Pcr: return "pcr";
    case Variant::Lcr: return "lcr";
    case Variant::Alcr: return "alcr";
    case Variant::Wrcr: return "wrcr";
  }
  return "cr";
}

Variant variant_from_string(const std::string& name) {
  if (name == "cr") return Variant::Cr;
  if (name == "pcr") return Variant::Pcr;
  if (name == "lcr") return Variant::Lcr;
  if (name == "alcr") return Variant::Alcr;
  if (name == "wrcr") return Variant::Wrcr;
  throw ParseError("unknown estimator variant '" + name + "'");
}

EstimatorConfig EstimatorConfig::cr() {
  EstimatorConfig c;
  c.variant = Variant::Cr;
  c.min_norm_refinement = true;
  return c;
}

EstimatorConfig EstimatorConfig::pcr(double lambda) {
  EstimatorConfig c;
  c.variant = Variant::Pcr;
  c.lambda = lambda;
  c.min_norm_refinement = false;
  return c;
}

EstimatorConfig EstimatorConfig::lcr(double L) {
  EstimatorConfig c;
  c.variant = Variant::Lcr;
  c.radius = L;
  c.min_norm_refinement = false;
  return c;
}

EstimatorConfig EstimatorConfig::alcr(Vector b0, double L0) {
  EstimatorConfig c;
  c.variant = Variant::Alcr;
  c.reference = std::move(b0);
  c.radius = L0;
  c.min_norm_refinement = false;
  return c;
}

EstimatorConfig EstimatorConfig::wrcr(Vector l0, Vector u0) {
  EstimatorConfig c;
  c.variant = Variant::Wrcr;
  c.lower = std::move(l0);
  c.upper = std::move(u0);
  c.min_norm_refinement = false;
  return c;
}

EstimatorConfig EstimatorConfig::with_monotone(bool on) const {
  EstimatorConfig c = *this;
  c.monotone = on;
  return c;
}

EstimatorConfig EstimatorConfig::with_min_norm(bool on) const {
  EstimatorConfig c = *this;
  c.min_norm_refinement = on;
  return c;
}

void EstimatorConfig::validate(int d) const {
  switch (variant) {
    case Variant::Cr:
      break;
    case Variant::Pcr:
      if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw ConfigError("pcr requires lambda >= 0");
      break;
    case Variant::Lcr:
      if (!(radius > 0.0) || !std::isfinite(radius)) throw ConfigError("lcr requires L > 0");
      break;
    case Variant::Alcr:
      if (!(radius >= 0.0) || !std::isfinite(radius)) throw ConfigError("alcr requires L0 >= 0");
      if (reference.size() != d) throw ConfigError("alcr b0 length does not match d");
      if (!all_finite(reference)) throw ConfigError("alcr b0 has non-finite entries");
      break;
    case Variant::Wrcr: {
      if (lower.size() != d || upper.size() != d)
        throw ConfigError("wrcr bounds length does not match d");
      for (int k = 0; k < d; ++k) {
        if (std::isnan(lower[k]) || std::isnan(upper[k]))
          throw ConfigError("wrcr bounds contain NaN");
        if (lower[k] > upper[k]) throw ConfigError("wrcr requires l0 <= u0 componentwise");
        if (monotone && upper[k] < 0.0)
          throw ConfigError("monotone wrcr requires u0 >= 0 componentwise");
      }
      break;
    }
  }
}

void PwlModel::validate(double tol) const {
  const int n = size();
  if (n == 0) throw ValidationError("model has no pieces");
  const int d = dim();
  double scale = 1.0;
  for (const auto& p : pieces) {
    if (!std::isfinite(p.value) || !all_finite(p.beta) || !all_finite(p.anchor))
      throw ValidationError("model piece has non-finite entries");
    if (p.beta.size() != d || p.anchor.size() != d)
      throw ValidationError("model piece dimensions disagree");
    scale = std::max(scale, std::abs(p.value));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double lhs = pieces[j].value;
      const double rhs = pieces[i].value +
                         pieces[i].beta.dot(pieces[j].anchor - pieces[i].anchor);
      if (lhs < rhs - tol * scale) {
        std::ostringstream msg;
        msg << "pairwise convexity violated at (i=" << i << ", j=" << j
            << "): " << lhs << " < " << rhs;
        throw ValidationError(msg.str());
      }
    }
  }
  const double btol = tol * std::max(1.0, scale);
  if (config.monotone) {
    for (int i = 0; i < n; ++i)
      if (pieces[i].beta.minCoeff() < -btol)
        throw ValidationError("monotone model has a negative subgradient component");
  }
  if (config.variant == Variant::Wrcr) {
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < d; ++k) {
        if (pieces[i].beta[k] < config.lower[k] - btol ||
            pieces[i].beta[k] > config.upper[k] + btol)
          throw ValidationError("wrcr model subgradient outside [l0, u0]");
      }
    }
  }
  if (config.variant == Variant::Lcr || config.variant == Variant::Alcr) {
    const Vector center = config.variant == Variant::Lcr
                              ? Vector(Vector::Zero(d))
                              : config.reference;
    for (int i = 0; i < n; ++i)
      if ((pieces[i].beta - center).norm() > config.radius + btol)
        throw ValidationError("model subgradient outside the Lipschitz ball");
  }
}

double evaluate(const PwlModel& model, const Vector& query) {
  if (query.size() != model.dim())
    throw DimensionError("evaluate: query length does not match model dimension");
  if (!all_finite(query)) throw DimensionError("evaluate: query has non-finite entries");
  double best = -kInf;
  for (const auto& p : model.pieces)
    best = std::max(best, p.value + p.beta.dot(query - p.anchor));
  return best;
}

Vector evaluate_all(const PwlModel& model, const Matrix& queries) {
  Vector out(queries.rows());
  for (Eigen::Index r = 0; r < queries.rows(); ++r) out[r] = evaluate(model, queries.row(r));
  return out;
}

Vector subgradient_at(const PwlModel& model, const Vector& query) {
  if (query.size() != model.dim())
    throw DimensionError("subgradient_at: query length does not match model dimension");
  if (!all_finite(query)) throw DimensionError("subgradient_at: query has non-finite entries");
  int arg = 0;
  double best = -kInf;
  for (int i = 0; i < model.size(); ++i) {
    const auto& p = model.pieces[i];
    const double v = p.value + p.beta.dot(query - p.anchor);
    if (v > best) {  // strict: ties keep the lowest index
      best = v;
      arg = i;
    }
  }
  return model.pieces[arg].beta;
}

Vector intercepts(const PwlModel& model) {
  Vector out(model.size());
  for (int i = 0; i < model.size(); ++i)
    out[i] = model.pieces[i].value - model.pieces[i].beta.dot(model.pieces[i].anchor);
  return out;
}

Matrix subgradient_matrix(const PwlModel& model) {
  Matrix out(model.size(), model.dim());
  for (int i = 0; i < model.size(); ++i) out.row(i) = model.pieces[i].beta;
  return out;
}

namespace {

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw ParseError("expected array at " + where);
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ParseError("expected number at " + where);
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

const json& require_field(const json& obj, const char* name, const std::string& where) {
  auto it = obj.find(name);
  if (it == obj.end())
    throw ParseError("missing field '" + std::string(name) + "' in " + where);
  return *it;
}

json config_to_json(const EstimatorConfig& c) {
  json out;
  out["name"] = to_string(c.variant);
  switch (c.variant) {
    case Variant::Cr:
      break;
    case Variant::Pcr:
      out["lambda"] = c.lambda;
      break;
    case Variant::Lcr:
      out["L"] = c.radius;
      break;
    case Variant::Alcr:
      out["b0"] = vector_to_json(c.reference);
      out["L0"] = c.radius;
      break;
    case Variant::Wrcr:
      out["l0"] = vector_to_json(c.lower);
      out["u0"] = vector_to_json(c.upper);
      break;
  }
  return out;
}

EstimatorConfig config_from_json(const json& obj) {
  const std::string name = require_field(obj, "name", "variant").get<std::string>();
  const Variant v = variant_from_string(name);
  switch (v) {
    case Variant::Cr:
      return EstimatorConfig::cr();
    case Variant::Pcr:
      return EstimatorConfig::pcr(require_field(obj, "lambda", "variant").get<double>());
    case Variant::Lcr:
      return EstimatorConfig::lcr(require_field(obj, "L", "variant").get<double>());
    case Variant::Alcr:
      return EstimatorConfig::alcr(vector_from_json(require_field(obj, "b0", "variant"), "variant.b0"),
                                   require_field(obj, "L0", "variant").get<double>());
    case Variant::Wrcr:
      return EstimatorConfig::wrcr(vector_from_json(require_field(obj, "l0", "variant"), "variant.l0"),
                                   vector_from_json(require_field(obj, "u0", "variant"), "variant.u0"));
  }
  throw ParseError("unreachable variant");
}

SolveStatus status_from_string(const std::string& s) {
  if (s == "optimal") return SolveStatus::Optimal;
  if (s == "max_iters") return SolveStatus::MaxIters;
  if (s == "numerical_failure") return SolveStatus::NumericalFailure;
  if (s == "infeasible") return SolveStatus::Infeasible;
  throw ParseError("unknown solver status '" + s + "'");
}

}  // namespace

std::string model_to_json(const PwlModel& model) {
  json out;
  out["schema"] = "cvxreg-model/1";
  out["variant"] = config_to_json(model.config);
  out["monotone"] = model.config.monotone;
  json pieces = json::array();
  for (const auto& p : model.pieces) {
    json piece;
    piece["value"] = p.value;
    piece["beta"] = vector_to_json(p.beta);
    piece["anchor"] = vector_to_json(p.anchor);
    pieces.push_back(std::move(piece));
  }
  out["pieces"] = std::move(pieces);
  out["fit_stats"] = {{"sse", model.fit_stats.sse},
                      {"solver_status", to_string(model.fit_stats.solver_status)},
                      {"kkt_residual", model.fit_stats.kkt_residual}};
  return out.dump(2);
}

PwlModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("model document is not a JSON object");
  const std::string schema = require_field(doc, "schema", "document").get<std::string>();
  if (schema != "cvxreg-model/1")
    throw ParseError("unsupported schema '" + schema + "' (expected cvxreg-model/1)");

  PwlModel model;
  model.config = config_from_json(require_field(doc, "variant", "document"));
  model.config.monotone = require_field(doc, "monotone", "document").get<bool>();

  const json& pieces = require_field(doc, "pieces", "document");
  if (!pieces.is_array() || pieces.empty())
    throw ParseError("field 'pieces' must be a non-empty array");
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const std::string where = "pieces[" + std::to_string(i) + "]";
    const json& pj = pieces[i];
    AffinePiece piece;
    piece.value = require_field(pj, "value", where).get<double>();
    piece.beta = vector_from_json(require_field(pj, "beta", where), where + ".beta");
    piece.anchor = vector_from_json(require_field(pj, "anchor", where), where + ".anchor");
    model.pieces.push_back(std::move(piece));
  }
  if (auto it = doc.find("fit_stats"); it != doc.end()) {
    model.fit_stats.sse = require_field(*it, "sse", "fit_stats").get<double>();
    model.fit_stats.solver_status =
        status_from_string(require_field(*it, "solver_status", "fit_stats").get<std::string>());
    model.fit_stats.kkt_residual = require_field(*it, "kkt_residual", "fit_stats").get<double>();
  }
  model.validate();
  return model;
}

void save_model(const PwlModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << model_to_json(model) << "\n";
  if (!out) throw DataError("failed writing model to '" + path + "'");
}

PwlModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace cvxreg
