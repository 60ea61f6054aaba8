#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include "CLI11.hpp"

#include "umlr/diagnostics.hpp"
#include "umlr/estimators.hpp"
#include "umlr/kernels.hpp"
#include "umlr/simulation.hpp"

namespace umlr::cli {

using nlohmann::json;

namespace {

constexpr const char* kReportSchema = "umlr-report/v1";
constexpr const char* kErrorSchema = "umlr-error/v1";
constexpr const char* kVersion = "1.0.0";

enum class Type { kInt, kDouble, kBool, kString };
enum Command : unsigned { kSim = 1, kEst = 2, kDiag = 4, kAll = 7 };

struct KeySpec {
  const char* name;
  Type type;
  const char* def;  // nullptr: required
  unsigned commands;
  const char* help;
};

// clang-format off
const KeySpec kKeys[] = {
  {"seed", Type::kInt, "0", kAll, "master seed"},
  {"threads", Type::kInt, "0", kAll, "worker threads (0: UMLR_THREADS or hardware)"},
  {"out", Type::kString, "-", kAll, "report path ('-' for stdout)"},
  {"format", Type::kString, "json", kAll, "report format: json or csv"},

  {"learner", Type::kString, "ridge", kSim | kEst, "base learner: ridge, lasso or gbt"},
  {"lambda", Type::kString, "cv", kSim | kEst, "penalty weight, or 'cv' for K-fold selection"},
  {"cv-folds", Type::kInt, "5", kSim | kEst, "folds for lambda selection"},
  {"umlr-route", Type::kString, "auto", kSim | kEst, "umlr route: auto, exact or anchor"},
  {"gbt-trees", Type::kInt, "200", kSim | kEst, "boosting rounds"},
  {"gbt-depth", Type::kInt, "3", kSim | kEst, "tree depth"},
  {"gbt-learning-rate", Type::kDouble, "0.1", kSim | kEst, "shrinkage per round"},
  {"gbt-min-leaf", Type::kInt, "5", kSim | kEst, "minimum samples per leaf"},
  {"estimator", Type::kString, "t", kSim | kEst, "comma list of s, t, x, aipw, dml, psm"},
  {"mode", Type::kString, "both", kSim | kEst, "mlr, umlr or both"},
  {"bootstrap", Type::kInt, "200", kSim | kEst, "bootstrap resamples for S/T/X intervals"},
  {"folds", Type::kInt, "5", kSim | kEst, "cross-fitting folds for dml"},
  {"caliper", Type::kDouble, "0.2", kSim | kEst, "psm caliper in sd of the logit"},
  {"level", Type::kDouble, "0.95", kSim | kEst, "interval level"},
  {"prop-l2", Type::kDouble, "1", kSim | kEst, "propensity ridge penalty"},
  {"clip-lo", Type::kDouble, "0.01", kSim | kEst, "propensity lower clip"},
  {"clip-hi", Type::kDouble, "0.99", kSim | kEst, "propensity upper clip"},
  {"ci", Type::kBool, "true", kSim | kEst, "compute intervals"},
  {"summary-csv", Type::kString, "", kSim | kEst, "also write the result table as CSV"},

  {"n", Type::kInt, "1000", kSim, "units per replicate"},
  {"p", Type::kInt, "200", kSim, "covariates"},
  {"s", Type::kInt, "10", kSim, "active covariates per coefficient vector"},
  {"mu1", Type::kDouble, "2", kSim, "treated-arm intercept"},
  {"mu0", Type::kDouble, "0", kSim, "control-arm intercept"},
  {"beta-scale", Type::kDouble, "0.5", kSim, "magnitude of active outcome coefficients"},
  {"gamma-scale", Type::kDouble, "0.5", kSim, "magnitude of active propensity coefficients"},
  {"sigma", Type::kDouble, "1", kSim, "noise sd"},
  {"support", Type::kString, "independent", kSim, "independent or shared"},
  {"signs", Type::kString, "random", kSim, "random or positive"},
  {"equal-betas", Type::kBool, "false", kSim, "use beta1 = beta0"},
  {"independent-arm-noise", Type::kBool, "false", kSim, "separate noise draws per arm"},
  {"reps", Type::kInt, "100", kSim, "replicates"},
  {"oracle-propensity", Type::kBool, "false", kSim, "give aipw/dml the true propensity"},
  {"rct-oracle", Type::kBool, "false", kSim, "add the randomized difference-of-means row"},
  {"records-csv", Type::kString, "", kSim, "per-replicate records CSV"},
  {"export-data", Type::kString, "", kSim, "write replicate 0 as y,t,x1..xp CSV"},

  {"data", Type::kString, nullptr, kEst, "input CSV"},
  {"outcome", Type::kString, "y", kEst, "outcome column"},
  {"treatment", Type::kString, "t", kEst, "treatment column"},
  {"covariates", Type::kString, "all-others", kEst, "comma list of covariate columns or all-others"},

  {"pred-file", Type::kString, nullptr, kDiag, "comma list of prediction CSVs"},
  {"y-col", Type::kString, "y", kDiag, "observed outcome column"},
  {"yhat-col", Type::kString, "y_hat", kDiag, "prediction column"},
  {"scatter", Type::kString, "", kDiag, "scatter data CSV"},
};
// clang-format on

const KeySpec* find_key(const std::string& name) {
  for (const auto& k : kKeys)
    if (name == k.name) return &k;
  return nullptr;
}

unsigned command_bit(const std::string& command) {
  if (command == "simulate") return kSim;
  if (command == "estimate") return kEst;
  if (command == "diagnose") return kDiag;
  throw Error(ErrorCode::kConfig, "unknown command '" + command + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* b = t.data();
  const char* e = b + t.size();
  if (*b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e;
}

bool parse_int(const std::string& s, long long& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

bool parse_bool(const std::string& s, bool& out) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes" || t == "on") {
    out = true;
    return true;
  }
  if (t == "false" || t == "0" || t == "no" || t == "off") {
    out = false;
    return true;
  }
  return false;
}

json typed_value(const KeySpec& k, const std::string& raw) {
  switch (k.type) {
    case Type::kInt: {
      long long v = 0;
      if (!parse_int(raw, v)) throw Error(ErrorCode::kConfig, std::string(k.name) + ": expected an integer, got '" + raw + "'");
      return v;
    }
    case Type::kDouble: {
      double v = 0.0;
      if (!parse_double(raw, v) || !std::isfinite(v)) {
        throw Error(ErrorCode::kConfig, std::string(k.name) + ": expected a number, got '" + raw + "'");
      }
      return v;
    }
    case Type::kBool: {
      bool v = false;
      if (!parse_bool(raw, v)) throw Error(ErrorCode::kConfig, std::string(k.name) + ": expected true or false, got '" + raw + "'");
      return v;
    }
    case Type::kString:
      return trim(raw);
  }
  return nullptr;
}

struct Resolved {
  json config;
  std::vector<std::string> warnings;
};

Resolved resolve(const std::string& command, const Settings& settings) {
  const unsigned bit = command_bit(command);
  Resolved r;
  r.config = json::object();
  for (const auto& [key, value] : settings) {
    const KeySpec* k = find_key(key);
    if (!k) throw Error(ErrorCode::kConfig, "unknown setting '" + key + "'");
    if (!(k->commands & bit)) r.warnings.push_back("setting '" + key + "' is ignored by " + command);
  }
  for (const auto& k : kKeys) {
    if (!(k.commands & bit)) continue;
    const auto it = settings.find(k.name);
    if (it != settings.end()) {
      r.config[k.name] = typed_value(k, it->second);
    } else if (k.def) {
      r.config[k.name] = typed_value(k, k.def);
    } else {
      throw Error(ErrorCode::kConfig, std::string(command) + ": missing required setting --" + k.name);
    }
  }
  r.config["command"] = command;
  return r;
}

// ------------------------------------------------------------ typed views

LearnerConfig learner_from(const json& c) {
  LearnerConfig l;
  l.kind = parse_learner_kind(c["learner"].get<std::string>());
  const std::string lambda = c["lambda"].get<std::string>();
  if (lambda == "cv") {
    l.cv_folds = c["cv-folds"].get<int>();
    if (l.cv_folds < 2) throw Error(ErrorCode::kConfig, "cv-folds must be >= 2 when lambda = cv");
  } else {
    double v = 0.0;
    if (!parse_double(lambda, v)) throw Error(ErrorCode::kConfig, "lambda: expected a number or 'cv', got '" + lambda + "'");
    l.lambda = v;
    l.cv_folds = 0;
  }
  l.cv_seed = c["seed"].get<std::uint64_t>();
  l.umlr_route = parse_umlr_route(c["umlr-route"].get<std::string>());
  l.gbt.n_trees = c["gbt-trees"].get<int>();
  l.gbt.max_depth = c["gbt-depth"].get<int>();
  l.gbt.learning_rate = c["gbt-learning-rate"].get<double>();
  l.gbt.min_samples_leaf = c["gbt-min-leaf"].get<int>();
  l.validate();
  return l;
}

EstimateOptions estimate_options_from(const json& c) {
  EstimateOptions o;
  o.learner = learner_from(c);
  o.prop_l2 = c["prop-l2"].get<double>();
  o.clip_lo = c["clip-lo"].get<double>();
  o.clip_hi = c["clip-hi"].get<double>();
  o.folds = c["folds"].get<int>();
  o.caliper = c["caliper"].get<double>();
  o.bootstrap_b = c["bootstrap"].get<int>();
  o.level = c["level"].get<double>();
  o.with_ci = c["ci"].get<bool>();
  o.seed = c["seed"].get<std::uint64_t>();
  if (!(o.clip_lo > 0.0 && o.clip_lo < o.clip_hi && o.clip_hi < 1.0)) {
    throw Error(ErrorCode::kConfig, "propensity clips must satisfy 0 < clip-lo < clip-hi < 1");
  }
  if (!(o.level > 0.0 && o.level < 1.0)) throw Error(ErrorCode::kConfig, "level must lie in (0, 1)");
  return o;
}

std::vector<Estimator> estimators_from(const json& c) {
  std::vector<Estimator> out;
  for (const auto& s : split(c["estimator"].get<std::string>(), ',')) {
    if (s.empty()) throw Error(ErrorCode::kConfig, "estimator: empty entry in list");
    out.push_back(parse_estimator(s));
  }
  return out;
}

std::vector<FitMode> modes_from(const json& c) {
  const std::string m = c["mode"].get<std::string>();
  if (m == "both") return {FitMode::kMlr, FitMode::kUmlr};
  return {parse_fit_mode(m)};
}

DgpConfig dgp_from(const json& c) {
  DgpConfig d;
  d.n = c["n"].get<Index>();
  d.p = c["p"].get<Index>();
  d.s = c["s"].get<Index>();
  d.mu1 = c["mu1"].get<double>();
  d.mu0 = c["mu0"].get<double>();
  d.beta_scale = c["beta-scale"].get<double>();
  d.gamma_scale = c["gamma-scale"].get<double>();
  d.sigma = c["sigma"].get<double>();
  d.seed = c["seed"].get<std::uint64_t>();
  d.support = parse_support_scheme(c["support"].get<std::string>());
  d.signs = parse_sign_scheme(c["signs"].get<std::string>());
  d.equal_betas = c["equal-betas"].get<bool>();
  d.independent_arm_noise = c["independent-arm-noise"].get<bool>();
  d.validate();
  return d;
}

// ------------------------------------------------------------- emission

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json slopes_json(const std::optional<CounterfactualSlopes>& s) {
  if (!s) return nullptr;
  return json{{"eta_1_1", num(s->eta_1_1)}, {"eta_1_0", num(s->eta_1_0)},
              {"eta_0_0", num(s->eta_0_0)}, {"eta_0_1", num(s->eta_0_1)}};
}

json spb_json(const SpbReport& r) {
  return json{{"eta_hat", num(r.eta_hat)}, {"spb_metric", num(r.spb_metric)},
              {"intercept", num(r.intercept)}, {"resid_cor", num(r.resid_cor)},
              {"rmse", num(r.rmse)}, {"mae", num(r.mae)}, {"n", r.n}};
}

json summary_json(const McSummary& s) {
  return json{{"estimator", s.estimator},
              {"mode", s.mode},
              {"estimand", s.estimand},
              {"reps", s.reps},
              {"failures", s.failures},
              {"valid", s.valid},
              {"mean_true", num(s.mean_true)},
              {"mean_bias", num(s.mean_bias)},
              {"mc_se", num(s.mc_se)},
              {"bias_pct_signed", num(s.bias_pct_signed)},
              {"bias_pct_signed_se", num(s.bias_pct_signed_se)},
              {"bias_pct_abs", num(s.bias_pct_abs)},
              {"bias_pct_abs_se", num(s.bias_pct_abs_se)},
              {"rmse", num(s.rmse)},
              {"coverage", s.ci_count > 0 ? num(s.coverage) : json(nullptr)},
              {"coverage_se", s.ci_count > 0 ? num(s.coverage_se) : json(nullptr)},
              {"ci_count", s.ci_count},
              {"mean_slopes", slopes_json(s.mean_slopes)}};
}

json estimate_json(const AteEstimate& e) {
  return json{{"estimator", to_string(e.estimator)},
              {"mode", to_string(e.mode)},
              {"estimand", e.estimand},
              {"point", num(e.point)},
              {"ci_low", e.has_ci ? num(e.ci_low) : json(nullptr)},
              {"ci_high", e.has_ci ? num(e.ci_high) : json(nullptr)},
              {"level", num(e.level)},
              {"std_error", num(e.std_error)},
              {"n_used", e.n_used}};
}

std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

// Flat CSV of an array of flat objects; nested objects are expanded with
// a dotted prefix.
std::string table_csv(const json& rows) {
  std::vector<std::string> columns;
  std::vector<std::vector<std::pair<std::string, json>>> flat;
  for (const auto& row : rows) {
    std::vector<std::pair<std::string, json>> cells;
    for (const auto& [k, v] : row.items()) {
      if (v.is_object()) {
        for (const auto& [k2, v2] : v.items()) cells.emplace_back(k + "." + k2, v2);
      } else {
        cells.emplace_back(k, v);
      }
    }
    for (const auto& [k, v] : cells)
      if (std::find(columns.begin(), columns.end(), k) == columns.end()) columns.push_back(k);
    flat.push_back(std::move(cells));
  }
  std::ostringstream os;
  for (std::size_t j = 0; j < columns.size(); ++j) os << (j ? "," : "") << columns[j];
  os << '\n';
  for (const auto& cells : flat) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (j) os << ',';
      for (const auto& [k, v] : cells)
        if (k == columns[j]) os << csv_cell(v);
    }
    os << '\n';
  }
  return os.str();
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void emit_optional(const std::string& path, const std::string& content) {
  if (!path.empty()) write_file_atomic(path, content);
}

// -------------------------------------------------------------- commands

json run_simulate(const json& c, json& diagnostics, std::vector<std::string>& warnings) {
  const DgpConfig dgp = dgp_from(c);
  McOptions opt;
  opt.reps = c["reps"].get<int>();
  opt.seed = c["seed"].get<std::uint64_t>();
  opt.estimate = estimate_options_from(c);
  opt.oracle_propensity = c["oracle-propensity"].get<bool>();
  opt.rct_oracle = c["rct-oracle"].get<bool>();
  opt.threads = c["threads"].get<int>();
  std::vector<ScenarioEntry> scenario;
  for (Estimator e : estimators_from(c))
    for (FitMode m : modes_from(c)) scenario.push_back({e, m});

  const std::string export_path = c["export-data"].get<std::string>();
  if (!export_path.empty()) {
    const SimReplicate rep = generate_replicate(dgp, 0);
    std::ostringstream os;
    os << "y,t";
    for (Index j = 0; j < dgp.p; ++j) os << ",x" << (j + 1);
    os << '\n';
    for (Index i = 0; i < dgp.n; ++i) {
      os << format_double(rep.data.y()[i]) << ',' << rep.data.t()[i];
      for (Index j = 0; j < dgp.p; ++j) os << ',' << format_double(rep.data.x()(i, j));
      os << '\n';
    }
    write_file_atomic(export_path, os.str());
  }

  const McResult res = run_monte_carlo(dgp, scenario, opt);
  json results = json::array();
  for (const auto& s : res.summaries) {
    results.push_back(summary_json(s));
    if (!s.valid) {
      warnings.push_back(s.estimator + "/" + s.mode + ": " + std::to_string(s.failures) + " of " +
                         std::to_string(s.reps) + " replicates failed; summary marked invalid");
    }
  }
  std::map<std::string, int> failure_counts;
  for (const auto& r : res.records)
    if (r.failed) ++failure_counts[r.error];
  json failures = json::array();
  for (const auto& [msg, count] : failure_counts) failures.push_back({{"error", msg}, {"count", count}});
  diagnostics["failures"] = failures;

  const std::string records_path = c["records-csv"].get<std::string>();
  if (!records_path.empty()) {
    std::ostringstream os;
    os << "rep,estimator,mode,true_value,estimate,ci_low,ci_high,failed,eta_1_1,eta_1_0,eta_0_0,eta_0_1,error\n";
    for (const auto& r : res.records) {
      os << r.rep << ',' << r.estimator << ',' << r.mode << ',' << format_double(r.true_value) << ',';
      if (!r.failed) os << format_double(r.estimate);
      os << ',';
      if (r.has_ci) os << format_double(r.ci_low) << ',' << format_double(r.ci_high);
      else os << ',';
      os << ',' << (r.failed ? "true" : "false");
      if (r.slopes) {
        os << ',' << format_double(r.slopes->eta_1_1) << ',' << format_double(r.slopes->eta_1_0) << ','
           << format_double(r.slopes->eta_0_0) << ',' << format_double(r.slopes->eta_0_1);
      } else {
        os << ",,,,";
      }
      std::string err = r.error;
      std::replace(err.begin(), err.end(), '"', '\'');
      os << ',' << (err.empty() ? "" : "\"" + err + "\"") << '\n';
    }
    write_file_atomic(records_path, os.str());
  }
  return results;
}

json run_estimate(const json& c, json& diagnostics, json& input) {
  const std::string cov = c["covariates"].get<std::string>();
  std::vector<std::string> covs = cov == "all-others" ? std::vector<std::string>{} : split(cov, ',');
  const LoadedCsv loaded =
      load_csv(c["data"].get<std::string>(), c["outcome"].get<std::string>(), c["treatment"].get<std::string>(), covs);
  input = json{{"path", c["data"]},
               {"rows", loaded.data.n()},
               {"n_treated", loaded.data.n_treated()},
               {"n_control", loaded.data.n_control()},
               {"outcome", loaded.outcome},
               {"treatment", loaded.treatment},
               {"covariates", loaded.covariates}};
  EstimateOptions base = estimate_options_from(c);
  json results = json::array();
  json models = json::array();
  for (Estimator e : estimators_from(c)) {
    for (FitMode m : modes_from(c)) {
      EstimateOptions o = base;
      o.mode = m;
      const AteEstimate est = estimate(e, loaded.data, o);
      results.push_back(estimate_json(est));
      for (const auto& d : est.diagnostics) {
        json row = spb_json(d.report);
        row["estimator"] = to_string(e);
        row["mode"] = to_string(m);
        row["model"] = d.name;
        models.push_back(row);
      }
    }
  }
  diagnostics["models"] = models;
  return results;
}

json run_diagnose(const json& c, json& diagnostics) {
  const std::string ycol = c["y-col"].get<std::string>();
  const std::string hcol = c["yhat-col"].get<std::string>();
  std::vector<double> ys, hs;
  json per_file = json::array();
  for (const auto& path : split(c["pred-file"].get<std::string>(), ',')) {
    if (path.empty()) throw Error(ErrorCode::kConfig, "pred-file: empty entry in list");
    const auto cols = read_numeric_columns(path, {ycol, hcol});
    ys.insert(ys.end(), cols[0].data(), cols[0].data() + cols[0].size());
    hs.insert(hs.end(), cols[1].data(), cols[1].data() + cols[1].size());
    json row = spb_json(estimate_eta(cols[0], cols[1]));
    row["file"] = path;
    per_file.push_back(row);
  }
  const Vector y = Eigen::Map<const Vector>(ys.data(), static_cast<Index>(ys.size()));
  const Vector h = Eigen::Map<const Vector>(hs.data(), static_cast<Index>(hs.size()));
  const SpbReport pooled = estimate_eta(y, h);
  diagnostics["files"] = per_file;

  const std::string scatter = c["scatter"].get<std::string>();
  if (!scatter.empty()) {
    std::ostringstream os;
    os << "y,y_hat,fitted\n";
    for (Index i = 0; i < y.size(); ++i) {
      os << format_double(y[i]) << ',' << format_double(h[i]) << ','
         << format_double(pooled.intercept + pooled.eta_hat * y[i]) << '\n';
    }
    write_file_atomic(scatter, os.str());
  }
  json row = spb_json(pooled);
  row["fit_slope"] = num(pooled.eta_hat);
  row["fit_intercept"] = num(pooled.intercept);
  return json::array({row});
}

}  // namespace

// ----------------------------------------------------------------- public

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
      return kExitUsage;
    case ErrorCode::kParse:
    case ErrorCode::kInvalidInput:
    case ErrorCode::kDimensionMismatch:
      return kExitInput;
    case ErrorCode::kIo:
      return kExitOutput;
    default:
      return kExitNumerical;
  }
}

Settings parse_config_text(const std::string& text) {
  Settings out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfig, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!find_key(key)) {
      throw Error(ErrorCode::kConfig, "config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

Settings read_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kParse, "cannot open config file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config_text(os.str());
}

Settings settings_from_report(const json& report) {
  if (!report.is_object() || report.value("schema", "") != kReportSchema || !report.contains("config")) {
    throw Error(ErrorCode::kParse, std::string("replay: not a ") + kReportSchema + " report");
  }
  Settings out;
  for (const auto& [key, v] : report["config"].items()) {
    if (key == "command") continue;
    if (v.is_boolean()) out[key] = v.get<bool>() ? "true" : "false";
    else if (v.is_number_integer()) out[key] = std::to_string(v.get<long long>());
    else if (v.is_number_float()) out[key] = format_double(v.get<double>());
    else if (v.is_string()) out[key] = v.get<std::string>();
    else throw Error(ErrorCode::kParse, "replay: unsupported value for '" + key + "'");
  }
  return out;
}

LoadedCsv load_csv(const std::string& path, const std::string& outcome, const std::string& treatment,
                   const std::vector<std::string>& covariates) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kParse, "cannot open data file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParse, path + ": missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string> header = split(trim(line), ',');
  auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::kParse, path + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t yi = column(outcome);
  const std::size_t ti = column(treatment);
  std::vector<std::string> names;
  std::vector<std::size_t> xi;
  const bool all_others = covariates.empty() || (covariates.size() == 1 && covariates[0] == "all-others");
  if (all_others) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (j == yi || j == ti) continue;
      names.push_back(header[j]);
      xi.push_back(j);
    }
  } else {
    for (const auto& c : covariates) {
      names.push_back(c);
      xi.push_back(column(c));
    }
  }
  if (xi.empty()) throw Error(ErrorCode::kParse, path + ": no covariate columns");

  std::vector<double> yv, xv;
  std::vector<int> tv;
  Index row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> cells = split(trim(line), ',');
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kParse, path + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                         " fields, header has " + std::to_string(header.size()));
    }
    auto cell = [&](std::size_t j) {
      double v = 0.0;
      if (!parse_double(cells[j], v) || !std::isfinite(v)) {
        throw Error(ErrorCode::kParse, path + ": row " + std::to_string(row) + ", column '" + header[j] +
                                           "': '" + cells[j] + "' is not a finite number");
      }
      return v;
    };
    yv.push_back(cell(yi));
    const double t = cell(ti);
    if (t != 0.0 && t != 1.0) {
      throw Error(ErrorCode::kInvalidInput, path + ": row " + std::to_string(row) + ", column '" + header[ti] +
                                                "': treatment value '" + cells[ti] + "' is not 0/1");
    }
    tv.push_back(static_cast<int>(t));
    for (std::size_t j : xi) xv.push_back(cell(j));
  }
  const Index n = row;
  const Index p = static_cast<Index>(xi.size());
  if (n == 0) throw Error(ErrorCode::kParse, path + ": no data rows");
  Matrix x(n, p);
  Vector y(n);
  Eigen::VectorXi t(n);
  for (Index i = 0; i < n; ++i) {
    y[i] = yv[static_cast<std::size_t>(i)];
    t[i] = tv[static_cast<std::size_t>(i)];
    for (Index j = 0; j < p; ++j) x(i, j) = xv[static_cast<std::size_t>(i * p + j)];
  }
  return LoadedCsv{Dataset(std::move(x), std::move(t), std::move(y)), outcome, treatment, names};
}

std::vector<Vector> read_numeric_columns(const std::string& path, const std::vector<std::string>& names) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kParse, "cannot open file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParse, path + ": missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string> header = split(trim(line), ',');
  std::vector<std::size_t> idx;
  for (const auto& name : names) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::kParse, path + ": missing column '" + name + "'");
    idx.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  std::vector<std::vector<double>> cols(names.size());
  Index row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> cells = split(trim(line), ',');
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kParse, path + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                         " fields, header has " + std::to_string(header.size()));
    }
    for (std::size_t k = 0; k < idx.size(); ++k) {
      double v = 0.0;
      if (!parse_double(cells[idx[k]], v) || !std::isfinite(v)) {
        throw Error(ErrorCode::kParse, path + ": row " + std::to_string(row) + ", column '" + names[k] + "': '" +
                                           cells[idx[k]] + "' is not a finite number");
      }
      cols[k].push_back(v);
    }
  }
  std::vector<Vector> out;
  for (const auto& c : cols) out.emplace_back(Eigen::Map<const Vector>(c.data(), static_cast<Index>(c.size())));
  return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::kIo, "cannot rename onto '" + path + "'");
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

json resolve_config(const std::string& command, const Settings& settings) {
  return resolve(command, settings).config;
}

RunOutput run(const std::string& command, const Settings& settings) {
  Resolved r = resolve(command, settings);
  const json& c = r.config;
  const std::string format = c["format"].get<std::string>();
  if (format != "json" && format != "csv") throw Error(ErrorCode::kConfig, "format must be json or csv");

  json diagnostics = json::object();
  json input = nullptr;
  json results;
  if (command == "simulate") results = run_simulate(c, diagnostics, r.warnings);
  else if (command == "estimate") results = run_estimate(c, diagnostics, input);
  else results = run_diagnose(c, diagnostics);

  RunOutput out;
  out.report = json{{"schema", kReportSchema},
                    {"command", command},
                    {"config", c},
                    {"results", results},
                    {"diagnostics", diagnostics},
                    {"warnings", r.warnings},
                    {"metadata", {{"timestamp", timestamp_utc()},
                                  {"version", kVersion},
                                  {"kernels", kernels::isa_name(kernels::active().isa)}}}};
  if (!input.is_null()) out.report["input"] = input;
  if (c.contains("summary-csv")) emit_optional(c["summary-csv"].get<std::string>(), table_csv(results));
  out.rendered = format == "json" ? out.report.dump(2) + "\n" : table_csv(results);
  const std::string path = c["out"].get<std::string>();
  if (path != "-") write_file_atomic(path, out.rendered);
  return out;
}

json error_json(ErrorCode code, const std::string& message) {
  return json{{"schema", kErrorSchema},
              {"error", {{"code", error_code_name(code)}, {"message", message}}},
              {"exit_code", exit_code_for(code)}};
}

int main_entry(int argc, char** argv) {
  CLI::App app{"umlr: mean-anchored regression learners and treatment-effect estimators"};
  app.require_subcommand(1);
  std::string config_path, replay_path;
  app.add_option("--config", config_path, "key = value settings file (flags override it)");
  app.add_option("--replay", replay_path, "re-run the configuration embedded in a report");

  struct Bound {
    const KeySpec* key;
    std::string value;
    std::vector<std::string> list;
    bool flag_value = false;
  };
  std::map<std::string, std::vector<std::unique_ptr<Bound>>> bound;
  for (const char* name : {"simulate", "estimate", "diagnose"}) {
    const unsigned bit = command_bit(name);
    CLI::App* sub = app.add_subcommand(name, std::string(name) == "simulate"   ? "Monte-Carlo study on the synthetic design"
                                             : std::string(name) == "estimate" ? "treatment effects for a CSV dataset"
                                                                               : "shrinkage diagnostics for predictions");
    sub->fallthrough();
    for (const auto& k : kKeys) {
      if (!(k.commands & bit)) continue;
      auto b = std::make_unique<Bound>();
      b->key = &k;
      const std::string flag = std::string("--") + k.name;
      std::string help = k.help;
      if (k.def && *k.def) help += std::string(" [") + k.def + "]";
      if (k.type == Type::kBool) {
        sub->add_flag(flag, b->flag_value, help);
      } else if (std::string(k.name) == "pred-file") {
        sub->add_option(flag, b->list, help)->type_name("PATH");
      } else {
        sub->add_option(flag, b->value, help)->type_name(k.type == Type::kInt      ? "INT"
                                                         : k.type == Type::kDouble ? "NUM"
                                                                                   : "TEXT");
      }
      bound[name].push_back(std::move(b));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << error_json(ErrorCode::kConfig, e.what()).dump() << '\n';
    return kExitUsage;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    CLI::App* sub = app.get_subcommand(command);
    Settings settings;
    if (!replay_path.empty()) {
      std::ifstream in(replay_path, std::ios::binary);
      if (!in) throw Error(ErrorCode::kParse, "cannot open report '" + replay_path + "'");
      json report;
      try {
        in >> report;
      } catch (const json::exception& e) {
        throw Error(ErrorCode::kParse, "replay: " + std::string(e.what()));
      }
      if (report.value("command", "") != command) {
        throw Error(ErrorCode::kConfig, "replay: report was produced by '" + report.value("command", "?") + "'");
      }
      settings = settings_from_report(report);
    }
    if (!config_path.empty())
      for (auto& [k, v] : read_config_file(config_path)) settings[k] = v;
    for (const auto& b : bound[command]) {
      const std::string flag = std::string("--") + b->key->name;
      if (sub->get_option(flag)->count() == 0) continue;
      if (b->key->type == Type::kBool) {
        settings[b->key->name] = b->flag_value ? "true" : "false";
      } else if (!b->list.empty()) {
        std::string joined;
        for (const auto& s : b->list) joined += (joined.empty() ? "" : ",") + s;
        settings[b->key->name] = joined;
      } else {
        settings[b->key->name] = b->value;
      }
    }
    const RunOutput out = run(command, settings);
    if (out.report["config"]["out"].get<std::string>() == "-") std::cout << out.rendered;
    for (const auto& w : out.report["warnings"]) std::cerr << "warning: " << w.get<std::string>() << '\n';
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << error_json(e.code(), e.what()).dump() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << json{{"schema", kErrorSchema},
                      {"error", {{"code", "internal"}, {"message", e.what()}}},
                      {"exit_code", kExitInternal}}
                     .dump()
              << '\n';
    return kExitInternal;
  }
}

}  // namespace umlr::cli
