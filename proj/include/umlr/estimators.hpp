#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "umlr/core.hpp"
#include "umlr/diagnostics.hpp"
#include "umlr/learners.hpp"

namespace umlr {

enum class Estimator { kSLearner, kTLearner, kXLearner, kAipw, kDml, kPsmAtt };

const char* to_string(Estimator e);
Estimator parse_estimator(const std::string& s);  // accepts s, t, x, aipw, dml, psm and full names

struct NamedReport {
  std::string name;
  SpbReport report;
};

struct AteEstimate {
  Estimator estimator = Estimator::kTLearner;
  FitMode mode = FitMode::kMlr;
  std::string estimand = "ATE";  // "ATT" for psm_att
  double point = 0.0;
  bool has_ci = false;
  double ci_low = std::numeric_limits<double>::quiet_NaN();
  double ci_high = std::numeric_limits<double>::quiet_NaN();
  double level = 0.95;
  double std_error = std::numeric_limits<double>::quiet_NaN();  // analytic intervals only
  Index n_used = 0;
  std::vector<NamedReport> diagnostics;
  // Arm-model predictions over all units (outcome-regression estimators).
  Vector mu0_hat;
  Vector mu1_hat;
};

class PropensityModel {
 public:
  PropensityModel() = default;
  PropensityModel(double intercept, Vector coef, double lo, double hi);

  double intercept() const noexcept { return intercept_; }
  const Vector& coef() const noexcept { return coef_; }
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  int iterations = 0;

  // Linear predictor x'gamma + c, unclipped.
  Vector logit(const Matrix& x) const;
  // sigma(logit) clipped to [lo, hi].
  Vector predict(const Matrix& x) const;

 private:
  double intercept_ = 0.0;
  Vector coef_;
  double lo_ = 0.01;
  double hi_ = 0.99;
};

// L2-penalized logistic regression on standardized covariates (intercept
// unpenalized), damped Newton with backtracking.
PropensityModel fit_propensity(const Matrix& x, const Eigen::VectorXi& t, double l2 = 1.0,
                               double lo = 0.01, double hi = 0.99);

// mean_i [mu1_hat_i - mu0_hat_i]
double or_ate(const Vector& mu0_hat, const Vector& mu1_hat);

struct TLearnerResult {
  FittedModel mu0;
  FittedModel mu1;
  AteEstimate estimate;
};

struct SLearnerResult {
  FittedModel mu;
  AteEstimate estimate;
};

TLearnerResult t_learner(const Dataset& data, const LearnerConfig& cfg, FitMode mode);
// Separate configurations per arm (e.g. penalties already chosen).
TLearnerResult t_learner(const Dataset& data, const LearnerConfig& cfg_control,
                         const LearnerConfig& cfg_treated, FitMode mode);

SLearnerResult s_learner(const Dataset& data, const LearnerConfig& cfg, FitMode mode);

// Stage-one configurations and the two pseudo-outcome configurations, in the
// order (mu0, mu1, tau0, tau1).
struct XLearnerConfigs {
  LearnerConfig mu0, mu1, tau0, tau1;
};
struct XLearnerResult {
  XLearnerConfigs resolved;
  AteEstimate estimate;
};
XLearnerResult x_learner(const Dataset& data, const XLearnerConfigs& cfgs, FitMode mode,
                         const PropensityModel& prop);
AteEstimate x_learner(const Dataset& data, const LearnerConfig& cfg, FitMode mode,
                      const PropensityModel& prop);

// Per-unit AIPW scores mu1 - mu0 + t(y - mu1)/e - (1 - t)(y - mu0)/(1 - e).
// Throws kDivisionGuard if any e is outside (0, 1).
Vector aipw_scores(const Vector& y, const Eigen::VectorXi& t, const Vector& mu0_hat,
                   const Vector& mu1_hat, const Vector& e);

// Point = mean score; interval from the empirical score variance.
AteEstimate aipw(const Dataset& data, const Vector& mu0_hat, const Vector& mu1_hat, const Vector& e,
                 double level = 0.95);
AteEstimate aipw(const Dataset& data, const FittedModel& mu0, const FittedModel& mu1,
                 const PropensityModel& prop, double level = 0.95);

struct DmlOptions {
  int folds = 5;
  std::uint64_t seed = 0;
  double prop_l2 = 1.0;
  double clip_lo = 0.01;
  double clip_hi = 0.99;
  double level = 0.95;
  // When set, replaces the fitted propensity in every fold.
  std::optional<Vector> oracle_propensity;
};

// Fold k holds the units at positions k, k + K, ... of a seeded permutation.
std::vector<int> dml_fold_ids(Index n, int folds, std::uint64_t seed);

AteEstimate dml(const Dataset& data, const LearnerConfig& cfg, FitMode mode, const DmlOptions& opt);

struct MatchResult {
  std::vector<std::pair<Index, Index>> pairs;  // (treated row, control row)
  double caliper_width = 0.0;
};

// Greedy 1:1 nearest-neighbour matching without replacement on a score,
// treated units in descending score order, ties by row index.
MatchResult match_on_score(const Vector& score, const Eigen::VectorXi& t, double caliper);

AteEstimate psm_att(const Dataset& data, const Vector& logit_score, double caliper = 0.2,
                    double level = 0.95);
AteEstimate psm_att(const Dataset& data, const PropensityModel& prop, double caliper = 0.2,
                    double level = 0.95);

struct BootstrapInterval {
  double ci_low = 0.0;
  double ci_high = 0.0;
  int failures = 0;
  int resamples = 0;
};

using DatasetStatistic = std::function<double(const Dataset&)>;

// Case-resampling percentile interval. Resample b draws from
// make_engine(seed, {bootstrap, b}).
BootstrapInterval bootstrap_ci(const Dataset& data, const DatasetStatistic& statistic, int B,
                               double level, std::uint64_t seed);

// Everything needed to run one estimator end to end.
struct EstimateOptions {
  LearnerConfig learner;
  FitMode mode = FitMode::kMlr;
  double prop_l2 = 1.0;
  double clip_lo = 0.01;
  double clip_hi = 0.99;
  int folds = 5;
  double caliper = 0.2;
  int bootstrap_b = 200;
  double level = 0.95;
  bool with_ci = true;
  std::uint64_t seed = 0;
  std::optional<Vector> oracle_propensity;  // aipw and dml
};

// Full-sample fit plus interval: bootstrap for S/T/X (penalties frozen from
// the full-sample fit), analytic for AIPW, DML and PSM.
AteEstimate estimate(Estimator which, const Dataset& data, const EstimateOptions& opt);

// Normal quantile for a two-sided interval at `level`.
double normal_quantile_two_sided(double level);

}  // namespace umlr
