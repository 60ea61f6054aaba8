#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "umlr/core.hpp"
#include "umlr/diagnostics.hpp"
#include "umlr/estimators.hpp"

namespace umlr {

// How the active components of gamma, beta0, beta1 are placed.
//   kIndependent - each vector draws its own s indices
//   kShared      - one index set for all three vectors
enum class SupportScheme { kIndependent, kShared };
// kRandom: each active value is +scale or -scale with equal probability.
enum class SignScheme { kRandom, kPositive };

const char* to_string(SupportScheme s);
const char* to_string(SignScheme s);
SupportScheme parse_support_scheme(const std::string& s);
SignScheme parse_sign_scheme(const std::string& s);

// X ~ N(0, I_p); T | X ~ Bernoulli(sigma(X'gamma)); Y(t) = mu_t + X'beta_t + eps.
struct DgpConfig {
  Index n = 1000;
  Index p = 200;
  Index s = 10;
  double mu1 = 2.0;
  double mu0 = 0.0;
  double beta_scale = 0.5;
  double gamma_scale = 0.5;
  double sigma = 1.0;
  std::uint64_t seed = 0;
  SupportScheme support = SupportScheme::kIndependent;
  SignScheme signs = SignScheme::kRandom;
  bool equal_betas = false;            // beta1 := beta0
  bool independent_arm_noise = false;  // separate eps for Y(0) and Y(1)

  void validate() const;
};

struct DgpCoefficients {
  Vector gamma;
  Vector beta0;
  Vector beta1;
};

// Drawn once per configuration from (seed, coefficients stream); shared by
// every replicate.
DgpCoefficients draw_coefficients(const DgpConfig& cfg);

struct SimReplicate {
  Dataset data;
  Vector propensity;  // sigma(X'gamma)
  Vector mu0_star;
  Vector mu1_star;
  Vector y0;
  Vector y1;
  Vector tau;
  double true_ate = 0.0;
  double true_att = 0.0;

  OracleSurfaces oracle() const { return OracleSurfaces{mu0_star, mu1_star}; }
};

SimReplicate generate_replicate(const DgpConfig& cfg, int rep_index);
SimReplicate generate_replicate(const DgpConfig& cfg, const DgpCoefficients& coef, int rep_index);

struct InjectedPredictions {
  Vector mu0_hat;
  Vector mu1_hat;
};

// Oracle-shrunk arm predictions. The arm-t model has slope eta_in toward the
// arm-t mean of mu_t* on its own arm, and slope eta_out toward
// w * (own-arm mean) + (1 - w) * (other-arm mean) on the other arm.
InjectedPredictions inject_spb(const SimReplicate& rep, double eta_in, double eta_out, double w);

// Population treated share and arm-stratum means of mu_t*, by one-dimensional
// quadrature over Z = X'gamma.
struct PopulationMoments {
  double pi = 0.5;
  double mu1_1 = 0.0;
  double mu1_0 = 0.0;
  double mu0_1 = 0.0;
  double mu0_0 = 0.0;
};
PopulationMoments population_moments(const DgpConfig& cfg, const DgpCoefficients& coef);

// Difference of means of the potential outcomes under a fresh fair-coin
// assignment; an unconfounded reference for the observational estimators.
double rct_oracle_estimate(const SimReplicate& rep, std::uint64_t seed, int rep_index);

// ---------------------------------------------------------------- harness

struct ScenarioEntry {
  Estimator estimator = Estimator::kTLearner;
  FitMode mode = FitMode::kMlr;
};

struct McOptions {
  int reps = 100;
  std::uint64_t seed = 0;  // estimator-side randomness (bootstrap, folds)
  EstimateOptions estimate;  // learner and estimator settings; mode/seed overridden
  bool oracle_propensity = false;
  bool rct_oracle = false;  // add the rct_oracle reference row
  int threads = 0;          // 0: UMLR_THREADS or hardware concurrency
};

struct ReplicateRecord {
  int rep = 0;
  std::string estimator;
  std::string mode;
  double true_value = 0.0;  // ATE, or ATT for psm_att
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool has_ci = false;
  bool failed = false;
  std::string error;
  std::optional<CounterfactualSlopes> slopes;
};

struct McSummary {
  std::string estimator;
  std::string mode;
  std::string estimand;
  int reps = 0;
  int failures = 0;
  bool valid = true;  // failures <= 5% of reps
  double mean_true = 0.0;
  double mean_bias = 0.0;
  double mc_se = 0.0;  // of mean_bias
  double bias_pct_signed = 0.0;
  double bias_pct_signed_se = 0.0;
  double bias_pct_abs = 0.0;
  double bias_pct_abs_se = 0.0;
  double rmse = 0.0;
  double coverage = 0.0;
  double coverage_se = 0.0;
  int ci_count = 0;
  std::optional<CounterfactualSlopes> mean_slopes;
};

struct McResult {
  std::vector<McSummary> summaries;
  std::vector<ReplicateRecord> records;  // replicate-major, scenario order within
};

int resolve_thread_count(int requested);

// Runs f(rep) for rep in [0, reps) on a worker pool; results land by index.
void parallel_for(int count, int threads, const std::function<void(int)>& f);

McResult run_monte_carlo(const DgpConfig& cfg, const std::vector<ScenarioEntry>& scenario,
                         const McOptions& opt);

// Aggregates one estimator/mode group of records.
McSummary summarize(const std::vector<ReplicateRecord>& records);

struct SweepRow {
  Index n = 0;
  double sigma = 0.0;
  McResult result;
};

// AIPW with the true propensity over an (n, sigma) grid, for each mode in
// `modes`, with the rct_oracle reference row.
std::vector<SweepRow> aipw_sweep(const std::vector<Index>& n_grid,
                                        const std::vector<double>& sigma_grid,
                                        const DgpConfig& base, const std::vector<FitMode>& modes,
                                        const McOptions& opt);

// Injected-shrinkage study: per replicate, the outcome-regression and AIPW
// (true propensity) errors computed from inject_spb predictions.
struct InjectedStudy {
  int reps = 0;
  double mean_or_bias = 0.0;
  double or_mc_se = 0.0;
  double mean_aipw_bias = 0.0;
  double aipw_mc_se = 0.0;
  double mean_diff = 0.0;  // aipw - or, paired
  double diff_mc_se = 0.0;
  double population_bias = 0.0;  // closed form at population moments
  // Largest per-replicate gap between the OR error and the closed form
  // evaluated at that replicate's own sample moments.
  double max_sample_identity_gap = 0.0;
};

InjectedStudy run_injected_spb(const DgpConfig& cfg, int reps, double eta_in, double eta_out,
                               double w, int threads = 0);

}  // namespace umlr
