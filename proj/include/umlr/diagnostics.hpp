#pragma once

#include <optional>

#include "umlr/core.hpp"
#include "umlr/learners.hpp"

namespace umlr {

// Shrinkage summary of predictions y_hat against outcomes y.
struct SpbReport {
  double eta_hat = 0.0;     // OLS slope of y_hat on y
  double spb_metric = 0.0;  // 1 - eta_hat
  double intercept = 0.0;
  double resid_cor = 0.0;   // Cor(y, y_hat - y); 0 when the residual is constant
  double rmse = 0.0;
  double mae = 0.0;
  Index n = 0;
};

// Requires equal lengths >= 3 and var(y) > 0 (kUndefinedSlope otherwise).
SpbReport estimate_eta(const Vector& y, const Vector& y_hat);
SpbReport evaluate_predictions(const Vector& y, const Vector& y_hat);

// Inputs of the closed-form outcome-regression bias under linear shrinkage.
struct BiasInputs {
  double pi = 0.5;       // P(T = 1)
  double eta_1_0 = 1.0;  // slope of the treated-arm model on control units
  double eta_0_1 = 1.0;  // slope of the control-arm model on treated units
  double w1 = 1.0;
  double w0 = 1.0;
  double mu1_1 = 0.0;  // mean of mu_1* over treated units
  double mu1_0 = 0.0;  // mean of mu_1* over control units
  double mu0_1 = 0.0;  // mean of mu_0* over treated units
  double mu0_0 = 0.0;  // mean of mu_0* over control units

  void validate() const;
};

// Outcome-regression ATE bias implied by counterfactual shrinkage.
double shrinkage_bias(const BiasInputs& in);

// Per-arm oracle surfaces mu_t*(X_i). Simulation only; realized potential
// outcomes Y_i(t) may be supplied instead.
struct OracleSurfaces {
  Vector mu0;
  Vector mu1;
};

// eta_t_s: slope of arm-t model predictions on mu_t* over units with T = s.
struct CounterfactualSlopes {
  double eta_1_1 = 0.0;
  double eta_1_0 = 0.0;
  double eta_0_0 = 0.0;
  double eta_0_1 = 0.0;
};

CounterfactualSlopes counterfactual_slopes(const std::optional<OracleSurfaces>& oracle,
                                           const Vector& mu0_hat, const Vector& mu1_hat,
                                           const Eigen::VectorXi& t);
CounterfactualSlopes counterfactual_slopes(const std::optional<OracleSurfaces>& oracle,
                                           const FittedModel& mu0_model,
                                           const FittedModel& mu1_model, const Dataset& data);

// Plain OLS slope of b on a; kUndefinedSlope when var(a) = 0.
double ols_slope(const Vector& a, const Vector& b);

}  // namespace umlr
