#include "umlr/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "umlr/kernels.hpp"

namespace umlr {

double ols_slope(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kDimensionMismatch, "slope: length mismatch");
  if (a.size() < 2) throw Error(ErrorCode::kUndefinedSlope, "slope: need at least 2 points");
  const Vector ac = a.array() - mean(a);
  const Vector bc = b.array() - mean(b);
  const auto n = static_cast<std::size_t>(a.size());
  const double saa = kernels::active().sum_sq(ac.data(), n);
  const double scale = kernels::active().sum_sq(a.data(), n);
  if (!(saa > 1e-28 * std::max(scale, 1e-300))) {
    throw Error(ErrorCode::kUndefinedSlope, "slope: reference values are constant");
  }
  return kernels::active().dot(ac.data(), bc.data(), n) / saa;
}

SpbReport estimate_eta(const Vector& y, const Vector& y_hat) {
  if (y.size() != y_hat.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "estimate_eta: y has " + std::to_string(y.size()) +
                                                   " entries, y_hat " + std::to_string(y_hat.size()));
  }
  if (y.size() < 3) throw Error(ErrorCode::kInvalidInput, "estimate_eta: need at least 3 pairs");
  if (!all_finite(y) || !all_finite(y_hat)) {
    throw Error(ErrorCode::kInvalidInput, "estimate_eta: non-finite value");
  }
  SpbReport r;
  r.n = y.size();
  r.eta_hat = ols_slope(y, y_hat);
  r.spb_metric = 1.0 - r.eta_hat;
  r.intercept = mean(y_hat) - r.eta_hat * mean(y);

  const Vector resid = y_hat - y;
  const auto n = static_cast<std::size_t>(y.size());
  const auto& k = kernels::active();
  r.rmse = std::sqrt(k.sum_sq(resid.data(), n) / static_cast<double>(n));
  r.mae = resid.cwiseAbs().sum() / static_cast<double>(n);

  const Vector yc = y.array() - mean(y);
  const Vector ec = resid.array() - mean(resid);
  const double see = k.sum_sq(ec.data(), n);
  const double syy = k.sum_sq(yc.data(), n);
  const double ref = std::max(k.sum_sq(resid.data(), n), k.sum_sq(y.data(), n));
  if (see > 1e-28 * ref && syy > 0.0) {
    r.resid_cor = std::clamp(k.dot(yc.data(), ec.data(), n) / std::sqrt(see * syy), -1.0, 1.0);
  }
  return r;
}

SpbReport evaluate_predictions(const Vector& y, const Vector& y_hat) { return estimate_eta(y, y_hat); }

void BiasInputs::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(pi)) throw Error(ErrorCode::kInvalidInput, "bias inputs: pi must lie in [0, 1]");
  if (!in_unit(eta_1_0) || !in_unit(eta_0_1)) {
    throw Error(ErrorCode::kInvalidInput, "bias inputs: slopes must lie in [0, 1]");
  }
  if (!(w1 > 0.0 && w1 <= 1.0) || !(w0 > 0.0 && w0 <= 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "bias inputs: weights must lie in (0, 1]");
  }
  for (double v : {mu1_1, mu1_0, mu0_1, mu0_0}) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidInput, "bias inputs: non-finite mean");
  }
}

double shrinkage_bias(const BiasInputs& in) {
  in.validate();
  return (1.0 - in.pi) * (1.0 - in.eta_1_0) * in.w1 * (in.mu1_1 - in.mu1_0) +
         in.pi * (1.0 - in.eta_0_1) * in.w0 * (in.mu0_1 - in.mu0_0);
}

CounterfactualSlopes counterfactual_slopes(const std::optional<OracleSurfaces>& oracle,
                                           const Vector& mu0_hat, const Vector& mu1_hat,
                                           const Eigen::VectorXi& t) {
  if (!oracle) {
    throw Error(ErrorCode::kUnavailable,
                "counterfactual slopes need oracle outcome surfaces (simulation only)");
  }
  const Index n = t.size();
  if (oracle->mu0.size() != n || oracle->mu1.size() != n || mu0_hat.size() != n ||
      mu1_hat.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "counterfactual slopes: length mismatch");
  }
  std::vector<Index> arm[2];
  for (Index i = 0; i < n; ++i) arm[t[i] == 1 ? 1 : 0].push_back(i);
  if (arm[0].empty() || arm[1].empty()) {
    throw Error(ErrorCode::kArmTooSmall, "counterfactual slopes: both arms must be nonempty");
  }
  auto slope = [&](const Vector& truth, const Vector& pred, int s) {
    return ols_slope(select_rows(truth, arm[s]), select_rows(pred, arm[s]));
  };
  CounterfactualSlopes out;
  out.eta_1_1 = slope(oracle->mu1, mu1_hat, 1);
  out.eta_1_0 = slope(oracle->mu1, mu1_hat, 0);
  out.eta_0_0 = slope(oracle->mu0, mu0_hat, 0);
  out.eta_0_1 = slope(oracle->mu0, mu0_hat, 1);
  return out;
}

CounterfactualSlopes counterfactual_slopes(const std::optional<OracleSurfaces>& oracle,
                                           const FittedModel& mu0_model,
                                           const FittedModel& mu1_model, const Dataset& data) {
  if (!oracle) {
    throw Error(ErrorCode::kUnavailable,
                "counterfactual slopes need oracle outcome surfaces (simulation only)");
  }
  return counterfactual_slopes(oracle, mu0_model.predict(data.x()), mu1_model.predict(data.x()),
                               data.t());
}

}  // namespace umlr
