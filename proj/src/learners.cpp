#include "umlr/learners.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gbt.hpp"
#include "linear.hpp"

namespace umlr {

const char* to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kRidge: return "ridge";
    case LearnerKind::kLasso: return "lasso";
    case LearnerKind::kGbt: return "gbt";
  }
  return "?";
}

const char* to_string(FitMode mode) { return mode == FitMode::kMlr ? "mlr" : "umlr"; }

const char* to_string(UmlrRoute route) {
  switch (route) {
    case UmlrRoute::kAuto: return "auto";
    case UmlrRoute::kExact: return "exact";
    case UmlrRoute::kAnchor: return "anchor";
  }
  return "?";
}

LearnerKind parse_learner_kind(const std::string& s) {
  if (s == "ridge") return LearnerKind::kRidge;
  if (s == "lasso") return LearnerKind::kLasso;
  if (s == "gbt") return LearnerKind::kGbt;
  throw Error(ErrorCode::kConfig, "unknown learner '" + s + "' (expected ridge, lasso or gbt)");
}

FitMode parse_fit_mode(const std::string& s) {
  if (s == "mlr") return FitMode::kMlr;
  if (s == "umlr") return FitMode::kUmlr;
  throw Error(ErrorCode::kConfig, "unknown mode '" + s + "' (expected mlr or umlr)");
}

UmlrRoute parse_umlr_route(const std::string& s) {
  if (s == "auto") return UmlrRoute::kAuto;
  if (s == "exact") return UmlrRoute::kExact;
  if (s == "anchor") return UmlrRoute::kAnchor;
  throw Error(ErrorCode::kConfig, "unknown umlr route '" + s + "' (expected auto, exact or anchor)");
}

void LearnerConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::kConfig, "lambda must be finite and >= 0");
  }
  if (cv_folds == 1 || cv_folds < 0) throw Error(ErrorCode::kConfig, "cv_folds must be 0 or >= 2");
  if (gbt.n_trees < 1) throw Error(ErrorCode::kConfig, "gbt tree count must be >= 1");
  if (gbt.max_depth < 1) throw Error(ErrorCode::kConfig, "gbt max depth must be >= 1");
  if (!(gbt.learning_rate > 0.0 && gbt.learning_rate <= 1.0)) {
    throw Error(ErrorCode::kConfig, "gbt learning rate must lie in (0, 1]");
  }
  if (gbt.min_samples_leaf < 1) throw Error(ErrorCode::kConfig, "gbt min leaf size must be >= 1");
  if (!(linear_constraint_tol > 0.0) || !(gbt_constraint_tol > 0.0) || !(lasso_update_tol > 0.0)) {
    throw Error(ErrorCode::kConfig, "tolerances must be > 0");
  }
  if (max_sweeps < 1) throw Error(ErrorCode::kConfig, "max_sweeps must be >= 1");
  if (kind == LearnerKind::kGbt && umlr_route == UmlrRoute::kExact) {
    throw Error(ErrorCode::kConfig, "umlr route 'exact' requires a linear learner");
  }
}

UmlrRoute LearnerConfig::resolved_route() const {
  if (umlr_route != UmlrRoute::kAuto) return umlr_route;
  return is_linear() ? UmlrRoute::kExact : UmlrRoute::kAnchor;
}

FittedModel::FittedModel(LearnerConfig config, FitMode mode, Index p,
                         std::variant<LinearParams, TreeEnsemble> params)
    : config_(std::move(config)), mode_(mode), p_(p), params_(std::move(params)) {}

Vector FittedModel::predict_base(const Matrix& x) const {
  if (x.cols() != p_) {
    throw Error(ErrorCode::kDimensionMismatch, "predict: expected " + std::to_string(p_) +
                                                   " columns, got " + std::to_string(x.cols()));
  }
  if (const auto* lin = std::get_if<LinearParams>(&params_)) {
    return (x * lin->coef).array() + lin->intercept;
  }
  return gbt::predict(std::get<TreeEnsemble>(params_), x);
}

Vector FittedModel::predict(const Matrix& x) const {
  Vector out = predict_base(x);
  if (anchoring_) out = anchoring_->a + anchoring_->b * out.array();
  return out;
}

FittedModel FittedModel::with_anchoring(Anchoring anchoring, GroupResidualSums sums) const {
  FittedModel out = *this;
  out.anchoring_ = anchoring;
  out.sums_ = sums;
  out.mode_ = FitMode::kUmlr;
  return out;
}

FittedModel FittedModel::with_group_sums(GroupResidualSums sums, FitMode mode) const {
  FittedModel out = *this;
  out.sums_ = sums;
  out.mode_ = mode;
  return out;
}

namespace {

void check_training_data(const Matrix& x, const Vector& y) {
  if (x.rows() != y.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "fit: X has " + std::to_string(x.rows()) +
                                                   " rows but y has " + std::to_string(y.size()));
  }
  if (x.rows() < 2 || x.cols() < 1) throw Error(ErrorCode::kInvalidInput, "fit: need n >= 2, p >= 1");
  if (!all_finite(x) || !all_finite(y)) {
    throw Error(ErrorCode::kInvalidInput, "fit: non-finite value in X or y");
  }
}

linear::LassoControl lasso_control(const LearnerConfig& config, const Vector& y) {
  linear::LassoControl c;
  c.lambda = config.lambda;
  c.update_tol = config.lasso_update_tol;
  c.max_sweeps = config.max_sweeps;
  c.constraint_tol = constraint_tolerance(config, y);
  return c;
}

}  // namespace

double constraint_tolerance(const LearnerConfig& config, const Vector& y) {
  const double scale = static_cast<double>(y.size()) * std::sqrt(variance(y));
  const double rel = config.is_linear() ? config.linear_constraint_tol : config.gbt_constraint_tol;
  return rel * std::max(scale, 1e-300);
}

GroupResidualSums group_residual_sums(const Vector& pred, const Vector& y,
                                      const SplitIndices& split) {
  GroupResidualSums s;
  for (Index i : split.r1) s.r1 += pred[i] - y[i];
  for (Index i : split.r2) s.r2 += pred[i] - y[i];
  return s;
}

FittedModel fit(const LearnerConfig& config, const Matrix& x, const Vector& y) {
  config.validate();
  check_training_data(x, y);
  const LearnerConfig cfg = resolve_lambda(config, x, y);
  switch (cfg.kind) {
    case LearnerKind::kRidge:
      return FittedModel(cfg, FitMode::kMlr, x.cols(), linear::ridge(x, y, cfg.lambda));
    case LearnerKind::kLasso:
      return FittedModel(cfg, FitMode::kMlr, x.cols(), linear::lasso(x, y, lasso_control(cfg, y)));
    case LearnerKind::kGbt:
      return FittedModel(cfg, FitMode::kMlr, x.cols(), gbt::fit(cfg.gbt, x, y));
  }
  throw Error(ErrorCode::kConfig, "fit: unknown learner");
}

FittedModel fit_constrained_linear(const LearnerConfig& config, const Matrix& x, const Vector& y,
                                   const SplitIndices& split) {
  config.validate();
  if (!config.is_linear()) {
    throw Error(ErrorCode::kConfig, "fit_constrained_linear: learner must be ridge or lasso");
  }
  check_training_data(x, y);
  validate_split(split, x.rows());
  const LearnerConfig cfg = resolve_lambda(config, x, y);
  LinearParams params = cfg.kind == LearnerKind::kRidge
                            ? linear::ridge(x, y, cfg.lambda, &split)
                            : linear::lasso(x, y, lasso_control(cfg, y), &split);
  FittedModel model(cfg, FitMode::kUmlr, x.cols(), std::move(params));
  return model.with_group_sums(group_residual_sums(model.predict(x), y, split), FitMode::kUmlr);
}

FittedModel anchor_recalibrate(const FittedModel& base, const Matrix& x_train,
                               const Vector& y_train, const SplitIndices& split) {
  check_training_data(x_train, y_train);
  validate_split(split, x_train.rows());
  const Vector f = base.predict_base(x_train);
  const double n1 = static_cast<double>(split.r1.size());
  const double n2 = static_cast<double>(split.r2.size());
  double f1 = 0.0, f2 = 0.0, y1 = 0.0, y2 = 0.0;
  for (Index i : split.r1) {
    f1 += f[i];
    y1 += y_train[i];
  }
  for (Index i : split.r2) {
    f2 += f[i];
    y2 += y_train[i];
  }
  // n1*a + b*f1 = y1, n2*a + b*f2 = y2; the determinant is n1*n2 times the
  // gap between the group mean predictions.
  const double gap = f2 / n2 - f1 / n1;
  const double spread = std::max({std::abs(f1 / n1), std::abs(f2 / n2), 1e-300});
  if (!(std::abs(gap) > 1e-12 * spread)) {
    throw Error(ErrorCode::kRecalibrationSingular,
                "anchor_recalibrate: mean base prediction is the same in both groups");
  }
  Anchoring anc;
  anc.b = (y2 / n2 - y1 / n1) / gap;
  anc.a = y1 / n1 - anc.b * f1 / n1;
  const Vector pred = anc.a + anc.b * f.array();
  return base.with_anchoring(anc, group_residual_sums(pred, y_train, split));
}

Vector predict(const FittedModel& model, const Matrix& x) { return model.predict(x); }

FittedModel fit_model(const LearnerConfig& config, const Matrix& x, const Vector& y, FitMode mode) {
  if (mode == FitMode::kMlr) return fit(config, x, y);
  const SplitIndices split = partition_by_mean(y);
  config.validate();
  if (config.resolved_route() == UmlrRoute::kExact) {
    return fit_constrained_linear(config, x, y, split);
  }
  return anchor_recalibrate(fit(config, x, y), x, y, split);
}

double lasso_lambda_max(const Matrix& x, const Vector& y) {
  check_training_data(x, y);
  const linear::Standardized s = linear::standardize(x, y);
  if (s.z.cols() == 0) return 0.0;
  return (s.z.transpose() * s.yc).cwiseAbs().maxCoeff() / static_cast<double>(x.rows());
}

LearnerConfig resolve_lambda(const LearnerConfig& config, const Matrix& x, const Vector& y) {
  if (config.cv_folds < 2 || !config.is_linear()) {
    LearnerConfig out = config;
    out.cv_folds = 0;
    return out;
  }
  LearnerConfig out = config;
  out.lambda = linear::cv_lambda(config.kind, x, y, config.cv_folds, config.cv_seed,
                                 lasso_control(config, y));
  out.cv_folds = 0;
  return out;
}

}  // namespace umlr
