#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "umlr/core.hpp"

namespace umlr {

enum class LearnerKind { kRidge, kLasso, kGbt };
enum class FitMode { kMlr, kUmlr };

// How a umlr-mode model meets the two mean-anchoring constraints.
//   kExact  - equality-constrained fit (linear kinds only)
//   kAnchor - base fit followed by the affine a + b*f(x) layer
//   kAuto   - kExact for ridge/lasso, kAnchor for gbt
enum class UmlrRoute { kAuto, kExact, kAnchor };

const char* to_string(LearnerKind kind);
const char* to_string(FitMode mode);
const char* to_string(UmlrRoute route);
LearnerKind parse_learner_kind(const std::string& s);
FitMode parse_fit_mode(const std::string& s);
UmlrRoute parse_umlr_route(const std::string& s);

struct GbtParams {
  int n_trees = 200;
  int max_depth = 3;
  double learning_rate = 0.1;
  int min_samples_leaf = 5;
};

struct LearnerConfig {
  LearnerKind kind = LearnerKind::kRidge;
  // Penalty weight on standardized coefficients. Ridge minimizes
  // (1/2n)|r|^2 + (lambda/2)|b|^2, lasso (1/2n)|r|^2 + lambda|b|_1.
  double lambda = 0.1;
  // >= 2: pick lambda by K-fold cross-validation before fitting.
  int cv_folds = 0;
  std::uint64_t cv_seed = 0;
  GbtParams gbt;
  UmlrRoute umlr_route = UmlrRoute::kAuto;

  double linear_constraint_tol = 1e-8;  // x n x sd(y)
  double gbt_constraint_tol = 1e-6;     // x n x sd(y)
  double lasso_update_tol = 1e-7;
  int max_sweeps = 100000;

  void validate() const;
  bool is_linear() const { return kind != LearnerKind::kGbt; }
  UmlrRoute resolved_route() const;
};

struct LinearParams {
  double intercept = 0.0;
  Vector coef;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;
  double predict_row(const Matrix& x, Index row) const;
};

struct TreeEnsemble {
  double base = 0.0;
  double learning_rate = 0.1;
  std::vector<Tree> trees;
  // Training MSE after round m (index 0 = constant base prediction).
  std::vector<double> train_mse;
};

struct Anchoring {
  double a = 0.0;
  double b = 1.0;
};

struct GroupResidualSums {
  double r1 = 0.0;
  double r2 = 0.0;
};

class FittedModel {
 public:
  FittedModel(LearnerConfig config, FitMode mode, Index p,
              std::variant<LinearParams, TreeEnsemble> params);

  const LearnerConfig& config() const noexcept { return config_; }
  FitMode mode() const noexcept { return mode_; }
  Index p() const noexcept { return p_; }
  const std::variant<LinearParams, TreeEnsemble>& params() const noexcept { return params_; }
  const std::optional<Anchoring>& anchoring() const noexcept { return anchoring_; }
  // Present when the model was fit or recalibrated against a split.
  const std::optional<GroupResidualSums>& train_group_sums() const noexcept { return sums_; }

  // Prediction before the anchoring layer.
  Vector predict_base(const Matrix& x) const;
  Vector predict(const Matrix& x) const;

  FittedModel with_anchoring(Anchoring anchoring, GroupResidualSums sums) const;
  FittedModel with_group_sums(GroupResidualSums sums, FitMode mode) const;

 private:
  LearnerConfig config_;
  FitMode mode_;
  Index p_;
  std::variant<LinearParams, TreeEnsemble> params_;
  std::optional<Anchoring> anchoring_;
  std::optional<GroupResidualSums> sums_;
};

// Unconstrained penalized fit; mode = mlr.
FittedModel fit(const LearnerConfig& config, const Matrix& x, const Vector& y);

// Equality-constrained ridge/lasso: both group residual sums vanish on the
// training data.
FittedModel fit_constrained_linear(const LearnerConfig& config, const Matrix& x, const Vector& y,
                                   const SplitIndices& split);

// Affine layer a + b*base(x) solving the two anchoring equations exactly.
FittedModel anchor_recalibrate(const FittedModel& base, const Matrix& x_train,
                               const Vector& y_train, const SplitIndices& split);

Vector predict(const FittedModel& model, const Matrix& x);

// mlr: fit. umlr: partition_by_mean(y) then the configured route.
FittedModel fit_model(const LearnerConfig& config, const Matrix& x, const Vector& y, FitMode mode);

GroupResidualSums group_residual_sums(const Vector& pred, const Vector& y,
                                      const SplitIndices& split);
// Allowed magnitude of each group sum for a umlr model of this kind.
double constraint_tolerance(const LearnerConfig& config, const Vector& y);

// Smallest lasso lambda with an all-zero solution, on standardized X.
double lasso_lambda_max(const Matrix& x, const Vector& y);

// With cv_folds >= 2, returns a copy with lambda set by K-fold CV (mean
// squared validation error over a log grid) and cv_folds = 0. Otherwise
// returns the config unchanged.
LearnerConfig resolve_lambda(const LearnerConfig& config, const Matrix& x, const Vector& y);

}  // namespace umlr
