#pragma once

// Solvers behind the ridge and lasso learners. Everything here works on
// standardized, centered columns; the intercept is never penalized.

#include <cstdint>

#include "umlr/core.hpp"
#include "umlr/learners.hpp"

namespace umlr::linear {

struct Standardized {
  Vector mean;                // per original column
  Vector scale;               // population sd per original column
  std::vector<Index> active;  // columns with nonzero spread
  Matrix z;                   // n x active.size(), centered and scaled
  double y_mean = 0.0;
  Vector yc;                  // centered outcome
};

Standardized standardize(const Matrix& x, const Vector& y);

// beta is on the standardized scale for the active columns; offset is the
// intercept shift relative to the outcome mean.
LinearParams to_original(const Standardized& s, const Vector& beta, double offset, Index p);

LinearParams ridge(const Matrix& x, const Vector& y, double lambda,
                   const SplitIndices* split = nullptr);

struct LassoControl {
  double lambda = 0.1;
  double update_tol = 1e-7;
  int max_sweeps = 100000;
  // Group-sum target for the constrained variant, in outcome units.
  double constraint_tol = 0.0;
};

LinearParams lasso(const Matrix& x, const Vector& y, const LassoControl& control,
                   const SplitIndices* split = nullptr);

// Coordinate descent on standardized columns, warm-started from beta.
// Returns the number of sweeps used.
int lasso_cd(const Matrix& z, const Vector& yc, double lambda, double tol, int max_sweeps,
             Vector& beta);

// K-fold cross-validated penalty over a fixed log grid; ties resolve to the
// larger lambda.
double cv_lambda(LearnerKind kind, const Matrix& x, const Vector& y, int folds,
                 std::uint64_t seed, const LassoControl& control);

}  // namespace umlr::linear
