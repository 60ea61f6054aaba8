#include "linear.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "umlr/kernels.hpp"
#include "umlr/rng.hpp"

namespace umlr::linear {
namespace {

double soft_threshold(double value, double lambda) {
  if (value > lambda) return value - lambda;
  if (value < -lambda) return value + lambda;
  return 0.0;
}

// Row-sum of z over a group, divided by n.
Vector group_mean_row(const Matrix& z, const std::vector<Index>& rows, double n) {
  Vector out = Vector::Zero(z.cols());
  for (Index i : rows) out += z.row(i).transpose();
  return out / n;
}

double group_sum(const Vector& v, const std::vector<Index>& rows) {
  double acc = 0.0;
  for (Index i : rows) acc += v[i];
  return acc;
}

}  // namespace

Standardized standardize(const Matrix& x, const Vector& y) {
  Standardized s;
  const Index n = x.rows();
  const double nd = static_cast<double>(n);
  s.mean = x.colwise().sum().transpose() / nd;
  s.scale.resize(x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean[j]).square().sum() / nd;
    s.scale[j] = std::sqrt(var);
    const double ref = std::max(1.0, std::abs(s.mean[j]));
    if (s.scale[j] > 1e-12 * ref) s.active.push_back(j);
  }
  s.z.resize(n, static_cast<Index>(s.active.size()));
  for (std::size_t k = 0; k < s.active.size(); ++k) {
    const Index j = s.active[k];
    s.z.col(static_cast<Index>(k)) = (x.col(j).array() - s.mean[j]) / s.scale[j];
  }
  s.y_mean = mean(y);
  s.yc = y.array() - s.y_mean;
  return s;
}

LinearParams to_original(const Standardized& s, const Vector& beta, double offset, Index p) {
  LinearParams out;
  out.coef = Vector::Zero(p);
  out.intercept = s.y_mean + offset;
  for (std::size_t k = 0; k < s.active.size(); ++k) {
    const Index j = s.active[k];
    const double c = beta[static_cast<Index>(k)] / s.scale[j];
    out.coef[j] = c;
    out.intercept -= c * s.mean[j];
  }
  return out;
}

LinearParams ridge(const Matrix& x, const Vector& y, double lambda, const SplitIndices* split) {
  const Standardized s = standardize(x, y);
  const Index n = x.rows();
  const double nd = static_cast<double>(n);
  const Index q = s.z.cols();

  Matrix h = Matrix::Zero(q, q);
  h.selfadjointView<Eigen::Lower>().rankUpdate(s.z.transpose(), 1.0 / nd);
  h.diagonal().array() += lambda;
  const Vector c = s.z.transpose() * s.yc / nd;

  Eigen::LLT<Matrix, Eigen::Lower> llt;
  Vector beta = Vector::Zero(q);
  if (q > 0) {
    llt.compute(h);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
      throw Error(ErrorCode::kSingularSystem,
                  "ridge: penalized normal equations are singular (lambda = 0 with a "
                  "rank-deficient design?)");
    }
    beta = llt.solve(c);
  }
  if (split == nullptr) return to_original(s, beta, 0.0, x.cols());

  // Stationarity system of the equality-constrained problem over
  // theta = (offset, beta), Hessian diag(1, H), two multipliers. Solved
  // through its 2x2 Schur complement.
  validate_split(*split, n);
  const std::vector<Index>* groups[2] = {&split->r1, &split->r2};
  Matrix cmat(2, q + 1);
  Vector d(2);
  for (int g = 0; g < 2; ++g) {
    cmat(g, 0) = static_cast<double>(groups[g]->size()) / nd;
    cmat.row(g).tail(q) = group_mean_row(s.z, *groups[g], nd).transpose();
    d[g] = group_sum(s.yc, *groups[g]) / nd;
  }
  Matrix hinv_ct(q + 1, 2);
  hinv_ct.row(0) = cmat.col(0).transpose();
  if (q > 0) hinv_ct.bottomRows(q) = llt.solve(cmat.rightCols(q).transpose());
  const Eigen::Matrix2d schur = cmat * hinv_ct;
  const double scale = schur.cwiseAbs().maxCoeff();
  if (!(scale > 0.0) || std::abs(schur.determinant()) < 1e-13 * scale * scale) {
    throw Error(ErrorCode::kSingularSystem,
                "constrained ridge: anchoring constraints are linearly dependent "
                "(group mean covariates coincide)");
  }
  Vector theta0(q + 1);
  theta0[0] = 0.0;
  theta0.tail(q) = beta;
  const Eigen::Vector2d nu = schur.partialPivLu().solve(cmat * theta0 - d);
  const Vector theta = theta0 - hinv_ct * nu;
  return to_original(s, theta.tail(q), theta[0], x.cols());
}

int lasso_cd(const Matrix& z, const Vector& yc, double lambda, double tol, int max_sweeps,
             Vector& beta) {
  const Index n = z.rows();
  const double nd = static_cast<double>(n);
  const auto nn = static_cast<std::size_t>(n);
  Vector r = yc - z * beta;
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    double max_delta = 0.0;
    for (Index j = 0; j < z.cols(); ++j) {
      const double* col = z.col(j).data();
      const double rho = kernels::active().dot(col, r.data(), nn) / nd + beta[j];
      const double next = soft_threshold(rho, lambda);
      const double delta = next - beta[j];
      if (delta != 0.0) {
        kernels::active().axpy(-delta, col, r.data(), nn);
        beta[j] = next;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    if (max_delta < tol) return sweep;
  }
  throw Error(ErrorCode::kNonConvergence, "lasso: coordinate descent did not converge");
}

LinearParams lasso(const Matrix& x, const Vector& y, const LassoControl& control,
                   const SplitIndices* split) {
  const Standardized s = standardize(x, y);
  const Index n = x.rows();
  const double nd = static_cast<double>(n);
  const auto nn = static_cast<std::size_t>(n);
  const Index q = s.z.cols();
  Vector beta = Vector::Zero(q);
  lasso_cd(s.z, s.yc, control.lambda, control.update_tol, control.max_sweeps, beta);
  if (split == nullptr) return to_original(s, beta, 0.0, x.cols());

  validate_split(*split, n);
  // With a free intercept on centered data the two group constraints reduce
  // to offset = 0 and u'beta = d, u = sum_{R1} z_i / n.
  const Vector u = group_mean_row(s.z, split->r1, nd);
  const double d = group_sum(s.yc, split->r1) / nd;
  const double u_sq = u.squaredNorm();
  if (!(u_sq > 1e-24)) {
    throw Error(ErrorCode::kSingularSystem,
                "constrained lasso: group mean covariates coincide, constraints infeasible");
  }

  // Augmented-Lagrangian coordinate descent: one sweep, then a multiplier
  // step. Each coordinate's curvature is 1 + rho*u_j^2 <= 1 + 10.
  const double rho = 10.0 / u_sq;
  const double gap_tol = 0.1 * control.constraint_tol / nd;
  double nu = 0.0;
  Vector r = s.yc - s.z * beta;
  double gap = u.dot(beta) - d;
  bool converged = false;
  for (int sweep = 1; sweep <= control.max_sweeps; ++sweep) {
    double max_delta = 0.0;
    for (Index j = 0; j < q; ++j) {
      const double* col = s.z.col(j).data();
      const double curv = 1.0 + rho * u[j] * u[j];
      const double grad = -kernels::active().dot(col, r.data(), nn) / nd + (nu + rho * gap) * u[j];
      const double next = soft_threshold(curv * beta[j] - grad, control.lambda) / curv;
      const double delta = next - beta[j];
      if (delta != 0.0) {
        kernels::active().axpy(-delta, col, r.data(), nn);
        gap += delta * u[j];
        beta[j] = next;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    nu += rho * gap;
    if (max_delta < control.update_tol && std::abs(gap) <= gap_tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw Error(ErrorCode::kNonConvergence,
                "constrained lasso: augmented-Lagrangian descent did not converge");
  }

  // Exact two-parameter correction (offset, scale) of the linear predictor so
  // both group sums vanish to rounding.
  const Vector lin = s.z * beta;
  const double n1 = static_cast<double>(split->r1.size());
  const double n2 = static_cast<double>(split->r2.size());
  const double p1 = group_sum(lin, split->r1);
  const double p2 = group_sum(lin, split->r2);
  const double y1 = group_sum(s.yc, split->r1);
  const double y2 = group_sum(s.yc, split->r2);
  const double det = n1 * p2 - n2 * p1;
  if (!(std::abs(det) > 1e-14 * n1 * n2 * (std::abs(p1) / n1 + std::abs(p2) / n2))) {
    throw Error(ErrorCode::kSingularSystem, "constrained lasso: projection system singular");
  }
  const double offset = (y1 * p2 - y2 * p1) / det;
  const double scale = (n1 * y2 - n2 * y1) / det;
  return to_original(s, beta * scale, offset, x.cols());
}

}  // namespace umlr::linear

namespace umlr::linear {
namespace {

std::vector<double> ridge_grid() {
  std::vector<double> grid;
  for (int k = 10; k >= -20; --k) grid.push_back(std::pow(10.0, 0.2 * k));
  return grid;
}

std::vector<double> lasso_grid(double lambda_max) {
  std::vector<double> grid;
  const int count = 30;
  for (int k = 0; k < count; ++k) {
    grid.push_back(lambda_max * std::pow(10.0, -3.0 * k / (count - 1)));
  }
  return grid;
}

double validation_sse(const LinearParams& params, const Matrix& x, const Vector& y) {
  const Vector resid = (x * params.coef).array() + params.intercept - y.array();
  return resid.squaredNorm();
}

}  // namespace

double cv_lambda(LearnerKind kind, const Matrix& x, const Vector& y, int folds,
                 std::uint64_t seed, const LassoControl& control) {
  const Index n = x.rows();
  if (folds < 2 || folds > n) {
    throw Error(ErrorCode::kConfig, "cv_folds must lie in [2, n]");
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  auto engine = make_engine(seed, {stream::kFolds});
  std::shuffle(order.begin(), order.end(), engine);

  std::vector<double> grid;
  if (kind == LearnerKind::kRidge) {
    grid = ridge_grid();
  } else {
    const Standardized s = standardize(x, y);
    const double lmax = s.z.cols() > 0
                            ? (s.z.transpose() * s.yc).cwiseAbs().maxCoeff() / static_cast<double>(n)
                            : 0.0;
    if (!(lmax > 0.0)) return control.lambda;
    grid = lasso_grid(lmax);
  }
  std::vector<double> sse(grid.size(), 0.0);

  for (int k = 0; k < folds; ++k) {
    std::vector<Index> train, test;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      (static_cast<int>(pos % static_cast<std::size_t>(folds)) == k ? test : train)
          .push_back(order[pos]);
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    const Matrix x_tr = select_rows(x, train);
    const Vector y_tr = select_rows(y, train);
    const Matrix x_te = select_rows(x, test);
    const Vector y_te = select_rows(y, test);
    const Standardized s = standardize(x_tr, y_tr);
    const double nd = static_cast<double>(x_tr.rows());
    const Index q = s.z.cols();

    if (kind == LearnerKind::kRidge) {
      Matrix g = Matrix::Zero(q, q);
      g.selfadjointView<Eigen::Lower>().rankUpdate(s.z.transpose(), 1.0 / nd);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
      const Vector rot = eig.eigenvectors().transpose() * (s.z.transpose() * s.yc / nd);
      for (std::size_t gidx = 0; gidx < grid.size(); ++gidx) {
        const Vector shrunk =
            rot.array() / (eig.eigenvalues().array().max(0.0) + grid[gidx]);
        const Vector beta = eig.eigenvectors() * shrunk;
        sse[gidx] += validation_sse(to_original(s, beta, 0.0, x.cols()), x_te, y_te);
      }
    } else {
      Vector beta = Vector::Zero(q);
      for (std::size_t gidx = 0; gidx < grid.size(); ++gidx) {
        lasso_cd(s.z, s.yc, grid[gidx], control.update_tol, control.max_sweeps, beta);
        sse[gidx] += validation_sse(to_original(s, beta, 0.0, x.cols()), x_te, y_te);
      }
    }
  }

  std::size_t best = 0;
  for (std::size_t gidx = 1; gidx < grid.size(); ++gidx) {
    if (sse[gidx] < sse[best]) best = gidx;
  }
  return grid[best];
}

}  // namespace umlr::linear
