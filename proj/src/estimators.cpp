#include "umlr/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "umlr/kernels.hpp"
#include "umlr/rng.hpp"

namespace umlr {

const char* to_string(Estimator e) {
  switch (e) {
    case Estimator::kSLearner: return "s_learner";
    case Estimator::kTLearner: return "t_learner";
    case Estimator::kXLearner: return "x_learner";
    case Estimator::kAipw: return "aipw";
    case Estimator::kDml: return "dml";
    case Estimator::kPsmAtt: return "psm_att";
  }
  return "?";
}

Estimator parse_estimator(const std::string& s) {
  if (s == "s" || s == "s_learner") return Estimator::kSLearner;
  if (s == "t" || s == "t_learner") return Estimator::kTLearner;
  if (s == "x" || s == "x_learner") return Estimator::kXLearner;
  if (s == "aipw") return Estimator::kAipw;
  if (s == "dml") return Estimator::kDml;
  if (s == "psm" || s == "psm_att") return Estimator::kPsmAtt;
  throw Error(ErrorCode::kConfig, "unknown estimator '" + s + "' (expected s, t, x, aipw, dml or psm)");
}

double normal_quantile_two_sided(double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::kConfig, "level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level);
}

// ---------------------------------------------------------------- propensity

PropensityModel::PropensityModel(double intercept, Vector coef, double lo, double hi)
    : intercept_(intercept), coef_(std::move(coef)), lo_(lo), hi_(hi) {}

Vector PropensityModel::logit(const Matrix& x) const {
  if (x.cols() != coef_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "propensity: covariate count mismatch");
  }
  return (x * coef_).array() + intercept_;
}

Vector PropensityModel::predict(const Matrix& x) const {
  const Vector eta = logit(x);
  Vector e(eta.size());
  for (Index i = 0; i < eta.size(); ++i) {
    e[i] = std::clamp(1.0 / (1.0 + std::exp(-eta[i])), lo_, hi_);
  }
  return e;
}

namespace {

// log(1 + exp(v)) without overflow.
double softplus(double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

}  // namespace

PropensityModel fit_propensity(const Matrix& x, const Eigen::VectorXi& t, double l2, double lo,
                               double hi) {
  const Index n = x.rows();
  if (t.size() != n) throw Error(ErrorCode::kDimensionMismatch, "propensity: t length mismatch");
  if (!(l2 >= 0.0)) throw Error(ErrorCode::kConfig, "propensity: l2 must be >= 0");
  if (!(lo > 0.0 && lo < hi && hi < 1.0)) {
    throw Error(ErrorCode::kConfig, "propensity: clipping bounds must satisfy 0 < lo < hi < 1");
  }
  const Index n1 = t.sum();
  if (n1 == 0 || n1 == n) {
    throw Error(ErrorCode::kArmTooSmall, "propensity: both treatment classes must be present");
  }

  // Standardized design with a leading intercept column.
  Vector mu = x.colwise().mean().transpose();
  Vector sd(x.cols());
  std::vector<Index> active;
  for (Index j = 0; j < x.cols(); ++j) {
    sd[j] = std::sqrt((x.col(j).array() - mu[j]).square().mean());
    if (sd[j] > 1e-12 * std::max(1.0, std::abs(mu[j]))) active.push_back(j);
  }
  const Index q = static_cast<Index>(active.size());
  Matrix za(n, q + 1);
  za.col(0).setOnes();
  for (Index k = 0; k < q; ++k) {
    const Index j = active[static_cast<std::size_t>(k)];
    za.col(k + 1) = (x.col(j).array() - mu[j]) / sd[j];
  }
  const Vector tv = t.cast<double>();
  const double nd = static_cast<double>(n);

  auto objective = [&](const Vector& theta) {
    const Vector eta = za * theta;
    double f = 0.0;
    for (Index i = 0; i < n; ++i) f += softplus(eta[i]) - tv[i] * eta[i];
    return f + 0.5 * l2 * theta.tail(q).squaredNorm();
  };

  Vector theta = Vector::Zero(q + 1);
  const double pbar = static_cast<double>(n1) / nd;
  theta[0] = std::log(pbar / (1.0 - pbar));
  double f = objective(theta);
  bool converged = false;
  int iter = 0;
  for (; iter < 100; ++iter) {
    const Vector eta = za * theta;
    Vector p(n), w(n);
    for (Index i = 0; i < n; ++i) {
      p[i] = 1.0 / (1.0 + std::exp(-eta[i]));
      w[i] = p[i] * (1.0 - p[i]);
    }
    Vector grad = za.transpose() * (p - tv);
    grad.tail(q) += l2 * theta.tail(q);
    if (grad.cwiseAbs().maxCoeff() / nd < 1e-8) {
      converged = true;
      break;
    }
    Matrix h = za.transpose() * w.asDiagonal() * za;
    h.diagonal().tail(q).array() += l2;
    Eigen::LDLT<Matrix> ldlt(h);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) break;
    const Vector step = ldlt.solve(grad);
    const double slope = -grad.dot(step);
    double s = 1.0;
    bool moved = false;
    for (int half = 0; half < 50; ++half, s *= 0.5) {
      const Vector cand = theta - s * step;
      const double fc = objective(cand);
      if (fc <= f + 1e-4 * s * slope) {
        theta = cand;
        f = fc;
        moved = true;
        break;
      }
    }
    if (!moved) {
      // No representable decrease left: accept if the gradient is tiny.
      converged = grad.cwiseAbs().maxCoeff() / nd < 1e-6;
      break;
    }
  }

  if (l2 == 0.0) {
    const Vector eta = za * theta;
    double min_treated = std::numeric_limits<double>::infinity();
    double max_control = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i) {
      if (t[i] == 1) min_treated = std::min(min_treated, eta[i]);
      else max_control = std::max(max_control, eta[i]);
    }
    if (min_treated > max_control) converged = false;
  }
  if (!converged) {
    throw Error(ErrorCode::kNonConvergence,
                "propensity: Newton iterations did not converge (complete separation?); use l2 > 0");
  }

  Vector coef = Vector::Zero(x.cols());
  double intercept = theta[0];
  for (Index k = 0; k < q; ++k) {
    const Index j = active[static_cast<std::size_t>(k)];
    coef[j] = theta[k + 1] / sd[j];
    intercept -= coef[j] * mu[j];
  }
  PropensityModel model(intercept, coef, lo, hi);
  model.iterations = iter;
  return model;
}

// -------------------------------------------------------- outcome regression

double or_ate(const Vector& mu0_hat, const Vector& mu1_hat) {
  if (mu0_hat.size() != mu1_hat.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "or_ate: length mismatch");
  }
  if (mu0_hat.size() == 0) throw Error(ErrorCode::kInvalidInput, "or_ate: no units");
  return (mu1_hat - mu0_hat).mean();
}

namespace {

Index min_arm_size(const LearnerConfig& cfg) {
  return cfg.kind == LearnerKind::kGbt ? std::max<Index>(5, cfg.gbt.min_samples_leaf) : 5;
}

void add_report(std::vector<NamedReport>& out, const std::string& name, const Vector& y,
                const Vector& pred) {
  if (y.size() < 3 || !(variance(y) > 0.0)) return;
  out.push_back({name, estimate_eta(y, pred)});
}

Matrix with_treatment_column(const Matrix& x, const Eigen::VectorXi& t) {
  Matrix xa(x.rows(), x.cols() + 1);
  xa.leftCols(x.cols()) = x;
  xa.col(x.cols()) = t.cast<double>();
  return xa;
}

Matrix with_constant_column(const Matrix& x, double value) {
  Matrix xa(x.rows(), x.cols() + 1);
  xa.leftCols(x.cols()) = x;
  xa.col(x.cols()).setConstant(value);
  return xa;
}

}  // namespace

TLearnerResult t_learner(const Dataset& data, const LearnerConfig& cfg_control,
                         const LearnerConfig& cfg_treated, FitMode mode) {
  data.require_arms(std::max(min_arm_size(cfg_control), min_arm_size(cfg_treated)));
  const auto rows0 = data.arm_indices(0);
  const auto rows1 = data.arm_indices(1);
  const Matrix x0 = select_rows(data.x(), rows0);
  const Matrix x1 = select_rows(data.x(), rows1);
  const Vector y0 = select_rows(data.y(), rows0);
  const Vector y1 = select_rows(data.y(), rows1);
  FittedModel mu0 = fit_model(cfg_control, x0, y0, mode);
  FittedModel mu1 = fit_model(cfg_treated, x1, y1, mode);

  AteEstimate est;
  est.estimator = Estimator::kTLearner;
  est.mode = mode;
  est.n_used = data.n();
  est.mu0_hat = mu0.predict(data.x());
  est.mu1_hat = mu1.predict(data.x());
  est.point = or_ate(est.mu0_hat, est.mu1_hat);
  add_report(est.diagnostics, "mu0", y0, mu0.predict(x0));
  add_report(est.diagnostics, "mu1", y1, mu1.predict(x1));
  return TLearnerResult{std::move(mu0), std::move(mu1), std::move(est)};
}

TLearnerResult t_learner(const Dataset& data, const LearnerConfig& cfg, FitMode mode) {
  return t_learner(data, cfg, cfg, mode);
}

SLearnerResult s_learner(const Dataset& data, const LearnerConfig& cfg, FitMode mode) {
  data.require_arms(min_arm_size(cfg));
  const Matrix xa = with_treatment_column(data.x(), data.t());
  FittedModel mu = fit_model(cfg, xa, data.y(), mode);

  AteEstimate est;
  est.estimator = Estimator::kSLearner;
  est.mode = mode;
  est.n_used = data.n();
  est.mu0_hat = mu.predict(with_constant_column(data.x(), 0.0));
  est.mu1_hat = mu.predict(with_constant_column(data.x(), 1.0));
  est.point = or_ate(est.mu0_hat, est.mu1_hat);
  add_report(est.diagnostics, "mu", data.y(), mu.predict(xa));
  return SLearnerResult{std::move(mu), std::move(est)};
}

XLearnerResult x_learner(const Dataset& data, const XLearnerConfigs& cfgs, FitMode mode,
                         const PropensityModel& prop) {
  TLearnerResult stage1 = t_learner(data, cfgs.mu0, cfgs.mu1, mode);
  const auto rows0 = data.arm_indices(0);
  const auto rows1 = data.arm_indices(1);
  const Matrix x0 = select_rows(data.x(), rows0);
  const Matrix x1 = select_rows(data.x(), rows1);
  const Vector d1 = select_rows(data.y(), rows1) - stage1.mu0.predict(x1);
  const Vector d0 = stage1.mu1.predict(x0) - select_rows(data.y(), rows0);
  const FittedModel tau0 = fit(cfgs.tau0, x0, d0);
  const FittedModel tau1 = fit(cfgs.tau1, x1, d1);

  const Vector e = prop.predict(data.x());
  const Vector tau = e.array() * tau0.predict(data.x()).array() +
                     (1.0 - e.array()) * tau1.predict(data.x()).array();
  XLearnerResult out;
  out.resolved = {stage1.mu0.config(), stage1.mu1.config(), tau0.config(), tau1.config()};
  out.estimate.estimator = Estimator::kXLearner;
  out.estimate.mode = mode;
  out.estimate.n_used = data.n();
  out.estimate.point = tau.mean();
  out.estimate.diagnostics = std::move(stage1.estimate.diagnostics);
  out.estimate.mu0_hat = std::move(stage1.estimate.mu0_hat);
  out.estimate.mu1_hat = std::move(stage1.estimate.mu1_hat);
  return out;
}

AteEstimate x_learner(const Dataset& data, const LearnerConfig& cfg, FitMode mode,
                      const PropensityModel& prop) {
  return x_learner(data, XLearnerConfigs{cfg, cfg, cfg, cfg}, mode, prop).estimate;
}

// ------------------------------------------------------------ weighting

Vector aipw_scores(const Vector& y, const Eigen::VectorXi& t, const Vector& mu0_hat,
                   const Vector& mu1_hat, const Vector& e) {
  const Index n = y.size();
  if (t.size() != n || mu0_hat.size() != n || mu1_hat.size() != n || e.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "aipw: length mismatch");
  }
  Vector s(n);
  for (Index i = 0; i < n; ++i) {
    if (!(e[i] > 0.0 && e[i] < 1.0)) {
      std::ostringstream os;
      os << "aipw: propensity " << e[i] << " at unit " << (i + 1) << " is outside (0, 1)";
      throw Error(ErrorCode::kDivisionGuard, os.str());
    }
    s[i] = mu1_hat[i] - mu0_hat[i];
    if (t[i] == 1) s[i] += (y[i] - mu1_hat[i]) / e[i];
    else s[i] -= (y[i] - mu0_hat[i]) / (1.0 - e[i]);
  }
  return s;
}

namespace {

void set_analytic_ci(AteEstimate& est, const Vector& scores, double level) {
  est.level = level;
  est.point = scores.mean();
  if (scores.size() < 2) return;
  est.std_error = sample_sd(scores) / std::sqrt(static_cast<double>(scores.size()));
  const double z = normal_quantile_two_sided(level);
  est.ci_low = est.point - z * est.std_error;
  est.ci_high = est.point + z * est.std_error;
  est.has_ci = true;
}

}  // namespace

AteEstimate aipw(const Dataset& data, const Vector& mu0_hat, const Vector& mu1_hat, const Vector& e,
                 double level) {
  const Vector scores = aipw_scores(data.y(), data.t(), mu0_hat, mu1_hat, e);
  AteEstimate est;
  est.estimator = Estimator::kAipw;
  est.n_used = data.n();
  set_analytic_ci(est, scores, level);
  return est;
}

AteEstimate aipw(const Dataset& data, const FittedModel& mu0, const FittedModel& mu1,
                 const PropensityModel& prop, double level) {
  AteEstimate est = aipw(data, mu0.predict(data.x()), mu1.predict(data.x()), prop.predict(data.x()), level);
  est.mode = mu0.mode();
  return est;
}

std::vector<int> dml_fold_ids(Index n, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::kConfig, "dml: folds must be >= 2");
  if (folds > n) throw Error(ErrorCode::kConfig, "dml: more folds than units");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  auto engine = make_engine(seed, {stream::kFolds});
  std::shuffle(order.begin(), order.end(), engine);
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    ids[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(folds));
  }
  return ids;
}

AteEstimate dml(const Dataset& data, const LearnerConfig& cfg, FitMode mode, const DmlOptions& opt) {
  const Index n = data.n();
  if (opt.oracle_propensity && opt.oracle_propensity->size() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "dml: oracle propensity length mismatch");
  }
  const std::vector<int> ids = dml_fold_ids(n, opt.folds, opt.seed);
  Vector scores(n);
  for (int k = 0; k < opt.folds; ++k) {
    std::vector<Index> train, test;
    for (Index i = 0; i < n; ++i) (ids[static_cast<std::size_t>(i)] == k ? test : train).push_back(i);
    const Dataset tr = data.subset(train);
    if (tr.n_treated() < 2 || tr.n_control() < 2) {
      throw Error(ErrorCode::kResampling,
                  "dml: training part of fold " + std::to_string(k + 1) +
                      " needs at least two units in each arm");
    }
    const auto rows0 = tr.arm_indices(0);
    const auto rows1 = tr.arm_indices(1);
    const FittedModel mu0 =
        fit_model(cfg, select_rows(tr.x(), rows0), select_rows(tr.y(), rows0), mode);
    const FittedModel mu1 =
        fit_model(cfg, select_rows(tr.x(), rows1), select_rows(tr.y(), rows1), mode);
    const Matrix xt = select_rows(data.x(), test);
    Vector e;
    if (opt.oracle_propensity) {
      e = select_rows(*opt.oracle_propensity, test);
    } else {
      e = fit_propensity(tr.x(), tr.t(), opt.prop_l2, opt.clip_lo, opt.clip_hi).predict(xt);
    }
    Eigen::VectorXi tt(static_cast<Index>(test.size()));
    for (std::size_t r = 0; r < test.size(); ++r) tt[static_cast<Index>(r)] = data.t()[test[r]];
    const Vector s = aipw_scores(select_rows(data.y(), test), tt, mu0.predict(xt), mu1.predict(xt), e);
    for (std::size_t r = 0; r < test.size(); ++r) scores[test[r]] = s[static_cast<Index>(r)];
  }
  AteEstimate est;
  est.estimator = Estimator::kDml;
  est.mode = mode;
  est.n_used = n;
  set_analytic_ci(est, scores, opt.level);
  return est;
}

// -------------------------------------------------------------- matching

MatchResult match_on_score(const Vector& score, const Eigen::VectorXi& t, double caliper) {
  if (score.size() != t.size()) throw Error(ErrorCode::kDimensionMismatch, "psm: length mismatch");
  if (!(caliper > 0.0)) throw Error(ErrorCode::kConfig, "psm: caliper must be > 0");
  if (!all_finite(score)) throw Error(ErrorCode::kInvalidInput, "psm: non-finite score");
  MatchResult out;
  out.caliper_width = caliper * sample_sd(score);

  std::vector<Index> treated;
  using Key = std::pair<double, Index>;
  std::set<Key> controls;
  for (Index i = 0; i < t.size(); ++i) {
    if (t[i] == 1) treated.push_back(i);
    else controls.insert({score[i], i});
  }
  std::stable_sort(treated.begin(), treated.end(),
                   [&](Index a, Index b) { return score[a] > score[b]; });

  for (Index i : treated) {
    if (controls.empty()) break;
    const double s = score[i];
    auto right = controls.lower_bound({s, Index{-1}});
    auto best = controls.end();
    double best_d = std::numeric_limits<double>::infinity();
    if (right != controls.end()) {
      best = right;
      best_d = right->first - s;
    }
    if (right != controls.begin()) {
      auto left = std::prev(right);
      // Among equal scores prefer the lowest row index.
      while (left != controls.begin() && std::prev(left)->first == left->first) --left;
      const double d = s - left->first;
      if (d < best_d || (d == best_d && left->second < best->second)) {
        best = left;
        best_d = d;
      }
    }
    if (best != controls.end() && best_d <= out.caliper_width) {
      out.pairs.emplace_back(i, best->second);
      controls.erase(best);
    }
  }
  return out;
}

AteEstimate psm_att(const Dataset& data, const Vector& logit_score, double caliper, double level) {
  if (data.n_treated() == 0) throw Error(ErrorCode::kArmTooSmall, "psm: no treated units");
  const MatchResult m = match_on_score(logit_score, data.t(), caliper);
  if (m.pairs.empty()) throw Error(ErrorCode::kNoMatches, "psm: no treated unit matched within the caliper");
  Vector diff(static_cast<Index>(m.pairs.size()));
  for (std::size_t k = 0; k < m.pairs.size(); ++k) {
    diff[static_cast<Index>(k)] = data.y()[m.pairs[k].first] - data.y()[m.pairs[k].second];
  }
  AteEstimate est;
  est.estimator = Estimator::kPsmAtt;
  est.estimand = "ATT";
  est.n_used = 2 * diff.size();
  set_analytic_ci(est, diff, level);
  return est;
}

AteEstimate psm_att(const Dataset& data, const PropensityModel& prop, double caliper, double level) {
  return psm_att(data, prop.logit(data.x()), caliper, level);
}

// -------------------------------------------------------------- bootstrap

BootstrapInterval bootstrap_ci(const Dataset& data, const DatasetStatistic& statistic, int B,
                               double level, std::uint64_t seed) {
  if (B < 50) throw Error(ErrorCode::kConfig, "bootstrap: B must be >= 50");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::kConfig, "bootstrap: level must lie in (0, 1)");
  const Index n = data.n();
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(B));
  std::vector<Index> rows(static_cast<std::size_t>(n));
  BootstrapInterval out;
  out.resamples = B;
  for (int b = 0; b < B; ++b) {
    auto engine = make_engine(seed, {stream::kBootstrap, static_cast<std::uint64_t>(b)});
    std::uniform_int_distribution<Index> pick(0, n - 1);
    for (auto& r : rows) r = pick(engine);
    std::sort(rows.begin(), rows.end());
    try {
      const double v = statistic(data.subset(rows));
      if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidInput, "non-finite statistic");
      values.push_back(v);
    } catch (const Error&) {
      ++out.failures;
    }
  }
  if (out.failures * 10 > B) {
    std::ostringstream os;
    os << "bootstrap: estimator failed on " << out.failures << " of " << B << " resamples ("
       << 100.0 * out.failures / B << "%)";
    throw Error(ErrorCode::kUnstableBootstrap, os.str());
  }
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  const double alpha = 1.0 - level;
  out.ci_low = quantile(0.5 * alpha);
  out.ci_high = quantile(1.0 - 0.5 * alpha);
  return out;
}

// -------------------------------------------------------------- dispatch

namespace {

void set_bootstrap_ci(AteEstimate& est, const Dataset& data, const DatasetStatistic& stat,
                      const EstimateOptions& opt) {
  if (!opt.with_ci) return;
  const BootstrapInterval ci = bootstrap_ci(data, stat, opt.bootstrap_b, opt.level, opt.seed);
  est.ci_low = ci.ci_low;
  est.ci_high = ci.ci_high;
  est.level = opt.level;
  est.has_ci = true;
}

}  // namespace

AteEstimate estimate(Estimator which, const Dataset& data, const EstimateOptions& opt) {
  const FitMode mode = opt.mode;
  AteEstimate est;
  switch (which) {
    case Estimator::kSLearner: {
      SLearnerResult r = s_learner(data, opt.learner, mode);
      const LearnerConfig frozen = r.mu.config();
      est = std::move(r.estimate);
      set_bootstrap_ci(est, data, [&](const Dataset& d) { return s_learner(d, frozen, mode).estimate.point; }, opt);
      break;
    }
    case Estimator::kTLearner: {
      TLearnerResult r = t_learner(data, opt.learner, mode);
      const LearnerConfig c0 = r.mu0.config();
      const LearnerConfig c1 = r.mu1.config();
      est = std::move(r.estimate);
      set_bootstrap_ci(est, data, [&](const Dataset& d) { return t_learner(d, c0, c1, mode).estimate.point; }, opt);
      break;
    }
    case Estimator::kXLearner: {
      const PropensityModel prop = fit_propensity(data.x(), data.t(), opt.prop_l2, opt.clip_lo, opt.clip_hi);
      const XLearnerConfigs cfgs{opt.learner, opt.learner, opt.learner, opt.learner};
      XLearnerResult r = x_learner(data, cfgs, mode, prop);
      const XLearnerConfigs frozen = r.resolved;
      est = std::move(r.estimate);
      set_bootstrap_ci(est, data, [&](const Dataset& d) {
        const PropensityModel pb = fit_propensity(d.x(), d.t(), opt.prop_l2, opt.clip_lo, opt.clip_hi);
        return x_learner(d, frozen, mode, pb).estimate.point;
      }, opt);
      break;
    }
    case Estimator::kAipw: {
      TLearnerResult r = t_learner(data, opt.learner, mode);
      Vector e;
      if (opt.oracle_propensity) {
        if (opt.oracle_propensity->size() != data.n()) {
          throw Error(ErrorCode::kDimensionMismatch, "aipw: oracle propensity length mismatch");
        }
        e = *opt.oracle_propensity;
      } else {
        e = fit_propensity(data.x(), data.t(), opt.prop_l2, opt.clip_lo, opt.clip_hi).predict(data.x());
      }
      est = aipw(data, r.estimate.mu0_hat, r.estimate.mu1_hat, e, opt.level);
      est.diagnostics = std::move(r.estimate.diagnostics);
      est.mu0_hat = std::move(r.estimate.mu0_hat);
      est.mu1_hat = std::move(r.estimate.mu1_hat);
      break;
    }
    case Estimator::kDml: {
      DmlOptions d;
      d.folds = opt.folds;
      d.seed = opt.seed;
      d.prop_l2 = opt.prop_l2;
      d.clip_lo = opt.clip_lo;
      d.clip_hi = opt.clip_hi;
      d.level = opt.level;
      d.oracle_propensity = opt.oracle_propensity;
      est = dml(data, opt.learner, mode, d);
      break;
    }
    case Estimator::kPsmAtt: {
      const PropensityModel prop = fit_propensity(data.x(), data.t(), opt.prop_l2, opt.clip_lo, opt.clip_hi);
      est = psm_att(data, prop, opt.caliper, opt.level);
      break;
    }
  }
  est.estimator = which;
  est.mode = mode;
  if (!opt.with_ci) {
    est.has_ci = false;
    est.ci_low = est.ci_high = std::numeric_limits<double>::quiet_NaN();
  } else if (est.has_ci) {
    est.ci_low = std::min(est.ci_low, est.point);
    est.ci_high = std::max(est.ci_high, est.point);
  }
  return est;
}

}  // namespace umlr
