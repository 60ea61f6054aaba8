#include "umlr/simulation.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include <boost/math/quadrature/sinh_sinh.hpp>

#include "umlr/rng.hpp"

namespace umlr {

const char* to_string(SupportScheme s) { return s == SupportScheme::kShared ? "shared" : "independent"; }
const char* to_string(SignScheme s) { return s == SignScheme::kPositive ? "positive" : "random"; }

SupportScheme parse_support_scheme(const std::string& s) {
  if (s == "independent") return SupportScheme::kIndependent;
  if (s == "shared") return SupportScheme::kShared;
  throw Error(ErrorCode::kConfig, "unknown support scheme '" + s + "' (expected independent or shared)");
}

SignScheme parse_sign_scheme(const std::string& s) {
  if (s == "random") return SignScheme::kRandom;
  if (s == "positive") return SignScheme::kPositive;
  throw Error(ErrorCode::kConfig, "unknown sign scheme '" + s + "' (expected random or positive)");
}

void DgpConfig::validate() const {
  if (n < 20) throw Error(ErrorCode::kConfig, "dgp: n must be >= 20");
  if (p < 1) throw Error(ErrorCode::kConfig, "dgp: p must be >= 1");
  if (s < 1 || s > p) throw Error(ErrorCode::kConfig, "dgp: s must lie in [1, p]");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error(ErrorCode::kConfig, "dgp: sigma must be >= 0");
  for (double v : {mu1, mu0, beta_scale, gamma_scale}) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kConfig, "dgp: non-finite parameter");
  }
}

namespace {

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

std::vector<Index> draw_support(std::mt19937_64& engine, Index p, Index s) {
  std::vector<Index> idx(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) idx[static_cast<std::size_t>(j)] = j;
  for (Index k = 0; k < s; ++k) {
    std::uniform_int_distribution<Index> pick(k, p - 1);
    std::swap(idx[static_cast<std::size_t>(k)], idx[static_cast<std::size_t>(pick(engine))]);
  }
  idx.resize(static_cast<std::size_t>(s));
  return idx;
}

Vector sparse_vector(std::mt19937_64& engine, const std::vector<Index>& support, Index p,
                     double scale, SignScheme signs) {
  Vector v = Vector::Zero(p);
  std::bernoulli_distribution coin(0.5);
  for (Index j : support) {
    const bool negative = signs == SignScheme::kRandom && coin(engine);
    v[j] = negative ? -scale : scale;
  }
  return v;
}

double arm_mean(const Vector& v, const Eigen::VectorXi& t, int arm) {
  double acc = 0.0;
  Index count = 0;
  for (Index i = 0; i < v.size(); ++i) {
    if (t[i] == arm) {
      acc += v[i];
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorCode::kArmTooSmall, "replicate has an empty arm");
  return acc / static_cast<double>(count);
}

}  // namespace

DgpCoefficients draw_coefficients(const DgpConfig& cfg) {
  cfg.validate();
  auto engine = make_engine(cfg.seed, {stream::kCoefficients});
  DgpCoefficients c;
  if (cfg.support == SupportScheme::kShared) {
    const auto support = draw_support(engine, cfg.p, cfg.s);
    c.gamma = sparse_vector(engine, support, cfg.p, cfg.gamma_scale, cfg.signs);
    c.beta0 = sparse_vector(engine, support, cfg.p, cfg.beta_scale, cfg.signs);
    c.beta1 = sparse_vector(engine, support, cfg.p, cfg.beta_scale, cfg.signs);
  } else {
    c.gamma = sparse_vector(engine, draw_support(engine, cfg.p, cfg.s), cfg.p, cfg.gamma_scale, cfg.signs);
    c.beta0 = sparse_vector(engine, draw_support(engine, cfg.p, cfg.s), cfg.p, cfg.beta_scale, cfg.signs);
    c.beta1 = sparse_vector(engine, draw_support(engine, cfg.p, cfg.s), cfg.p, cfg.beta_scale, cfg.signs);
  }
  if (cfg.equal_betas) c.beta1 = c.beta0;
  return c;
}

SimReplicate generate_replicate(const DgpConfig& cfg, int rep_index) {
  return generate_replicate(cfg, draw_coefficients(cfg), rep_index);
}

SimReplicate generate_replicate(const DgpConfig& cfg, const DgpCoefficients& coef, int rep_index) {
  cfg.validate();
  const Index n = cfg.n;
  const Index p = cfg.p;
  if (coef.gamma.size() != p || coef.beta0.size() != p || coef.beta1.size() != p) {
    throw Error(ErrorCode::kDimensionMismatch, "dgp: coefficient length differs from p");
  }
  auto engine = make_engine(cfg.seed, {stream::kReplicate, static_cast<std::uint64_t>(rep_index)});
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;

  Matrix x(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) x(i, j) = normal(engine);

  const Vector lin = x * coef.gamma;
  Vector e(n), mu0(n), mu1(n), y0(n), y1(n), y(n);
  Eigen::VectorXi t(n);
  mu0 = (x * coef.beta0).array() + cfg.mu0;
  mu1 = (x * coef.beta1).array() + cfg.mu1;
  for (Index i = 0; i < n; ++i) {
    e[i] = logistic(lin[i]);
    t[i] = unif(engine) < e[i] ? 1 : 0;
    const double eps0 = cfg.sigma * normal(engine);
    const double eps1 = cfg.independent_arm_noise ? cfg.sigma * normal(engine) : eps0;
    y0[i] = mu0[i] + eps0;
    y1[i] = mu1[i] + eps1;
    y[i] = t[i] == 1 ? y1[i] : y0[i];
  }
  const Vector tau = mu1 - mu0;
  double att = std::numeric_limits<double>::quiet_NaN();
  if (t.sum() > 0) att = arm_mean(tau, t, 1);
  return SimReplicate{Dataset(std::move(x), t, y), e, mu0, mu1, y0, y1, tau, tau.mean(), att};
}

InjectedPredictions inject_spb(const SimReplicate& rep, double eta_in, double eta_out, double w) {
  if (!(eta_in >= 0.0 && eta_in <= 1.0) || !(eta_out >= 0.0 && eta_out <= 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "inject_spb: slopes must lie in [0, 1]");
  }
  if (!(w > 0.0 && w <= 1.0)) throw Error(ErrorCode::kInvalidInput, "inject_spb: w must lie in (0, 1]");
  const auto& t = rep.data.t();
  InjectedPredictions out;
  const Vector* star[2] = {&rep.mu0_star, &rep.mu1_star};
  Vector* hat[2] = {&out.mu0_hat, &out.mu1_hat};
  for (int arm = 0; arm < 2; ++arm) {
    const Vector& m = *star[arm];
    const double own = arm_mean(m, t, arm);
    const double other = arm_mean(m, t, 1 - arm);
    const double target = w * own + (1.0 - w) * other;
    Vector& h = *hat[arm];
    h.resize(m.size());
    for (Index i = 0; i < m.size(); ++i) {
      h[i] = t[i] == arm ? eta_in * m[i] + (1.0 - eta_in) * own
                         : eta_out * m[i] + (1.0 - eta_out) * target;
    }
  }
  return out;
}

PopulationMoments population_moments(const DgpConfig& cfg, const DgpCoefficients& coef) {
  PopulationMoments pm;
  const double g2 = coef.gamma.squaredNorm();
  double ez1 = 0.0;
  double ez0 = 0.0;
  if (g2 > 0.0) {
    const double c = std::sqrt(g2);
    boost::math::quadrature::sinh_sinh<double> integrator;
    const double inv_sqrt_2pi = 0.3989422804014327;
    auto phi = [&](double z) { return inv_sqrt_2pi * std::exp(-0.5 * z * z); };
    pm.pi = integrator.integrate([&](double z) { return phi(z) * logistic(c * z); }, 1e-13);
    // E[Z sigma(Z)] with Z = c * z.
    const double ezs = c * integrator.integrate([&](double z) { return z * phi(z) * logistic(c * z); }, 1e-13);
    ez1 = ezs / pm.pi;
    ez0 = -ezs / (1.0 - pm.pi);
  }
  // E[X'beta | Z] = (beta'gamma / |gamma|^2) Z for Gaussian X.
  const double k1 = g2 > 0.0 ? coef.beta1.dot(coef.gamma) / g2 : 0.0;
  const double k0 = g2 > 0.0 ? coef.beta0.dot(coef.gamma) / g2 : 0.0;
  pm.mu1_1 = cfg.mu1 + k1 * ez1;
  pm.mu1_0 = cfg.mu1 + k1 * ez0;
  pm.mu0_1 = cfg.mu0 + k0 * ez1;
  pm.mu0_0 = cfg.mu0 + k0 * ez0;
  return pm;
}

double rct_oracle_estimate(const SimReplicate& rep, std::uint64_t seed, int rep_index) {
  auto engine = make_engine(seed, {stream::kRct, static_cast<std::uint64_t>(rep_index)});
  std::bernoulli_distribution coin(0.5);
  double s1 = 0.0, s0 = 0.0;
  Index n1 = 0, n0 = 0;
  for (Index i = 0; i < rep.y0.size(); ++i) {
    if (coin(engine)) {
      s1 += rep.y1[i];
      ++n1;
    } else {
      s0 += rep.y0[i];
      ++n0;
    }
  }
  if (n1 == 0 || n0 == 0) throw Error(ErrorCode::kArmTooSmall, "rct oracle: empty arm");
  return s1 / static_cast<double>(n1) - s0 / static_cast<double>(n0);
}

// ------------------------------------------------------------------ harness

int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("UMLR_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(int count, int threads, const std::function<void(int)>& f) {
  const int workers = std::min(resolve_thread_count(threads), std::max(count, 1));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  int err_index = count;
  std::exception_ptr err;
  auto work = [&]() {
    for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (i < err_index) {
          err_index = i;
          err = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

McSummary summarize(const std::vector<ReplicateRecord>& records) {
  McSummary s;
  if (records.empty()) return s;
  s.estimator = records.front().estimator;
  s.mode = records.front().mode;
  s.estimand = s.estimator == "psm_att" ? "ATT" : "ATE";
  s.reps = static_cast<int>(records.size());

  std::vector<double> bias, pct, apct, trues;
  int covered = 0;
  CounterfactualSlopes slope_sum;
  int slope_count = 0;
  for (const auto& r : records) {
    if (r.failed) {
      ++s.failures;
      continue;
    }
    const double b = r.estimate - r.true_value;
    bias.push_back(b);
    trues.push_back(r.true_value);
    pct.push_back(100.0 * b / r.true_value);
    apct.push_back(100.0 * std::abs(b) / std::abs(r.true_value));
    if (r.has_ci) {
      ++s.ci_count;
      if (r.ci_low <= r.true_value && r.true_value <= r.ci_high) ++covered;
    }
    if (r.slopes) {
      slope_sum.eta_1_1 += r.slopes->eta_1_1;
      slope_sum.eta_1_0 += r.slopes->eta_1_0;
      slope_sum.eta_0_0 += r.slopes->eta_0_0;
      slope_sum.eta_0_1 += r.slopes->eta_0_1;
      ++slope_count;
    }
  }
  s.valid = s.failures * 20 <= s.reps;
  const auto m = bias.size();
  if (m == 0) {
    s.valid = false;
    return s;
  }
  auto mean_se = [](const std::vector<double>& v, double& mean_out, double& se_out) {
    double acc = 0.0;
    for (double x : v) acc += x;
    mean_out = acc / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean_out) * (x - mean_out);
    se_out = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
  };
  double unused = 0.0;
  mean_se(trues, s.mean_true, unused);
  mean_se(bias, s.mean_bias, s.mc_se);
  mean_se(pct, s.bias_pct_signed, s.bias_pct_signed_se);
  mean_se(apct, s.bias_pct_abs, s.bias_pct_abs_se);
  double sq = 0.0;
  for (double b : bias) sq += b * b;
  s.rmse = std::sqrt(sq / static_cast<double>(m));
  if (s.ci_count > 0) {
    s.coverage = static_cast<double>(covered) / s.ci_count;
    s.coverage_se = std::sqrt(s.coverage * (1.0 - s.coverage) / s.ci_count);
  }
  if (slope_count > 0) {
    const double k = static_cast<double>(slope_count);
    s.mean_slopes = CounterfactualSlopes{slope_sum.eta_1_1 / k, slope_sum.eta_1_0 / k,
                                         slope_sum.eta_0_0 / k, slope_sum.eta_0_1 / k};
  }
  return s;
}

McResult run_monte_carlo(const DgpConfig& cfg, const std::vector<ScenarioEntry>& scenario,
                         const McOptions& opt) {
  cfg.validate();
  if (opt.reps < 10) throw Error(ErrorCode::kConfig, "monte carlo: reps must be >= 10");
  if (scenario.empty() && !opt.rct_oracle) throw Error(ErrorCode::kConfig, "monte carlo: empty scenario");
  const DgpCoefficients coef = draw_coefficients(cfg);
  const std::size_t per_rep = scenario.size() + (opt.rct_oracle ? 1 : 0);
  std::vector<ReplicateRecord> records(static_cast<std::size_t>(opt.reps) * per_rep);

  parallel_for(opt.reps, opt.threads, [&](int rep) {
    const SimReplicate sim = generate_replicate(cfg, coef, rep);
    const OracleSurfaces oracle = sim.oracle();
    auto seed_engine = make_engine(opt.seed, {stream::kBootstrap, static_cast<std::uint64_t>(rep)});
    const std::uint64_t rep_seed = seed_engine();
    std::size_t slot = static_cast<std::size_t>(rep) * per_rep;
    for (const ScenarioEntry& entry : scenario) {
      ReplicateRecord& r = records[slot++];
      r.rep = rep;
      r.estimator = to_string(entry.estimator);
      r.mode = to_string(entry.mode);
      r.true_value = entry.estimator == Estimator::kPsmAtt ? sim.true_att : sim.true_ate;
      EstimateOptions eo = opt.estimate;
      eo.mode = entry.mode;
      eo.seed = rep_seed;
      if (opt.oracle_propensity) eo.oracle_propensity = sim.propensity;
      try {
        const AteEstimate est = estimate(entry.estimator, sim.data, eo);
        r.estimate = est.point;
        r.has_ci = est.has_ci;
        r.ci_low = est.ci_low;
        r.ci_high = est.ci_high;
        if (est.mu0_hat.size() == sim.data.n()) {
          try {
            r.slopes = counterfactual_slopes(oracle, est.mu0_hat, est.mu1_hat, sim.data.t());
          } catch (const Error&) {
          }
        }
      } catch (const Error& e) {
        r.failed = true;
        r.error = e.what();
      }
    }
    if (opt.rct_oracle) {
      ReplicateRecord& r = records[slot++];
      r.rep = rep;
      r.estimator = "rct_oracle";
      r.mode = "-";
      r.true_value = sim.true_ate;
      try {
        r.estimate = rct_oracle_estimate(sim, opt.seed, rep);
      } catch (const Error& e) {
        r.failed = true;
        r.error = e.what();
      }
    }
  });

  McResult out;
  for (std::size_t k = 0; k < per_rep; ++k) {
    std::vector<ReplicateRecord> group;
    group.reserve(static_cast<std::size_t>(opt.reps));
    for (int rep = 0; rep < opt.reps; ++rep) group.push_back(records[static_cast<std::size_t>(rep) * per_rep + k]);
    out.summaries.push_back(summarize(group));
  }
  out.records = std::move(records);
  return out;
}

std::vector<SweepRow> aipw_sweep(const std::vector<Index>& n_grid,
                                        const std::vector<double>& sigma_grid,
                                        const DgpConfig& base, const std::vector<FitMode>& modes,
                                        const McOptions& opt) {
  if (n_grid.empty() || sigma_grid.empty() || modes.empty()) {
    throw Error(ErrorCode::kConfig, "sweep: grids must be nonempty");
  }
  std::vector<ScenarioEntry> scenario;
  for (FitMode m : modes) scenario.push_back({Estimator::kAipw, m});
  McOptions o = opt;
  o.oracle_propensity = true;
  o.rct_oracle = true;
  std::vector<SweepRow> rows;
  for (Index n : n_grid) {
    for (double sigma : sigma_grid) {
      DgpConfig cfg = base;
      cfg.n = n;
      cfg.sigma = sigma;
      rows.push_back({n, sigma, run_monte_carlo(cfg, scenario, o)});
    }
  }
  return rows;
}

InjectedStudy run_injected_spb(const DgpConfig& cfg, int reps, double eta_in, double eta_out,
                               double w, int threads) {
  cfg.validate();
  if (reps < 2) throw Error(ErrorCode::kConfig, "injected study: reps must be >= 2");
  const DgpCoefficients coef = draw_coefficients(cfg);
  std::vector<double> or_bias(static_cast<std::size_t>(reps));
  std::vector<double> aipw_bias(static_cast<std::size_t>(reps));
  std::vector<double> gap(static_cast<std::size_t>(reps));

  parallel_for(reps, threads, [&](int rep) {
    const SimReplicate sim = generate_replicate(cfg, coef, rep);
    const InjectedPredictions h = inject_spb(sim, eta_in, eta_out, w);
    const auto& t = sim.data.t();
    const auto k = static_cast<std::size_t>(rep);
    or_bias[k] = or_ate(h.mu0_hat, h.mu1_hat) - sim.true_ate;
    aipw_bias[k] = aipw_scores(sim.data.y(), t, h.mu0_hat, h.mu1_hat, sim.propensity).mean() - sim.true_ate;
    BiasInputs in;
    in.pi = static_cast<double>(t.sum()) / static_cast<double>(t.size());
    in.eta_1_0 = in.eta_0_1 = eta_out;
    in.w1 = in.w0 = w;
    in.mu1_1 = arm_mean(sim.mu1_star, t, 1);
    in.mu1_0 = arm_mean(sim.mu1_star, t, 0);
    in.mu0_1 = arm_mean(sim.mu0_star, t, 1);
    in.mu0_0 = arm_mean(sim.mu0_star, t, 0);
    gap[k] = std::abs(or_bias[k] - shrinkage_bias(in));
  });

  auto mean_se = [](const std::vector<double>& v, double& m, double& se) {
    double acc = 0.0;
    for (double x : v) acc += x;
    m = acc / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  };
  InjectedStudy s;
  s.reps = reps;
  mean_se(or_bias, s.mean_or_bias, s.or_mc_se);
  mean_se(aipw_bias, s.mean_aipw_bias, s.aipw_mc_se);
  std::vector<double> diff(static_cast<std::size_t>(reps));
  for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = aipw_bias[k] - or_bias[k];
  mean_se(diff, s.mean_diff, s.diff_mc_se);
  for (double g : gap) s.max_sample_identity_gap = std::max(s.max_sample_identity_gap, g);

  const PopulationMoments pm = population_moments(cfg, coef);
  BiasInputs in;
  in.pi = pm.pi;
  in.eta_1_0 = in.eta_0_1 = eta_out;
  in.w1 = in.w0 = w;
  in.mu1_1 = pm.mu1_1;
  in.mu1_0 = pm.mu1_0;
  in.mu0_1 = pm.mu0_1;
  in.mu0_0 = pm.mu0_0;
  s.population_bias = shrinkage_bias(in);
  return s;
}

}  // namespace umlr
