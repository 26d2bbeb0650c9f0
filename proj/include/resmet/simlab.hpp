#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "resmet/forest.hpp"
#include "resmet/gcm.hpp"
#include "resmet/survival.hpp"
#include "resmet/table.hpp"
#include "resmet/team_strength.hpp"

namespace resmet {

// Partially linear logistic generator: X ~ Ber(f(Z)), Y ~ Ber(expit(X*beta +
// g(Z))) with Z standard normal. g is nonlinear with an interaction so a
// linear outcome fit is genuinely misspecified.
struct PllmSimConfig {
  int n = 2000;
  int d_z = 3;
  double beta = 0.0;
  std::uint64_t seed = 1;
  double propensity_bound = 0.05;  // overlap: f in (eps, 1-eps)
  bool zero_g = false;             // g == 0 (baseline studies)
  double constant_propensity =     // NaN: use the logistic form in Z
      std::numeric_limits<double>::quiet_NaN();

  void validate() const {
    if (n < 2 || d_z < 1) throw DataError("invalid simulation size");
    if (!(propensity_bound > 0.0 && propensity_bound < 0.5))
      throw DataError("propensity bound must lie in (0, 0.5)");
    if (!std::isnan(constant_propensity) &&
        !(constant_propensity > 0.0 && constant_propensity < 1.0))
      throw DataError("constant propensity must lie in (0, 1)");
  }

  double g(const Eigen::RowVectorXd& z) const {
    if (zero_g) return 0.0;
    double v = std::sin(z(0));
    if (d_z >= 3) v += 0.5 * z(1) * z(2);
    else if (d_z == 2) v += 0.5 * z(1);
    return v;
  }

  double propensity(const Eigen::RowVectorXd& z) const {
    if (!std::isnan(constant_propensity)) return constant_propensity;
    double lin = 0.5 * z(0);
    if (d_z >= 2) lin -= 0.5 * z(1);
    if (d_z >= 3) lin += 0.25 * z(2);
    return std::clamp(expit(lin), propensity_bound, 1.0 - propensity_bound);
  }
};

struct PllmSample {
  Eigen::MatrixXd z;
  Eigen::VectorXd x;        // 0/1
  Eigen::VectorXd y;        // 0/1
  Eigen::VectorXd true_f;   // P(X=1|Z)
  Eigen::VectorXd true_h;   // E[Y|Z] marginalized over X
};

inline PllmSample simulate_pllm(const PllmSimConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  PllmSample s;
  s.z.resize(cfg.n, cfg.d_z);
  s.x.resize(cfg.n);
  s.y.resize(cfg.n);
  s.true_f.resize(cfg.n);
  s.true_h.resize(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    for (int j = 0; j < cfg.d_z; ++j) s.z(i, j) = rng.normal();
    double f = cfg.propensity(s.z.row(i));
    double g = cfg.g(s.z.row(i));
    double x = rng.uniform() < f ? 1.0 : 0.0;
    double py = expit(x * cfg.beta + g);
    s.x(i) = x;
    s.y(i) = rng.uniform() < py ? 1.0 : 0.0;
    s.true_f(i) = f;
    s.true_h(i) = f * expit(cfg.beta + g) + (1.0 - f) * expit(g);
  }
  return s;
}

inline EventTable pllm_to_event_table(const PllmSample& s) {
  EventTable t;
  t.discipline = Discipline::shot;
  const auto n = static_cast<std::size_t>(s.y.size());
  for (int j = 0; j < s.z.cols(); ++j) {
    std::string name = "z" + std::to_string(j + 1);
    t.schema.push_back({name, ColumnKind::numeric});
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i)
      col[i] = s.z(static_cast<Eigen::Index>(i), j);
    t.numeric_cols[name] = std::move(col);
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto idx = static_cast<Eigen::Index>(i);
    t.outcome.push_back(s.y(idx));
    t.actor_id.push_back(s.x(idx) > 0.5 ? "target" : "other");
    t.date.emplace_back();
    t.team_for.emplace_back();
    t.team_against.emplace_back();
    t.on_target.push_back(-1);
  }
  return t;
}

// A finite (Y, X, Z) law on discrete Z support.
struct DiscreteLaw {
  std::vector<double> p_z;       // P(Z = z_k)
  std::vector<double> f;         // P(X=1 | z_k)
  std::vector<double> ey_given_x1;  // E[Y | X=1, z_k]
  std::vector<double> ey_given_x0;  // E[Y | X=0, z_k]

  void validate() const {
    std::size_t m = p_z.size();
    if (f.size() != m || ey_given_x1.size() != m || ey_given_x0.size() != m)
      throw DataError("law tables have differing lengths");
    double tot = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      for (double v : {p_z[k], f[k], ey_given_x1[k], ey_given_x0[k]})
        if (!(v >= 0.0 && v <= 1.0))
          throw DataError("law probabilities must lie in [0,1]");
      tot += p_z[k];
    }
    if (std::abs(tot - 1.0) > 1e-12) throw DataError("P(Z) must sum to 1");
  }

  static DiscreteLaw from_pllm(const std::vector<double>& p_z,
                               const std::vector<double>& g_values,
                               const std::vector<double>& f_values,
                               double beta) {
    DiscreteLaw law;
    law.p_z = p_z;
    law.f = f_values;
    for (double g : g_values) {
      law.ey_given_x1.push_back(expit(beta + g));
      law.ey_given_x0.push_back(expit(g));
    }
    law.validate();
    return law;
  }
};

// Exact enumeration of E[Cov(Y, X | Z)] =
// E[(f(Z) - f(Z)^2)(E[Y|X=1,Z] - E[Y|X=0,Z])] over a finite Z support.
inline double brute_force_expected_conditional_cov(const DiscreteLaw& law) {
  law.validate();
  double total = 0.0;
  for (std::size_t k = 0; k < law.p_z.size(); ++k) {
    double fk = law.f[k];
    total += law.p_z[k] * (fk - fk * fk) *
             (law.ey_given_x1[k] - law.ey_given_x0[k]);
  }
  return total;
}

enum class RegressionChoice {
  oracle,        // the generator's true function
  constant,      // sample mean
  forest_oob,    // OOB-tuned random forest, OOB predictions for training rows
  logistic_fit,  // linear-logistic fit on Z
};

inline std::string to_string(RegressionChoice c) {
  switch (c) {
    case RegressionChoice::oracle: return "oracle";
    case RegressionChoice::constant: return "constant";
    case RegressionChoice::forest_oob: return "forest-oob";
    case RegressionChoice::logistic_fit: return "logistic";
  }
  throw NumericError("unknown regression choice");
}

struct CalibrationConfig {
  PllmSimConfig sim;
  RegressionChoice outcome = RegressionChoice::oracle;
  RegressionChoice propensity = RegressionChoice::oracle;
  int replications = 500;
  double alpha = 0.05;
  ForestGrid forest;   // used by forest_oob choices
  int threads = 1;
};

struct CalibrationResult {
  int replications = 0;
  int failures = 0;
  double rejection_rate = 0.0;       // two-sided at alpha
  double one_sided_power = 0.0;      // H1: estimate > 0
  double mean_estimate = 0.0;
  double sign_agreement = 0.0;       // vs sign(beta); 0 when beta == 0
  double statistic_variance = 0.0;   // empirical variance of T across reps
};

namespace detail {

inline Eigen::VectorXd regression_values(RegressionChoice choice,
                                         const Eigen::MatrixXd& z,
                                         const Eigen::VectorXd& target,
                                         const Eigen::VectorXd& truth,
                                         const ForestGrid& grid,
                                         std::uint64_t seed) {
  switch (choice) {
    case RegressionChoice::oracle:
      return truth;
    case RegressionChoice::constant:
      return Eigen::VectorXd::Constant(target.size(), target.mean());
    case RegressionChoice::forest_oob: {
      auto model = fit_forest(z, target, grid, /*probability=*/true, seed);
      return model->oob_predictions();
    }
    case RegressionChoice::logistic_fit: {
      auto model = fit_logistic(z, target);
      return model->predict(z);
    }
  }
  throw NumericError("unknown regression choice");
}

}  // namespace detail

// Monte-Carlo study of test behavior under the generator. Replications run
// in parallel with per-replication seeds, so results are schedule-invariant.
inline CalibrationResult run_calibration(const CalibrationConfig& cfg) {
  if (cfg.replications < 1) throw DataError("need at least 1 replication");
  const int reps = cfg.replications;
  std::vector<double> stats(reps, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> estimates(reps, 0.0);
  std::vector<char> rejected(reps, 0), one_sided(reps, 0), failed(reps, 0);

  auto worker = [&](int rep) {
    try {
      PllmSimConfig sim = cfg.sim;
      sim.seed = derive_seed(cfg.sim.seed, static_cast<std::uint64_t>(rep));
      PllmSample s = simulate_pllm(sim);
      Eigen::VectorXd h_hat = detail::regression_values(
          cfg.outcome, s.z, s.y, s.true_h, cfg.forest,
          derive_seed(sim.seed, "h"));
      Eigen::VectorXd f_hat = detail::regression_values(
          cfg.propensity, s.z, s.x, s.true_f, cfg.forest,
          derive_seed(sim.seed, "f"));
      GcmResult r = gcm_from_residuals(s.y - h_hat, s.x - f_hat);
      stats[rep] = r.statistic;
      estimates[rep] = r.mean_estimate;
      rejected[rep] = r.p_two_sided < cfg.alpha;
      one_sided[rep] = r.p_greater < cfg.alpha;
    } catch (const std::exception&) {
      failed[rep] = 1;
    }
  };

  int n_threads = std::max(1, cfg.threads);
  if (n_threads == 1) {
    for (int rep = 0; rep < reps; ++rep) worker(rep);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back([&] {
        for (int rep = next.fetch_add(1); rep < reps; rep = next.fetch_add(1))
          worker(rep);
      });
    for (auto& th : pool) th.join();
  }

  CalibrationResult out;
  out.replications = reps;
  int ok = 0;
  double sum_est = 0.0, sum_stat = 0.0, sum_stat2 = 0.0;
  int n_reject = 0, n_one_sided = 0, n_sign = 0;
  for (int rep = 0; rep < reps; ++rep) {
    if (failed[rep]) {
      ++out.failures;
      continue;
    }
    ++ok;
    sum_est += estimates[rep];
    sum_stat += stats[rep];
    sum_stat2 += stats[rep] * stats[rep];
    n_reject += rejected[rep];
    n_one_sided += one_sided[rep];
    if (cfg.sim.beta != 0.0 &&
        std::signbit(estimates[rep]) == std::signbit(cfg.sim.beta))
      ++n_sign;
  }
  if (ok == 0) throw NumericError("all calibration replications failed");
  out.rejection_rate = static_cast<double>(n_reject) / ok;
  out.one_sided_power = static_cast<double>(n_one_sided) / ok;
  out.mean_estimate = sum_est / ok;
  out.sign_agreement = cfg.sim.beta == 0.0 ? 0.0 : static_cast<double>(n_sign) / ok;
  double mean_stat = sum_stat / ok;
  out.statistic_variance = sum_stat2 / ok - mean_stat * mean_stat;
  return out;
}

// League generator from the rating model; shared-component construction.
inline MatchTable simulate_league(const TeamStrengths& truth, int n_matches,
                                  std::uint64_t seed) {
  std::vector<std::string> teams;
  for (const auto& [t, _] : truth.att) teams.push_back(t);
  if (teams.size() < 2) throw DataError("need at least two teams");
  Rng rng(seed);
  MatchTable m;
  long base_day = parse_date_days("2015-08-01");
  for (int k = 0; k < n_matches; ++k) {
    int hi = static_cast<int>(rng.below(teams.size()));
    int ai = static_cast<int>(rng.below(teams.size() - 1));
    if (ai >= hi) ++ai;
    const std::string& home = teams[hi];
    const std::string& away = teams[ai];
    double l1 = std::exp(truth.intercept + truth.att.at(home) -
                         truth.def.at(away) + truth.home_advantage);
    double l2 = std::exp(truth.intercept + truth.att.at(away) - truth.def.at(home));
    int shared = rng.poisson(truth.covariance_rate);
    int hg = rng.poisson(l1) + shared;
    int ag = rng.poisson(l2) + shared;
    long day = base_day + static_cast<long>(rng.below(300));
    // ISO date back from day count
    long z = day + 719468;
    long era = (z >= 0 ? z : z - 146096) / 146097;
    unsigned doe = static_cast<unsigned>(z - era * 146097);
    unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    long yy = static_cast<long>(yoe) + era * 400;
    unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    unsigned mp = (5 * doy + 2) / 153;
    unsigned dd = doy - (153 * mp + 2) / 5 + 1;
    unsigned mm = mp + (mp < 10 ? 3 : -9);
    yy += (mm <= 2);
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04ld-%02u-%02u", yy, mm, dd);
    m.date.push_back(buf);
    m.home_team.push_back(home);
    m.away_team.push_back(away);
    m.home_goals.push_back(hg);
    m.away_goals.push_back(ag);
  }
  return m;
}

// Proportional-hazards generator with unit-exponential baseline; the actor
// indicator is independent of the event time given Z (null design) unless
// x_coefficient is nonzero.
struct CoxSimConfig {
  int n = 500;
  int d_z = 3;
  Eigen::VectorXd z_coefficients;  // defaults to 0.5 each when empty
  double x_coefficient = 0.0;
  double censoring_rate = 0.3;  // approximate marginal censoring fraction
  std::uint64_t seed = 1;
};

inline SurvivalTable simulate_cox(const CoxSimConfig& cfg) {
  if (cfg.n < 2 || cfg.d_z < 1) throw DataError("invalid simulation size");
  Eigen::VectorXd eta = cfg.z_coefficients;
  if (eta.size() == 0) eta = Eigen::VectorXd::Constant(cfg.d_z, 0.5);
  if (eta.size() != cfg.d_z) throw DataError("coefficient dimension mismatch");
  Rng rng(cfg.seed);
  SurvivalTable s;
  s.features.resize(cfg.n, cfg.d_z);
  for (int j = 0; j < cfg.d_z; ++j)
    s.feature_names.push_back("z" + std::to_string(j + 1));
  for (int i = 0; i < cfg.n; ++i) {
    for (int j = 0; j < cfg.d_z; ++j) s.features(i, j) = rng.normal();
    double x = rng.uniform() < expit(0.5 * s.features(i, 0)) ? 1.0 : 0.0;
    double rate = std::exp(s.features.row(i) * eta + x * cfg.x_coefficient);
    double t_event = rng.exponential(rate);
    double t_obs = t_event;
    int ev = 1;
    if (cfg.censoring_rate > 0.0) {
      // exponential censoring tuned to the requested marginal fraction
      double c_rate = rate * cfg.censoring_rate / (1.0 - cfg.censoring_rate);
      double t_cens = rng.exponential(c_rate);
      if (t_cens < t_event) {
        t_obs = t_cens;
        ev = 0;
      }
    }
    s.time.push_back(t_obs);
    s.event.push_back(ev);
    s.actor_id.push_back(x > 0.5 ? "target" : "other");
  }
  s.validate();
  return s;
}

}  // namespace resmet
