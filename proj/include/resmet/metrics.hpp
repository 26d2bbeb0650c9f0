#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "resmet/encoder.hpp"
#include "resmet/forest.hpp"
#include "resmet/gbt.hpp"
#include "resmet/gcm.hpp"
#include "resmet/logistic.hpp"
#include "resmet/model_io.hpp"
#include "resmet/multiplicity.hpp"
#include "resmet/survival.hpp"
#include "resmet/table.hpp"

namespace resmet {

enum class Metric { gax, gsax, qsi, cpae, iax };

inline std::string to_string(Metric m) {
  switch (m) {
    case Metric::gax: return "gax";
    case Metric::gsax: return "gsax";
    case Metric::qsi: return "qsi";
    case Metric::cpae: return "cpae";
    case Metric::iax: return "iax";
  }
  throw NumericError("unknown metric");
}

inline Metric metric_from_string(const std::string& s) {
  if (s == "gax") return Metric::gax;
  if (s == "gsax") return Metric::gsax;
  if (s == "qsi") return Metric::qsi;
  if (s == "cpae") return Metric::cpae;
  if (s == "iax") return Metric::iax;
  throw DataError("unknown metric: " + s);
}

enum class QsiOutcome { indicator, score_value };
enum class PropensityFamily { forest, gbt, logistic, constant_mean, zero };

inline PropensityFamily propensity_from_string(const std::string& s) {
  if (s == "forest") return PropensityFamily::forest;
  if (s == "gbt") return PropensityFamily::gbt;
  if (s == "logistic") return PropensityFamily::logistic;
  if (s == "constant") return PropensityFamily::constant_mean;
  if (s == "zero") return PropensityFamily::zero;
  throw DataError("unknown propensity family: " + s);
}

inline std::string to_string(PropensityFamily f) {
  switch (f) {
    case PropensityFamily::forest: return "forest";
    case PropensityFamily::gbt: return "gbt";
    case PropensityFamily::logistic: return "logistic";
    case PropensityFamily::constant_mean: return "constant";
    case PropensityFamily::zero: return "zero";
  }
  throw NumericError("unknown propensity family");
}

enum class CrossFit { none, oob, kfold };

struct MetricConfig {
  Metric metric = Metric::gax;
  QsiOutcome qsi_outcome = QsiOutcome::indicator;
  PropensityFamily propensity = PropensityFamily::forest;
  ForestGrid forest_grid;
  GbtGrid gbt_grid;
  CrossFit cross_fit = CrossFit::oob;  // applies to forest propensity fits
  int kfold = 5;
  IntervalSpec interval;
  AdjustmentMethod adjust = AdjustmentMethod::none;
  std::uint64_t seed = 1;
  int threads = 1;

  // gsax reports goals prevented, so the residual products flip sign
  bool sign_flip() const { return metric == Metric::gsax; }

  bool probability_outcome() const {
    return !(metric == Metric::qsi && qsi_outcome == QsiOutcome::score_value);
  }

  void validate(const EventTable& table) const {
    interval.validate();
    if (metric == Metric::gsax && table.discipline != Discipline::shot_on_target)
      throw DataError("gsax requires an on-target-filtered table");
    if (metric == Metric::qsi && qsi_outcome == QsiOutcome::score_value &&
        table.discipline != Discipline::basketball_shot)
      throw DataError("score-value outcome mode requires a basketball table");
  }
};

struct ActorEvaluation {
  std::string actor_id;
  std::size_t n_units = 0;
  double classical = 0.0;
  GcmResult gcm;
  Interval interval;
  double p_raw = 1.0;      // per the interval spec's sidedness and rho0
  double p_adjusted = 1.0;
  int rank = 0;            // by residualized metric, descending
};

struct ActorFailure {
  std::string actor_id;
  std::string error;
};

struct EvaluationReport {
  std::vector<ActorEvaluation> actors;   // sorted by rank
  std::vector<ActorFailure> failures;
  double pearson_r = 0.0;  // classical vs residualized across actors
  AdjustmentMethod adjust = AdjustmentMethod::none;
  Sidedness sidedness = Sidedness::two_sided;
  double rho0 = 0.0;
  double level = 0.95;
  Metric metric = Metric::gax;
  std::uint64_t seed = 1;
};

// Sum over the actor's rows of (Y - hhat), negated for keeper-style metrics.
inline double compute_classical(const EventTable& table,
                                const std::string& actor,
                                const Eigen::VectorXd& h_hat, bool sign_flip) {
  std::vector<double> x = actor_indicator(table, actor);
  double total = 0.0;
  for (std::size_t i = 0; i < table.n(); ++i)
    if (x[i] > 0.5)
      total += table.outcome[i] - h_hat(static_cast<Eigen::Index>(i));
  return sign_flip ? -total : total;
}

namespace detail {

// Fits the propensity of `actor` on the encoded outcome-model features and
// returns f_hat for every row (OOB values for training rows when requested).
inline Eigen::VectorXd propensity_predictions(const Eigen::MatrixXd& z,
                                              const Eigen::VectorXd& x,
                                              const MetricConfig& cfg,
                                              std::uint64_t actor_seed) {
  switch (cfg.propensity) {
    case PropensityFamily::zero:
      return Eigen::VectorXd::Zero(x.size());
    case PropensityFamily::constant_mean:
      return Eigen::VectorXd::Constant(x.size(), x.mean());
    case PropensityFamily::forest: {
      if (cfg.cross_fit == CrossFit::kfold) break;
      auto model = fit_forest(z, x, cfg.forest_grid, true, actor_seed);
      return cfg.cross_fit == CrossFit::oob ? model->oob_predictions()
                                            : model->predict(z);
    }
    case PropensityFamily::gbt: {
      if (cfg.cross_fit == CrossFit::kfold) break;
      auto model = fit_gbt(z, x, cfg.gbt_grid, BoostLoss::logistic, actor_seed);
      return model->predict(z);
    }
    case PropensityFamily::logistic: {
      if (cfg.cross_fit == CrossFit::kfold) break;
      auto model = fit_logistic(z, x);
      return model->predict(z);
    }
  }

  // k-fold cross-fitting: each row predicted by a model that never saw it
  const Eigen::Index n = x.size();
  const int k = std::max(2, cfg.kfold);
  Rng rng(derive_seed(actor_seed, "kfold"));
  std::vector<int> fold_of(n);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (Eigen::Index i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.below(static_cast<std::uint64_t>(i + 1))]);
  for (Eigen::Index i = 0; i < n; ++i) fold_of[perm[i]] = static_cast<int>(i % k);

  Eigen::VectorXd out(n);
  for (int fold = 0; fold < k; ++fold) {
    std::vector<Eigen::Index> train, held;
    for (Eigen::Index i = 0; i < n; ++i)
      (fold_of[i] == fold ? held : train).push_back(i);
    Eigen::MatrixXd zt(train.size(), z.cols());
    Eigen::VectorXd xt(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      zt.row(static_cast<Eigen::Index>(i)) = z.row(train[i]);
      xt(static_cast<Eigen::Index>(i)) = x(train[i]);
    }
    Eigen::MatrixXd zh(held.size(), z.cols());
    for (std::size_t i = 0; i < held.size(); ++i)
      zh.row(static_cast<Eigen::Index>(i)) = z.row(held[i]);
    std::uint64_t fold_seed = derive_seed(actor_seed, "fold-" + std::to_string(fold));
    Eigen::VectorXd pred;
    if (cfg.propensity == PropensityFamily::forest) {
      pred = fit_forest(zt, xt, cfg.forest_grid, true, fold_seed)->predict(zh);
    } else if (cfg.propensity == PropensityFamily::gbt) {
      pred = fit_gbt(zt, xt, cfg.gbt_grid, BoostLoss::logistic, fold_seed)->predict(zh);
    } else {
      pred = fit_logistic(zt, xt)->predict(zh);
    }
    for (std::size_t i = 0; i < held.size(); ++i)
      out(held[i]) = pred(static_cast<Eigen::Index>(i));
  }
  return out;
}

}  // namespace detail

// One actor's residualized evaluation from a shared outcome prediction
// column and a freshly fitted propensity.
inline ActorEvaluation compute_residualized(const EventTable& table,
                                            const std::string& actor,
                                            const Eigen::VectorXd& h_hat,
                                            const Eigen::MatrixXd& z_encoded,
                                            const MetricConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(table.n());
  if (h_hat.size() != n || z_encoded.rows() != n)
    throw DataError("outcome predictions / design size mismatch");

  std::vector<double> xv = actor_indicator(table, actor);
  Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(xv.data(), n);

  std::uint64_t actor_seed = derive_seed(cfg.seed, actor);
  Eigen::VectorXd f_hat;
  try {
    f_hat = detail::propensity_predictions(z_encoded, x, cfg, actor_seed);
  } catch (const std::exception& e) {
    throw NumericError("propensity fit failed for actor '" + actor +
                       "': " + e.what());
  }

  Eigen::VectorXd r_y(n), r_x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double h = cfg.probability_outcome() ? clip_probability(h_hat(i)) : h_hat(i);
    double f = clip_probability(f_hat(i));
    r_y(i) = table.outcome[static_cast<std::size_t>(i)] - h;
    r_x(i) = x(i) - (cfg.propensity == PropensityFamily::zero ? 0.0 : f);
  }

  ActorEvaluation eval;
  eval.actor_id = actor;
  eval.n_units = static_cast<std::size_t>(x.sum());
  eval.classical = compute_classical(table, actor, h_hat, cfg.sign_flip());
  try {
    eval.gcm = gcm_from_residuals(r_y, r_x, cfg.sign_flip());
  } catch (const DegenerateVarianceError& e) {
    throw DegenerateVarianceError("actor '" + actor + "': " + e.what());
  }
  eval.interval = confidence_interval(eval.gcm, cfg.interval);
  eval.p_raw = p_value_for(eval.gcm, cfg.interval);
  return eval;
}

inline double pearson_correlation(const std::vector<double>& a,
                                  const std::vector<double>& b) {
  const std::size_t n = a.size();
  if (n < 2 || b.size() != n) return 0.0;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    sa += (a[i] - ma) * (a[i] - ma);
    sb += (b[i] - mb) * (b[i] - mb);
  }
  if (sa <= 0.0 || sb <= 0.0) return 0.0;
  return sab / std::sqrt(sa * sb);
}

namespace detail {

// Rank by residualized estimate, attach Pearson R and adjusted p-values.
inline void finalize_report(EvaluationReport& report, AdjustmentMethod adjust) {
  if (report.actors.empty())
    throw NumericError("every actor evaluation failed");
  std::stable_sort(report.actors.begin(), report.actors.end(),
                   [](const ActorEvaluation& a, const ActorEvaluation& b) {
                     if (a.gcm.sum_scale_estimate != b.gcm.sum_scale_estimate)
                       return a.gcm.sum_scale_estimate > b.gcm.sum_scale_estimate;
                     return a.actor_id < b.actor_id;
                   });
  std::vector<double> classical, residualized, p_raw;
  for (std::size_t i = 0; i < report.actors.size(); ++i) {
    report.actors[i].rank = static_cast<int>(i + 1);
    classical.push_back(report.actors[i].classical);
    residualized.push_back(report.actors[i].gcm.sum_scale_estimate);
    p_raw.push_back(report.actors[i].p_raw);
  }
  report.pearson_r = pearson_correlation(classical, residualized);
  std::vector<double> adj = adjust_pvalues(p_raw, adjust);
  for (std::size_t i = 0; i < report.actors.size(); ++i)
    report.actors[i].p_adjusted = adj[i];
}

}  // namespace detail

// Per-actor evaluations over a cohort; actor order and per-actor seeds are
// fixed, so the report is identical for any thread count.
inline EvaluationReport evaluate_all(const EventTable& table,
                                     const std::set<std::string>& cohort,
                                     const Eigen::VectorXd& h_hat,
                                     const MetricConfig& cfg) {
  cfg.validate(table);
  if (cohort.empty()) throw DataError("empty cohort");

  Encoder encoder = Encoder::fit(table);
  Eigen::MatrixXd z = encoder.transform(table);

  std::vector<std::string> actors(cohort.begin(), cohort.end());
  const int n_actors = static_cast<int>(actors.size());
  std::vector<ActorEvaluation> evals(n_actors);
  std::vector<std::string> errors(n_actors);
  std::vector<char> ok(n_actors, 0);

  auto worker = [&](int idx) {
    try {
      evals[idx] = compute_residualized(table, actors[idx], h_hat, z, cfg);
      ok[idx] = 1;
    } catch (const std::exception& e) {
      errors[idx] = e.what();
    }
  };
  int n_threads = std::max(1, cfg.threads);
  if (n_threads == 1) {
    for (int i = 0; i < n_actors; ++i) worker(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < n_actors; i = next.fetch_add(1))
          worker(i);
      });
    for (auto& th : pool) th.join();
  }

  EvaluationReport report;
  report.metric = cfg.metric;
  report.adjust = cfg.adjust;
  report.sidedness = cfg.interval.sidedness;
  report.rho0 = cfg.interval.rho0;
  report.level = cfg.interval.level;
  report.seed = cfg.seed;
  for (int i = 0; i < n_actors; ++i) {
    if (ok[i])
      report.actors.push_back(std::move(evals[i]));
    else
      report.failures.push_back({actors[i], errors[i]});
  }
  detail::finalize_report(report, cfg.adjust);
  return report;
}

// Time-to-event variant: the outcome residual is the martingale residual
// from a hazard fit on the full table (Cox when features are present,
// Nelson-Aalen otherwise); the propensity side is unchanged.
inline EvaluationReport evaluate_iax(const EventTable& table,
                                     const std::set<std::string>& cohort,
                                     const MetricConfig& cfg) {
  if (table.discipline != Discipline::injury_spell)
    throw DataError("iax requires an injury-spell table");
  if (cohort.empty()) throw DataError("empty cohort");

  Encoder encoder = Encoder::fit(table);
  Eigen::MatrixXd z = encoder.transform(table);

  SurvivalTable surv;
  surv.time = table.outcome;
  for (double e : table.event_flag) surv.event.push_back(static_cast<int>(e));
  surv.actor_id = table.actor_id;
  surv.features = z;
  surv.feature_names = encoder.feature_names();

  CumulativeHazardModel hazard = z.cols() > 0 ? fit_cox_breslow(surv)
                                              : fit_nelson_aalen(surv);
  Eigen::VectorXd r_y = martingale_residuals(hazard, surv);

  EvaluationReport report;
  report.metric = Metric::iax;
  report.adjust = cfg.adjust;
  report.sidedness = cfg.interval.sidedness;
  report.rho0 = cfg.interval.rho0;
  report.level = cfg.interval.level;
  report.seed = cfg.seed;
  const auto n = static_cast<Eigen::Index>(table.n());
  for (const auto& actor : cohort) {
    try {
      std::vector<double> xv = actor_indicator(table, actor);
      Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(xv.data(), n);
      Eigen::VectorXd f_hat = detail::propensity_predictions(
          z, x, cfg, derive_seed(cfg.seed, actor));
      Eigen::VectorXd r_x(n);
      for (Eigen::Index i = 0; i < n; ++i)
        r_x(i) = x(i) - (cfg.propensity == PropensityFamily::zero
                             ? 0.0
                             : clip_probability(f_hat(i)));
      ActorEvaluation eval;
      eval.actor_id = actor;
      eval.n_units = static_cast<std::size_t>(x.sum());
      eval.classical = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (x(i) > 0.5) eval.classical += r_y(i);
      eval.gcm = gcm_from_residuals(r_y, r_x);
      eval.interval = confidence_interval(eval.gcm, cfg.interval);
      eval.p_raw = p_value_for(eval.gcm, cfg.interval);
      report.actors.push_back(std::move(eval));
    } catch (const std::exception& e) {
      report.failures.push_back({actor, e.what()});
    }
  }
  detail::finalize_report(report, cfg.adjust);
  return report;
}

struct ModelComparison {
  std::vector<std::string> actors;
  // metric value per actor (outer) per model (inner)
  std::vector<std::vector<double>> classical;
  std::vector<std::vector<double>> residualized;
  // least-squares fit of model b's values on model a's, per ordered pair
  struct Line {
    std::size_t model_a = 0, model_b = 0;
    double slope_classical = 1.0, intercept_classical = 0.0;
    double slope_residualized = 1.0, intercept_residualized = 0.0;
  };
  std::vector<Line> lines;
  double dispersion_classical = 0.0;    // mean abs pairwise cross-model diff
  double dispersion_residualized = 0.0;
};

namespace detail {

inline std::pair<double, double> regression_line(const std::vector<double>& xs,
                                                 const std::vector<double>& ys) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= xs.size();
  my /= xs.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  double slope = sxx > 0.0 ? sxy / sxx : 1.0;
  return {slope, my - slope * mx};
}

}  // namespace detail

// Classical and residualized metrics per actor under each outcome model,
// with cross-model regression lines and aggregate dispersion.
inline ModelComparison compare_models_robustness(
    const EventTable& table, const std::set<std::string>& cohort,
    const std::vector<Eigen::VectorXd>& outcome_predictions,
    const MetricConfig& cfg) {
  if (outcome_predictions.size() < 2)
    throw DataError("need at least two outcome models to compare");
  cfg.validate(table);

  Encoder encoder = Encoder::fit(table);
  Eigen::MatrixXd z = encoder.transform(table);

  ModelComparison cmp;
  for (const auto& actor : cohort) {
    std::vector<double> cls, res;
    bool failed = false;
    for (const auto& h_hat : outcome_predictions) {
      try {
        ActorEvaluation ev = compute_residualized(table, actor, h_hat, z, cfg);
        cls.push_back(ev.classical);
        res.push_back(ev.gcm.sum_scale_estimate);
      } catch (const std::exception&) {
        failed = true;
        break;
      }
    }
    if (failed) continue;
    cmp.actors.push_back(actor);
    cmp.classical.push_back(std::move(cls));
    cmp.residualized.push_back(std::move(res));
  }
  if (cmp.actors.empty()) throw NumericError("no actor evaluated under all models");

  const std::size_t n_models = outcome_predictions.size();
  for (std::size_t a = 0; a < n_models; ++a) {
    for (std::size_t b = a + 1; b < n_models; ++b) {
      std::vector<double> ca, cb, ra, rb;
      for (std::size_t i = 0; i < cmp.actors.size(); ++i) {
        ca.push_back(cmp.classical[i][a]);
        cb.push_back(cmp.classical[i][b]);
        ra.push_back(cmp.residualized[i][a]);
        rb.push_back(cmp.residualized[i][b]);
      }
      ModelComparison::Line line;
      line.model_a = a;
      line.model_b = b;
      std::tie(line.slope_classical, line.intercept_classical) =
          detail::regression_line(ca, cb);
      std::tie(line.slope_residualized, line.intercept_residualized) =
          detail::regression_line(ra, rb);
      cmp.lines.push_back(line);
    }
  }

  double dc = 0.0, dr = 0.0;
  std::size_t n_pairs = 0;
  for (std::size_t i = 0; i < cmp.actors.size(); ++i) {
    for (std::size_t a = 0; a < n_models; ++a) {
      for (std::size_t b = a + 1; b < n_models; ++b) {
        dc += std::abs(cmp.classical[i][a] - cmp.classical[i][b]);
        dr += std::abs(cmp.residualized[i][a] - cmp.residualized[i][b]);
        ++n_pairs;
      }
    }
  }
  cmp.dispersion_classical = dc / static_cast<double>(n_pairs);
  cmp.dispersion_residualized = dr / static_cast<double>(n_pairs);
  return cmp;
}

}  // namespace resmet
