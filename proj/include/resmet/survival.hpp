#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "resmet/gcm.hpp"
#include "resmet/logistic.hpp"
#include "resmet/regressor.hpp"
#include "resmet/table.hpp"

namespace resmet {

struct SurvivalTable {
  std::vector<double> time;   // observed time, min(event time, censoring time)
  std::vector<int> event;     // 1 event, 0 censored
  std::vector<std::string> actor_id;
  Eigen::MatrixXd features;   // n x p, may have p = 0
  std::vector<std::string> feature_names;

  std::size_t n() const { return time.size(); }

  void validate() const {
    if (event.size() != n() || actor_id.size() != n() ||
        static_cast<std::size_t>(features.rows()) != n())
      throw DataError("survival table field lengths differ");
    for (double t : time)
      if (!(t > 0.0)) throw DataError("times must be strictly positive");
    for (int e : event)
      if (e != 0 && e != 1) throw DataError("event flag must be 0/1");
  }

  static SurvivalTable from_event_table(const EventTable& t) {
    if (t.discipline != Discipline::injury_spell)
      throw DataError("expected an injury-spell table");
    SurvivalTable s;
    s.time = t.outcome;
    s.event.reserve(t.n());
    for (double e : t.event_flag) s.event.push_back(static_cast<int>(e));
    s.actor_id = t.actor_id;
    // numeric features only; categoricals go through an Encoder upstream
    std::vector<const std::vector<double>*> cols;
    for (const auto& c : t.schema) {
      if (c.kind != ColumnKind::categorical) {
        s.feature_names.push_back(c.name);
        cols.push_back(&t.numeric(c.name));
      }
    }
    s.features.resize(static_cast<Eigen::Index>(t.n()),
                      static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
      for (std::size_t i = 0; i < t.n(); ++i)
        s.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            (*cols[j])[i];
    s.validate();
    return s;
  }
};

enum class HazardFamily { nelson_aalen, cox_breslow };

// Step-function cumulative hazard, optionally scaled by exp(z'eta).
class CumulativeHazardModel {
 public:
  HazardFamily family = HazardFamily::nelson_aalen;
  std::vector<double> times;    // strictly increasing event times
  std::vector<double> cumhaz;   // baseline cumulative hazard at each time
  Eigen::VectorXd coefficients; // empty for nelson-aalen

  double baseline(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0.0;
    return cumhaz[static_cast<std::size_t>(it - times.begin()) - 1];
  }

  double evaluate(double t, const Eigen::RowVectorXd& z) const {
    double base = baseline(t);
    if (family == HazardFamily::nelson_aalen || coefficients.size() == 0)
      return base;
    if (z.size() != coefficients.size())
      throw DataError("feature dimension mismatch in hazard evaluation");
    return base * std::exp(z * coefficients);
  }
};

inline CumulativeHazardModel fit_nelson_aalen(const SurvivalTable& table) {
  table.validate();
  const std::size_t n = table.n();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return table.time[a] < table.time[b];
  });

  CumulativeHazardModel m;
  m.family = HazardFamily::nelson_aalen;
  double cum = 0.0;
  std::size_t i = 0;
  bool any_event = false;
  while (i < n) {
    double t = table.time[order[i]];
    std::size_t at_risk = n - i;
    int d = 0;
    std::size_t j = i;
    while (j < n && table.time[order[j]] == t) {
      d += table.event[order[j]];
      ++j;
    }
    if (d > 0) {
      any_event = true;
      cum += static_cast<double>(d) / static_cast<double>(at_risk);
      m.times.push_back(t);
      m.cumhaz.push_back(cum);
    }
    i = j;
  }
  if (!any_event) throw DataError("no events in survival table");
  return m;
}

struct CoxConfig {
  double tol = 1e-8;
  int max_iterations = 50;
  double divergence_norm = 20.0;  // monotone-likelihood guard
};

// Proportional-hazards fit by Newton-Raphson on the partial likelihood with
// Breslow tie handling and Breslow baseline.
inline CumulativeHazardModel fit_cox_breslow(const SurvivalTable& table,
                                             const CoxConfig& cfg = {}) {
  table.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(table.n());
  const Eigen::Index p = table.features.cols();
  if (p == 0) throw DataError("cox fit needs at least one feature");
  int n_events = std::accumulate(table.event.begin(), table.event.end(), 0);
  if (n_events == 0) throw DataError("no events in survival table");

  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(table.features);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) throw RankDeficiencyError("rank-deficient cox design");
  }

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return table.time[a] < table.time[b];
  });

  Eigen::VectorXd eta = Eigen::VectorXd::Zero(p);
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    Eigen::VectorXd exp_lp(n);
    for (Eigen::Index i = 0; i < n; ++i)
      exp_lp(i) = std::exp(table.features.row(i) * eta);

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(p, p);
    // suffix accumulation over the risk set, walking from the latest time
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
    Eigen::Index i = n;
    while (i > 0) {
      double t = table.time[order[i - 1]];
      Eigen::Index j = i;
      while (j > 0 && table.time[order[j - 1]] == t) {
        Eigen::Index r = order[j - 1];
        double w = exp_lp(r);
        s0 += w;
        s1 += w * table.features.row(r).transpose();
        s2 += w * table.features.row(r).transpose() * table.features.row(r);
        --j;
      }
      for (Eigen::Index k = j; k < i; ++k) {
        Eigen::Index r = order[k];
        if (table.event[r]) {
          grad += table.features.row(r).transpose() - s1 / s0;
          hess += s2 / s0 - (s1 / s0) * (s1 / s0).transpose();
        }
      }
      i = j;
    }
    Eigen::VectorXd delta = hess.ldlt().solve(grad);
    eta += delta;
    if (eta.cwiseAbs().maxCoeff() > cfg.divergence_norm)
      throw SeparationError("monotone partial likelihood: coefficients diverged");
    if (delta.cwiseAbs().maxCoeff() < cfg.tol) break;
    if (iter == cfg.max_iterations - 1)
      throw NumericError("cox fit did not converge");
  }

  // Breslow baseline
  CumulativeHazardModel m;
  m.family = HazardFamily::cox_breslow;
  m.coefficients = eta;
  Eigen::VectorXd exp_lp(n);
  for (Eigen::Index i = 0; i < n; ++i)
    exp_lp(i) = std::exp(table.features.row(i) * eta);
  double cum = 0.0;
  Eigen::Index i = 0;
  while (i < n) {
    double t = table.time[order[i]];
    double risk = 0.0;
    for (Eigen::Index k = i; k < n; ++k) risk += exp_lp(order[k]);
    int d = 0;
    Eigen::Index j = i;
    while (j < n && table.time[order[j]] == t) {
      d += table.event[order[j]];
      ++j;
    }
    if (d > 0) {
      cum += static_cast<double>(d) / risk;
      m.times.push_back(t);
      m.cumhaz.push_back(cum);
    }
    i = j;
  }
  return m;
}

inline Eigen::VectorXd martingale_residuals(const CumulativeHazardModel& model,
                                            const SurvivalTable& table) {
  table.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(table.n());
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out(i) = table.event[static_cast<std::size_t>(i)] -
             model.evaluate(table.time[static_cast<std::size_t>(i)],
                            table.features.row(i));
  return out;
}

}  // namespace resmet
