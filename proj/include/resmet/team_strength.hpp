#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <string>
#include <vector>

#include "resmet/core.hpp"
#include "resmet/table.hpp"

namespace resmet {

// log of the bivariate Poisson pmf with rates (lambda1, lambda2) and shared
// component lambda_c; the k-sum runs in log space.
inline double bivpois_log_pmf(int z, int y, double lambda1, double lambda2,
                              double lambda_c) {
  if (z < 0 || y < 0) throw DataError("counts must be nonnegative");
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0) || lambda_c < 0.0)
    throw DataError("rates must be positive (lambda_c nonnegative)");
  double base = z * std::log(lambda1) + y * std::log(lambda2) -
                std::lgamma(z + 1.0) - std::lgamma(y + 1.0) -
                (lambda1 + lambda2 + lambda_c);
  if (lambda_c == 0.0) return base;  // only the k = 0 term survives
  // term_k = C(z,k) C(y,k) k! (lambda_c / (lambda1 lambda2))^k
  double log_ratio = std::log(lambda_c) - std::log(lambda1) - std::log(lambda2);
  int kmax = std::min(z, y);
  double max_term = 0.0;
  std::vector<double> log_terms(kmax + 1);
  for (int k = 0; k <= kmax; ++k) {
    double lt = std::lgamma(z + 1.0) - std::lgamma(k + 1.0) -
                std::lgamma(z - k + 1.0) + std::lgamma(y + 1.0) -
                std::lgamma(y - k + 1.0) - std::lgamma(k + 1.0) +
                std::lgamma(k + 1.0) + k * log_ratio;
    log_terms[k] = lt;
    if (k == 0 || lt > max_term) max_term = lt;
  }
  double s = 0.0;
  for (double lt : log_terms) s += std::exp(lt - max_term);
  return base + max_term + std::log(s);
}

// Posterior mean of the shared-component count k given (z, y); used by the
// analytic gradient.
inline double bivpois_posterior_k(int z, int y, double lambda1, double lambda2,
                                  double lambda_c) {
  if (lambda_c <= 0.0) return 0.0;
  int kmax = std::min(z, y);
  if (kmax == 0) return 0.0;
  double log_ratio = std::log(lambda_c) - std::log(lambda1) - std::log(lambda2);
  std::vector<double> log_terms(kmax + 1);
  double max_term = 0.0;
  for (int k = 0; k <= kmax; ++k) {
    double lt = std::lgamma(z + 1.0) - std::lgamma(k + 1.0) -
                std::lgamma(z - k + 1.0) + std::lgamma(y + 1.0) -
                std::lgamma(y - k + 1.0) + k * log_ratio;
    log_terms[k] = lt;
    if (k == 0 || lt > max_term) max_term = lt;
  }
  double num = 0.0, den = 0.0;
  for (int k = 0; k <= kmax; ++k) {
    double w = std::exp(log_terms[k] - max_term);
    num += k * w;
    den += w;
  }
  return num / den;
}

inline double recency_weight(long match_days, long reference_days,
                             double period_days) {
  if (match_days > reference_days)
    throw DataError("match dated after the reference date");
  double d = static_cast<double>(reference_days - match_days);
  return std::pow(0.5, d / period_days);
}

struct TeamStrengths {
  double intercept = 0.0;
  std::map<std::string, double> att;
  std::map<std::string, double> def;
  double home_advantage = 0.0;
  double covariance_rate = 0.0;  // lambda_c
  std::string reference_date;
  double period_days = 500.0;
  double log_likelihood = 0.0;

  nlohmann::json to_json() const {
    return {{"intercept", intercept},
            {"att", att},
            {"def", def},
            {"home_advantage", home_advantage},
            {"covariance_rate", covariance_rate},
            {"reference_date", reference_date},
            {"period_days", period_days},
            {"log_likelihood", log_likelihood}};
  }
};

namespace detail {

// BFGS maximization with backtracking line search; gradient convergence in
// the infinity norm.
struct OptimResult {
  Eigen::VectorXd x;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

inline OptimResult bfgs_maximize(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>& fn,
    Eigen::VectorXd x0, double grad_tol = 1e-6, int max_iter = 500) {
  const Eigen::Index p = x0.size();
  OptimResult res;
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(p, p);
  Eigen::VectorXd g(p);
  double f = fn(x0, &g);
  Eigen::VectorXd x = x0;
  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it;
    if (g.cwiseAbs().maxCoeff() < grad_tol) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir = H * g;
    if (dir.dot(g) <= 0.0) {
      H.setIdentity();
      dir = g;
    }
    double step = 1.0;
    double fx = f;
    Eigen::VectorXd xn, gn(p);
    double fn_val = -std::numeric_limits<double>::infinity();
    for (int ls = 0; ls < 50; ++ls) {
      xn = x + step * dir;
      fn_val = fn(xn, &gn);
      if (fn_val >= fx + 1e-4 * step * g.dot(dir)) break;
      step *= 0.5;
    }
    Eigen::VectorXd s = xn - x;
    Eigen::VectorXd yv = gn - g;  // gradient change (note: maximizing)
    double sy = -s.dot(yv);
    if (sy > 1e-12) {
      Eigen::MatrixXd I = Eigen::MatrixXd::Identity(p, p);
      Eigen::MatrixXd V = I + (s * yv.transpose()) / sy;
      H = V * H * V.transpose() + (s * s.transpose()) / sy;
    }
    x = xn;
    g = gn;
    f = fn_val;
  }
  res.x = x;
  res.value = f;
  return res;
}

}  // namespace detail

struct TeamStrengthConfig {
  double period_days = 500.0;
  // the log-likelihood is O(1e3), so its double-precision noise floor blocks
  // line-search progress well before an 1e-6 gradient is reachable
  double grad_tol = 1e-4;
  int max_iterations = 500;
  double psi_min = -30.0, psi_max = 5.0;  // lambda_c = exp(psi)
};

// Weighted maximum likelihood for the bivariate Poisson rating model. The
// sum-to-zero constraints are enforced by leaving the last team's ratings
// implied by the rest.
inline TeamStrengths fit_team_strengths(const MatchTable& matches,
                                        const std::string& reference_date = "",
                                        const TeamStrengthConfig& cfg = {}) {
  if (matches.n() == 0) throw DataError("empty match table");

  std::set<std::string> team_set;
  for (std::size_t m = 0; m < matches.n(); ++m) {
    team_set.insert(matches.home_team[m]);
    team_set.insert(matches.away_team[m]);
  }
  std::vector<std::string> teams(team_set.begin(), team_set.end());
  const int T = static_cast<int>(teams.size());
  if (T < 2) throw DataError("need at least two teams");
  std::map<std::string, int> index;
  for (int i = 0; i < T; ++i) index[teams[i]] = i;

  // connectivity check over the schedule graph
  {
    std::vector<std::vector<int>> adj(T);
    for (std::size_t m = 0; m < matches.n(); ++m) {
      int a = index[matches.home_team[m]], b = index[matches.away_team[m]];
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    std::vector<char> seen(T, 0);
    std::vector<int> stack = {0};
    seen[0] = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : adj[v])
        if (!seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
    }
    for (int i = 0; i < T; ++i)
      if (!seen[i])
        throw DataError("disconnected schedule: team '" + teams[i] +
                        "' unreachable; ratings unidentified");
  }

  long ref_days;
  std::string ref_str = reference_date;
  if (ref_str.empty()) {
    long latest = std::numeric_limits<long>::min();
    for (std::size_t m = 0; m < matches.n(); ++m) {
      long d = parse_date_days(matches.date[m]);
      if (d > latest) {
        latest = d;
        ref_str = matches.date[m];
      }
    }
    ref_days = latest;
  } else {
    ref_days = parse_date_days(ref_str);
  }

  std::vector<double> weights(matches.n());
  for (std::size_t m = 0; m < matches.n(); ++m)
    weights[m] = recency_weight(parse_date_days(matches.date[m]), ref_days,
                                cfg.period_days);

  // theta layout: [beta0, att_0..att_{T-2}, def_0..def_{T-2}, home, psi]
  const int P = 1 + 2 * (T - 1) + 2;
  auto unpack = [&](const Eigen::VectorXd& th, std::vector<double>& att,
                    std::vector<double>& def, double& b0, double& home,
                    double& psi) {
    b0 = th(0);
    att.assign(T, 0.0);
    def.assign(T, 0.0);
    double sa = 0.0, sd = 0.0;
    for (int i = 0; i < T - 1; ++i) {
      att[i] = th(1 + i);
      def[i] = th(T + i);
      sa += att[i];
      sd += def[i];
    }
    att[T - 1] = -sa;
    def[T - 1] = -sd;
    home = th(2 * T - 1);
    psi = std::clamp(th(2 * T), cfg.psi_min, cfg.psi_max);
  };

  auto objective = [&](const Eigen::VectorXd& th, Eigen::VectorXd* grad_out) {
    std::vector<double> att, def;
    double b0, home, psi;
    unpack(th, att, def, b0, home, psi);
    double lc = std::exp(psi);
    double ll = 0.0;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(P);
    std::vector<double> g_att(T, 0.0), g_def(T, 0.0);
    for (std::size_t m = 0; m < matches.n(); ++m) {
      int hi = index.at(matches.home_team[m]);
      int ai = index.at(matches.away_team[m]);
      int z = matches.home_goals[m], y = matches.away_goals[m];
      double l1 = std::exp(b0 + att[hi] - def[ai] + home);
      double l2 = std::exp(b0 + att[ai] - def[hi]);
      double w = weights[m];
      ll += w * bivpois_log_pmf(z, y, l1, l2, lc);
      if (grad_out) {
        double ek = bivpois_posterior_k(z, y, l1, l2, lc);
        // d logP / d log(lambda1) = z - ek - lambda1, similarly for lambda2
        double d1 = w * (z - ek - l1);
        double d2 = w * (y - ek - l2);
        g(0) += d1 + d2;
        g_att[hi] += d1;
        g_att[ai] += d2;
        g_def[ai] -= d1;
        g_def[hi] -= d2;
        g(2 * T - 1) += d1;
        g(2 * T) += w * (ek - lc);
      }
    }
    if (grad_out) {
      for (int i = 0; i < T - 1; ++i) {
        g(1 + i) = g_att[i] - g_att[T - 1];
        g(T + i) = g_def[i] - g_def[T - 1];
      }
      // freeze psi at a clamped bound pushing further out
      if ((th(2 * T) <= cfg.psi_min && g(2 * T) < 0.0) ||
          (th(2 * T) >= cfg.psi_max && g(2 * T) > 0.0))
        g(2 * T) = 0.0;
      *grad_out = g;
    }
    return ll;
  };

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(P);
  x0(2 * T) = -10.0;  // start near the independent-Poisson corner
  auto res = detail::bfgs_maximize(objective, x0, cfg.grad_tol,
                                   cfg.max_iterations);
  if (!res.converged)
    throw NumericError("team strength fit did not converge after " +
                       std::to_string(cfg.max_iterations) + " iterations");

  std::vector<double> att, def;
  double b0, home, psi;
  unpack(res.x, att, def, b0, home, psi);
  TeamStrengths out;
  out.intercept = b0;
  out.home_advantage = home;
  out.covariance_rate = std::exp(psi);
  out.reference_date = ref_str;
  out.period_days = cfg.period_days;
  out.log_likelihood = res.value;
  for (int i = 0; i < T; ++i) {
    out.att[teams[i]] = att[i];
    out.def[teams[i]] = def[i];
  }
  return out;
}

enum class StrengthSide { defending, attacking };

// Appends the opponent defensive (or shooting-team attacking) strength as a
// numeric feature column. Attacking-side attachment is refused for goal-type
// pipelines unless explicitly overridden: a player influences their own
// team's offensive rating, which would absorb the effect under test.
inline EventTable attach_strength_features(const EventTable& shots,
                                           const TeamStrengths& strengths,
                                           StrengthSide side,
                                           bool allow_attacking_for_gax = false) {
  if (side == StrengthSide::attacking &&
      shots.discipline == Discipline::shot && !allow_attacking_for_gax)
    throw DataError(
        "attacking-side strength attachment on a shot (gax) pipeline is "
        "refused; pass the override flag to force it");
  EventTable out = shots;
  std::string col_name =
      side == StrengthSide::defending ? "def_opponent" : "att_team";
  std::vector<double> col;
  col.reserve(shots.n());
  for (std::size_t i = 0; i < shots.n(); ++i) {
    const std::string& team =
        side == StrengthSide::defending ? shots.team_against[i] : shots.team_for[i];
    const auto& ratings =
        side == StrengthSide::defending ? strengths.def : strengths.att;
    auto it = ratings.find(team);
    if (it == ratings.end()) throw DataError("unknown team: " + team);
    col.push_back(it->second);
  }
  out.schema.push_back({col_name, ColumnKind::numeric});
  out.numeric_cols[col_name] = std::move(col);
  return out;
}

inline void write_strengths_csv(const std::string& path,
                                const TeamStrengths& s) {
  csv::Table t;
  t.header = {"team", "att", "def"};
  for (const auto& [team, a] : s.att)
    t.rows.push_back({team, csv::format_double(a),
                      csv::format_double(s.def.at(team))});
  csv::write_file(path, t);
}

}  // namespace resmet
