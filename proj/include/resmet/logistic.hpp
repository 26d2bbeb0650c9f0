#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "resmet/regressor.hpp"

namespace resmet {

struct SeparationError : NumericError {
  using NumericError::NumericError;
};

struct RankDeficiencyError : NumericError {
  using NumericError::NumericError;
};

class LogisticModel final : public Regressor {
 public:
  LogisticModel(Eigen::VectorXd coef, bool intercept, double loglik, int iters)
      : coef_(std::move(coef)),
        intercept_(intercept),
        loglik_(loglik),
        iterations_(iters) {}

  Family family() const override { return Family::logistic_linear; }
  Eigen::Index input_dim() const override {
    return coef_.size() - (intercept_ ? 1 : 0);
  }

  // gamma; intercept first when present.
  const Eigen::VectorXd& coefficients() const { return coef_; }
  double log_likelihood() const { return loglik_; }
  int iterations() const { return iterations_; }

  Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& X) const {
    check_dim(X);
    Eigen::VectorXd eta =
        X * coef_.tail(coef_.size() - (intercept_ ? 1 : 0));
    if (intercept_) eta.array() += coef_(0);
    return eta;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    Eigen::VectorXd eta = linear_predictor(X);
    for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) = expit(eta(i));
    return eta;
  }

  nlohmann::json to_json() const override {
    std::vector<double> c(coef_.data(), coef_.data() + coef_.size());
    return {{"family", "logistic-linear"},
            {"coefficients", c},
            {"intercept", intercept_},
            {"loglik", loglik_},
            {"iterations", iterations_}};
  }

  static std::unique_ptr<LogisticModel> from_json(const nlohmann::json& j) {
    auto c = j.at("coefficients").get<std::vector<double>>();
    Eigen::VectorXd coef =
        Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    return std::make_unique<LogisticModel>(coef, j.at("intercept").get<bool>(),
                                           j.at("loglik").get<double>(),
                                           j.at("iterations").get<int>());
  }

 private:
  Eigen::VectorXd coef_;
  bool intercept_;
  double loglik_;
  int iterations_;
};

struct LogisticConfig {
  bool add_intercept = true;
  double tol = 1e-8;          // max coefficient change
  int max_iterations = 100;
  double separation_norm = 30.0;  // inf-norm threshold on coefficients
};

namespace detail {

inline double bernoulli_loglik(const Eigen::VectorXd& y,
                               const Eigen::VectorXd& eta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    // log(expit) written via log1p to stay finite for large |eta|
    double e = eta(i);
    double log_p = e >= 0 ? -std::log1p(std::exp(-e)) : e - std::log1p(std::exp(e));
    double log_q = e >= 0 ? -e - std::log1p(std::exp(-e)) : -std::log1p(std::exp(e));
    ll += y(i) * log_p + (1.0 - y(i)) * log_q;
  }
  return ll;
}

}  // namespace detail

// Maximum-likelihood logistic regression via iteratively reweighted least
// squares with step halving. Throws RankDeficiencyError on collinear designs
// and SeparationError when coefficients diverge.
inline std::unique_ptr<LogisticModel> fit_logistic(
    const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
    const LogisticConfig& cfg = {}, std::vector<std::string> names = {}) {
  const Eigen::Index n = features.rows();
  if (targets.size() != n) throw DataError("features/targets length mismatch");
  for (Eigen::Index i = 0; i < n; ++i)
    if (targets(i) != 0.0 && targets(i) != 1.0)
      throw DataError("logistic targets must be binary");

  Eigen::MatrixXd X;
  if (cfg.add_intercept) {
    X.resize(n, features.cols() + 1);
    X.col(0).setOnes();
    X.rightCols(features.cols()) = features;
  } else {
    X = features;
  }
  const Eigen::Index p = X.cols();
  if (n < p) throw RankDeficiencyError("fewer rows than columns");

  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
      // name the dependent columns via the pivot tail
      std::string msg = "rank-deficient design; dependent columns:";
      auto perm = qr.colsPermutation().indices();
      for (Eigen::Index k = qr.rank(); k < p; ++k) {
        Eigen::Index c = perm(k);
        Eigen::Index fc = cfg.add_intercept ? c - 1 : c;
        if (cfg.add_intercept && c == 0) {
          msg += " <intercept>";
        } else if (static_cast<std::size_t>(fc) < names.size()) {
          msg += " " + names[static_cast<std::size_t>(fc)];
        } else {
          msg += " #" + std::to_string(fc);
        }
      }
      throw RankDeficiencyError(msg);
    }
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = X * beta;
  double ll = detail::bernoulli_loglik(targets, eta);
  int iter = 0;
  for (; iter < cfg.max_iterations; ++iter) {
    Eigen::VectorXd mu(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      mu(i) = expit(eta(i));
      w(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-12);
    }
    Eigen::MatrixXd XtWX = X.transpose() * w.asDiagonal() * X;
    Eigen::VectorXd score = X.transpose() * (targets - mu);
    Eigen::VectorXd delta = XtWX.ldlt().solve(score);

    // step-halve so the log-likelihood never decreases
    double step = 1.0;
    Eigen::VectorXd cand;
    double cand_ll;
    for (int h = 0; h < 30; ++h) {
      cand = beta + step * delta;
      cand_ll = detail::bernoulli_loglik(targets, X * cand);
      if (cand_ll >= ll - 1e-12) break;
      step *= 0.5;
    }
    double max_change = (step * delta).cwiseAbs().maxCoeff();
    beta = cand;
    eta = X * beta;
    ll = cand_ll;
    if (beta.cwiseAbs().maxCoeff() > cfg.separation_norm)
      throw SeparationError(
          "perfect separation: coefficients diverged beyond norm threshold");
    if (max_change < cfg.tol) break;
    if (iter == cfg.max_iterations - 1)
      throw SeparationError(
          "IRLS did not converge; likely separated or quasi-separated data");
  }
  return std::make_unique<LogisticModel>(beta, cfg.add_intercept, ll, iter + 1);
}

}  // namespace resmet
