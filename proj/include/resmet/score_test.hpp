#pragma once

#include <Eigen/Dense>

#include "resmet/logistic.hpp"

namespace resmet {

// Raw score of the actor coefficient in a logistic regression, evaluated at
// the null fit (actor column excluded). Equals the classical above-expectation
// metric when the same logistic fit serves as the outcome model.
struct ScoreTestResult {
  double score = 0.0;
  Eigen::VectorXd gamma_hat;  // null-fit coefficients, intercept first
  double log_likelihood = 0.0;
  Eigen::Index n = 0;
};

inline ScoreTestResult logistic_score(const Eigen::VectorXd& outcomes,
                                      const Eigen::VectorXd& actor_indicator,
                                      const Eigen::MatrixXd& features,
                                      const LogisticConfig& cfg = {}) {
  if (actor_indicator.size() != outcomes.size())
    throw DataError("outcome/indicator length mismatch");
  auto fit = fit_logistic(features, outcomes, cfg);
  Eigen::VectorXd h_hat = fit->predict(features);
  ScoreTestResult r;
  r.n = outcomes.size();
  r.gamma_hat = fit->coefficients();
  r.log_likelihood = fit->log_likelihood();
  for (Eigen::Index i = 0; i < r.n; ++i)
    r.score += (outcomes(i) - h_hat(i)) * actor_indicator(i);
  return r;
}

}  // namespace resmet
