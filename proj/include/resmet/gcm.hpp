#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "resmet/core.hpp"

namespace resmet {

struct DegenerateVarianceError : NumericError {
  using NumericError::NumericError;
};

// Residual-product test summary for one actor.
struct GcmResult {
  Eigen::Index n = 0;
  double sum_scale_estimate = 0.0;  // sum of residual products, the metric
  double mean_estimate = 0.0;
  double sd_products = 0.0;  // empirical sd of the products
  double sd_sum = 0.0;       // sqrt(n) * sd_products
  double statistic = 0.0;    // sqrt(n) * mean / sd
  double p_two_sided = 1.0;
  double p_greater = 0.5;
  double p_less = 0.5;
  bool sign_flip = false;
};

inline GcmResult gcm_from_residuals(const Eigen::VectorXd& residuals_y,
                                    const Eigen::VectorXd& residuals_x,
                                    bool sign_flip = false) {
  const Eigen::Index n = residuals_y.size();
  if (residuals_x.size() != n) throw DataError("residual length mismatch");
  if (n < 2) throw DataError("need at least 2 observations");

  GcmResult r;
  r.n = n;
  r.sign_flip = sign_flip;
  double sum = 0.0, sum_sq = 0.0;
  const double flip = sign_flip ? -1.0 : 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double prod = flip * residuals_y(i) * residuals_x(i);
    sum += prod;
    sum_sq += prod * prod;
  }
  r.sum_scale_estimate = sum;
  r.mean_estimate = sum / static_cast<double>(n);
  double var = sum_sq / static_cast<double>(n) - r.mean_estimate * r.mean_estimate;
  r.sd_products = std::sqrt(std::max(var, 0.0));
  if (r.sd_products <= 0.0)
    throw DegenerateVarianceError("all residual products identical");
  r.sd_sum = std::sqrt(static_cast<double>(n)) * r.sd_products;
  r.statistic = std::sqrt(static_cast<double>(n)) * r.mean_estimate / r.sd_products;
  r.p_greater = normal_cdf(-r.statistic);
  r.p_less = normal_cdf(r.statistic);
  r.p_two_sided = std::min(1.0, 2.0 * std::min(r.p_greater, r.p_less));
  return r;
}

enum class Sidedness { two_sided, lower_one_sided, upper_one_sided };

inline std::string to_string(Sidedness s) {
  switch (s) {
    case Sidedness::two_sided: return "two-sided";
    case Sidedness::lower_one_sided: return "lower-one-sided";
    case Sidedness::upper_one_sided: return "upper-one-sided";
  }
  throw NumericError("unknown sidedness");
}

inline Sidedness sidedness_from_string(const std::string& s) {
  if (s == "two-sided" || s == "two") return Sidedness::two_sided;
  if (s == "lower-one-sided" || s == "lower" || s == "greater")
    return Sidedness::lower_one_sided;
  if (s == "upper-one-sided" || s == "upper" || s == "less")
    return Sidedness::upper_one_sided;
  throw DataError("unknown sidedness: " + s);
}

struct IntervalSpec {
  double level = 0.95;
  Sidedness sidedness = Sidedness::two_sided;
  double rho0 = 0.0;  // non-nil shift on the sum scale

  void validate() const {
    if (!(level > 0.0 && level < 1.0))
      throw DataError("interval level must lie in (0,1)");
  }
};

struct Interval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

namespace detail {

// Critical values at the conventional 4-decimal precision (1.96, 1.6449, ...)
// so printed intervals match the usual tabulated constants.
inline double critical_value(double prob) {
  return std::round(normal_quantile(prob) * 1e4) / 1e4;
}

}  // namespace detail

// Interval on the sum scale for the residualized metric.
inline Interval confidence_interval(const GcmResult& result,
                                    const IntervalSpec& spec) {
  spec.validate();
  if (result.sd_sum <= 0.0)
    throw DegenerateVarianceError("degenerate result: zero standard deviation");
  Interval ci;
  switch (spec.sidedness) {
    case Sidedness::two_sided: {
      double z = detail::critical_value(0.5 + spec.level / 2.0);
      ci.lower = result.sum_scale_estimate - z * result.sd_sum;
      ci.upper = result.sum_scale_estimate + z * result.sd_sum;
      break;
    }
    case Sidedness::lower_one_sided: {
      double z = detail::critical_value(spec.level);
      ci.lower = result.sum_scale_estimate - z * result.sd_sum;
      break;
    }
    case Sidedness::upper_one_sided: {
      double z = detail::critical_value(spec.level);
      ci.upper = result.sum_scale_estimate + z * result.sd_sum;
      break;
    }
  }
  return ci;
}

// p-value for H0 at a non-nil threshold rho0 on the sum scale.
inline double non_nil_test(const GcmResult& result, double rho0,
                           Sidedness direction) {
  if (result.sd_sum <= 0.0)
    throw DegenerateVarianceError("degenerate result: zero standard deviation");
  double t = (result.sum_scale_estimate - rho0) / result.sd_sum;
  switch (direction) {
    case Sidedness::lower_one_sided: return normal_cdf(-t);  // H1: estimate > rho0
    case Sidedness::upper_one_sided: return normal_cdf(t);
    case Sidedness::two_sided:
      return std::min(1.0, 2.0 * std::min(normal_cdf(-t), normal_cdf(t)));
  }
  throw NumericError("unknown direction");
}

// The p-value matching an interval spec (sidedness + rho0).
inline double p_value_for(const GcmResult& result, const IntervalSpec& spec) {
  if (spec.rho0 == 0.0) {
    switch (spec.sidedness) {
      case Sidedness::two_sided: return result.p_two_sided;
      case Sidedness::lower_one_sided: return result.p_greater;
      case Sidedness::upper_one_sided: return result.p_less;
    }
  }
  return non_nil_test(result, spec.rho0, spec.sidedness);
}

}  // namespace resmet
