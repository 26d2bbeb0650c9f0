#include <gtest/gtest.h>

#include "resmet/gcm.hpp"
#include "resmet/score_test.hpp"

using namespace resmet;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST(Gcm, ZeroMeanProducts) {
  // products (1, -1, 1, -1): mean 0, sd 1
  GcmResult r = gcm_from_residuals(vec({1, -1, 1, -1}), vec({1, 1, 1, 1}));
  EXPECT_EQ(r.n, 4);
  EXPECT_EQ(r.sum_scale_estimate, 0.0);
  EXPECT_EQ(r.mean_estimate, 0.0);
  EXPECT_EQ(r.sd_products, 1.0);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_NEAR(r.p_two_sided, 1.0, 1e-12);
}

TEST(Gcm, KnownStatistic) {
  // products (2, 0, 2, 0): mean 1, sd 1, T = sqrt(4)*1/1 = 2
  GcmResult r = gcm_from_residuals(vec({2, 0, 2, 0}), vec({1, 1, 1, 1}));
  EXPECT_EQ(r.sum_scale_estimate, 4.0);
  EXPECT_EQ(r.mean_estimate, 1.0);
  EXPECT_EQ(r.sd_products, 1.0);
  EXPECT_EQ(r.sd_sum, 2.0);
  EXPECT_EQ(r.statistic, 2.0);
  EXPECT_NEAR(r.p_two_sided, 2.0 * normal_cdf(-2.0), 1e-15);
  EXPECT_NEAR(r.p_two_sided, 0.0455, 5e-4);
  EXPECT_NEAR(r.p_greater + r.p_less, 1.0, 1e-15);
}

TEST(Gcm, ScaleEquivariance) {
  Rng rng(4);
  Eigen::VectorXd ry(50), rx(50);
  for (int i = 0; i < 50; ++i) {
    ry(i) = rng.normal();
    rx(i) = rng.normal();
  }
  GcmResult a = gcm_from_residuals(ry, rx);
  GcmResult b = gcm_from_residuals(3.0 * ry, rx);
  EXPECT_NEAR(b.sum_scale_estimate, 3.0 * a.sum_scale_estimate, 1e-10);
  EXPECT_NEAR(b.statistic, a.statistic, 1e-10);
  EXPECT_NEAR(b.p_two_sided, a.p_two_sided, 1e-12);
}

TEST(Gcm, SignFlip) {
  Eigen::VectorXd ry = vec({1, 0.5, -0.25, 2});
  Eigen::VectorXd rx = vec({0.5, -1, 0.75, 0.25});
  GcmResult plain = gcm_from_residuals(ry, rx, false);
  GcmResult flipped = gcm_from_residuals(ry, rx, true);
  EXPECT_EQ(flipped.sum_scale_estimate, -plain.sum_scale_estimate);
  EXPECT_EQ(flipped.statistic, -plain.statistic);
  EXPECT_EQ(flipped.p_greater, plain.p_less);
  EXPECT_EQ(flipped.p_less, plain.p_greater);
  EXPECT_EQ(flipped.p_two_sided, plain.p_two_sided);
  EXPECT_EQ(flipped.sd_products, plain.sd_products);
}

TEST(Gcm, DegenerateVarianceThrows) {
  EXPECT_THROW(gcm_from_residuals(vec({1, 1, 1}), vec({1, 1, 1})),
               DegenerateVarianceError);
  EXPECT_THROW(gcm_from_residuals(vec({1}), vec({1})), DataError);
  EXPECT_THROW(gcm_from_residuals(vec({1, 2}), vec({1, 2, 3})), DataError);
}

TEST(Interval, TwoSidedAnchor) {
  GcmResult r;
  r.n = 100;
  r.sum_scale_estimate = 9.969451;
  r.sd_sum = 2.773443;
  r.sd_products = r.sd_sum / 10.0;
  IntervalSpec spec;
  Interval ci = confidence_interval(r, spec);
  EXPECT_NEAR(ci.lower, 4.533501, 1e-4);
  EXPECT_NEAR(ci.upper, 15.405400, 1e-4);
}

TEST(Interval, OneSidedBounds) {
  GcmResult r;
  r.n = 25;
  r.sum_scale_estimate = 5.0;
  r.sd_sum = 2.0;
  r.sd_products = 0.4;
  IntervalSpec lower;
  lower.sidedness = Sidedness::lower_one_sided;
  Interval lo = confidence_interval(r, lower);
  EXPECT_NEAR(lo.lower, 5.0 - 1.6449 * 2.0, 1e-10);
  EXPECT_TRUE(std::isinf(lo.upper));
  IntervalSpec upper;
  upper.sidedness = Sidedness::upper_one_sided;
  Interval hi = confidence_interval(r, upper);
  EXPECT_TRUE(std::isinf(hi.lower));
  EXPECT_NEAR(hi.upper, 5.0 + 1.6449 * 2.0, 1e-10);
}

TEST(Interval, InvalidLevel) {
  GcmResult r;
  r.sum_scale_estimate = 1.0;
  r.sd_sum = 1.0;
  IntervalSpec spec;
  spec.level = 1.5;
  EXPECT_THROW(confidence_interval(r, spec), DataError);
}

TEST(NonNil, ShiftedStatistic) {
  GcmResult r;
  r.n = 16;
  r.sum_scale_estimate = 6.0;
  r.sd_sum = 2.0;
  r.sd_products = 0.5;
  // T' = (6 - 2) / 2 = 2 against rho0 = 2
  EXPECT_NEAR(non_nil_test(r, 2.0, Sidedness::lower_one_sided),
              normal_cdf(-2.0), 1e-15);
  EXPECT_NEAR(non_nil_test(r, 2.0, Sidedness::two_sided),
              2.0 * normal_cdf(-2.0), 1e-15);
  IntervalSpec spec;
  spec.rho0 = 2.0;
  spec.sidedness = Sidedness::lower_one_sided;
  EXPECT_EQ(p_value_for(r, spec), non_nil_test(r, 2.0, Sidedness::lower_one_sided));
  spec.rho0 = 0.0;
  r.statistic = 3.0;
  r.p_greater = normal_cdf(-3.0);
  EXPECT_EQ(p_value_for(r, spec), r.p_greater);
}

TEST(ScoreTest, MatchesResidualSum) {
  Rng rng(21);
  const int n = 300;
  Eigen::MatrixXd Z(n, 2);
  Eigen::VectorXd y(n), x(n);
  for (int i = 0; i < n; ++i) {
    Z(i, 0) = rng.normal();
    Z(i, 1) = rng.normal();
    x(i) = rng.uniform() < 0.4 ? 1.0 : 0.0;
    y(i) = rng.uniform() < expit(0.3 * Z(i, 0)) ? 1.0 : 0.0;
  }
  ScoreTestResult s = logistic_score(y, x, Z);
  auto fit = fit_logistic(Z, y);
  Eigen::VectorXd h = fit->predict(Z);
  double direct = ((y - h).array() * x.array()).sum();
  EXPECT_NEAR(s.score, direct, 1e-10);
  EXPECT_EQ(s.n, n);
  EXPECT_EQ(s.gamma_hat.size(), 3);
}
