#include <gtest/gtest.h>

#include "resmet/simlab.hpp"
#include "resmet/team_strength.hpp"

using namespace resmet;

namespace {

double pois_log_pmf(int k, double lambda) {
  return k * std::log(lambda) - lambda - std::lgamma(k + 1.0);
}

}  // namespace

TEST(BivPois, ZeroCovarianceFactorizes) {
  for (int z = 0; z <= 9; ++z) {
    for (int y = 0; y <= 9; ++y) {
      double lp = bivpois_log_pmf(z, y, 1.3, 0.7, 0.0);
      EXPECT_NEAR(lp, pois_log_pmf(z, 1.3) + pois_log_pmf(y, 0.7), 1e-12);
    }
  }
}

TEST(BivPois, PmfSumsToOne) {
  double total = 0.0;
  for (int z = 0; z < 40; ++z)
    for (int y = 0; y < 40; ++y)
      total += std::exp(bivpois_log_pmf(z, y, 1.2, 0.9, 0.4));
  EXPECT_NEAR(total, 1.0, 1e-10);
}

TEST(BivPois, GradientMatchesFiniteDifferences) {
  // the fit's analytic gradient is built from these two derivatives
  const double h = 1e-6;
  for (auto [z, y] : {std::pair{2, 1}, {0, 0}, {4, 3}}) {
    double l1 = 1.4, l2 = 0.8, lc = 0.3;
    double base = bivpois_log_pmf(z, y, l1, l2, lc);
    double ek = bivpois_posterior_k(z, y, l1, l2, lc);

    // d/d log(l1) = z - E[k] - l1
    double fd1 = (bivpois_log_pmf(z, y, l1 * std::exp(h), l2, lc) - base) / h;
    EXPECT_NEAR(fd1, z - ek - l1, 1e-5);
    // d/d log(l2) = y - E[k] - l2
    double fd2 = (bivpois_log_pmf(z, y, l1, l2 * std::exp(h), lc) - base) / h;
    EXPECT_NEAR(fd2, y - ek - l2, 1e-5);
    // d/d log(lc) = E[k] - lc
    double fdc = (bivpois_log_pmf(z, y, l1, l2, lc * std::exp(h)) - base) / h;
    EXPECT_NEAR(fdc, ek - lc, 1e-5);
  }
}

TEST(Recency, HalfLifeWeights) {
  long ref = parse_date_days("2020-06-01");
  EXPECT_EQ(recency_weight(ref, ref, 500.0), 1.0);
  EXPECT_EQ(recency_weight(ref - 500, ref, 500.0), 0.5);
  EXPECT_NEAR(recency_weight(ref - 1000, ref, 500.0), 0.25, 1e-15);
  EXPECT_THROW(recency_weight(ref + 1, ref, 500.0), DataError);
}

TEST(Fit, SymmetricRoundRobinGivesZeroRatings) {
  // every pairing with identical mirrored scores: no team distinguishable
  MatchTable m;
  const char* teams[] = {"A", "B", "C"};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      m.date.push_back("2020-01-01");
      m.home_team.push_back(teams[i]);
      m.away_team.push_back(teams[j]);
      m.home_goals.push_back(1);
      m.away_goals.push_back(1);
    }
  }
  TeamStrengths s = fit_team_strengths(m);
  for (const auto& [team, a] : s.att) EXPECT_NEAR(a, 0.0, 1e-4);
  for (const auto& [team, d] : s.def) EXPECT_NEAR(d, 0.0, 1e-4);
  double att_sum = 0.0, def_sum = 0.0;
  for (const auto& [team, a] : s.att) att_sum += a;
  for (const auto& [team, d] : s.def) def_sum += d;
  EXPECT_NEAR(att_sum, 0.0, 1e-9);
  EXPECT_NEAR(def_sum, 0.0, 1e-9);
}

TEST(Fit, DisconnectedScheduleThrows) {
  MatchTable m;
  m.date = {"2020-01-01", "2020-01-01"};
  m.home_team = {"A", "C"};
  m.away_team = {"B", "D"};
  m.home_goals = {1, 2};
  m.away_goals = {0, 1};
  EXPECT_THROW(fit_team_strengths(m), DataError);
}

TEST(Fit, ReferenceDateBeforeMatchesThrows) {
  MatchTable m;
  m.date = {"2020-05-01"};
  m.home_team = {"A"};
  m.away_team = {"B"};
  m.home_goals = {1};
  m.away_goals = {0};
  EXPECT_THROW(fit_team_strengths(m, "2020-01-01"), DataError);
}

TEST(Fit, RecoveryOnSimulatedLeague) {
  TeamStrengths truth;
  truth.intercept = 0.2;
  truth.home_advantage = 0.25;
  truth.covariance_rate = 0.1;
  for (int i = 0; i < 4; ++i) {
    std::string name = "T" + std::to_string(i + 1);
    truth.att[name] = 0.3 * (i - 1.5);
    truth.def[name] = 0.2 * (1.5 - i);
  }
  MatchTable m = simulate_league(truth, 800, 5);
  TeamStrengths fit = fit_team_strengths(m);
  EXPECT_NEAR(fit.home_advantage, truth.home_advantage, 0.15);
  for (const auto& [team, a] : truth.att)
    EXPECT_NEAR(fit.att.at(team), a, 0.15);
  for (const auto& [team, d] : truth.def)
    EXPECT_NEAR(fit.def.at(team), d, 0.2);
}

TEST(AttachFeatures, DefendingSideJoins) {
  TeamStrengths s;
  s.att = {{"A", 0.1}, {"B", -0.1}};
  s.def = {{"A", 0.2}, {"B", -0.2}};

  EventTable t;
  t.discipline = Discipline::shot;
  t.outcome = {1, 0};
  t.actor_id = {"p1", "p2"};
  t.date.assign(2, "");
  t.team_for = {"A", "B"};
  t.team_against = {"B", "A"};
  t.on_target.assign(2, -1);

  EventTable out = attach_strength_features(t, s, StrengthSide::defending);
  EXPECT_EQ(out.numeric("def_opponent")[0], -0.2);
  EXPECT_EQ(out.numeric("def_opponent")[1], 0.2);

  // attacking-side join on a gax pipeline is refused without the override
  EXPECT_THROW(attach_strength_features(t, s, StrengthSide::attacking),
               DataError);
  EventTable forced =
      attach_strength_features(t, s, StrengthSide::attacking, true);
  EXPECT_EQ(forced.numeric("att_team")[0], 0.1);

  t.team_against = {"B", "Z"};
  EXPECT_THROW(attach_strength_features(t, s, StrengthSide::defending),
               DataError);
}
