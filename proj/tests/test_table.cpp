#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <numbers>

#include "resmet/encoder.hpp"
#include "resmet/table.hpp"

using namespace resmet;

namespace {

void write_tmp(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

FeatureSpec small_spec() {
  FeatureSpec s;
  s.columns.push_back({"dist", ColumnKind::numeric});
  s.columns.push_back({"body", ColumnKind::categorical});
  return s;
}

}  // namespace

TEST(Geometry, GoalLineBetweenPosts) {
  EXPECT_NEAR(engineer_geometry(0.0, 0.0).angle, std::numbers::pi, 1e-12);
  EXPECT_NEAR(engineer_geometry(0.0, 2.0).angle, std::numbers::pi, 1e-12);
  EXPECT_EQ(engineer_geometry(0.0, 5.0).angle, 0.0);
}

TEST(Geometry, PenaltySpot) {
  // dead center, 11 m out: angle = 2*atan(3.66/11)
  GoalGeometry g = engineer_geometry(11.0, 0.0);
  EXPECT_NEAR(g.dist_to_goal, 11.0, 1e-12);
  EXPECT_NEAR(g.angle, 2.0 * std::atan(3.66 / 11.0), 1e-12);
}

TEST(Geometry, SymmetricInY) {
  GoalGeometry a = engineer_geometry(8.0, 5.0);
  GoalGeometry b = engineer_geometry(8.0, -5.0);
  EXPECT_NEAR(a.angle, b.angle, 1e-12);
  EXPECT_NEAR(a.dist_to_goal, b.dist_to_goal, 1e-12);
}

TEST(Geometry, AngleShrinksWithDistance) {
  EXPECT_GT(engineer_geometry(6.0, 0.0).angle, engineer_geometry(20.0, 0.0).angle);
}

TEST(EventTableParse, BasicShotTable) {
  std::string path = "test_table_shots.csv";
  write_tmp(path,
            "outcome,actor_id,date,team_for,team_against,on_target,dist,body\n"
            "1,alice,2020-01-01,A,B,1,10.5,foot\n"
            "0,bob,2020-01-02,B,A,0,22,head\n"
            "0,alice,2020-01-03,A,C,,18,foot\n");
  EventTable t = parse_event_table(path, small_spec(), Discipline::shot);
  EXPECT_EQ(t.n(), 3u);
  EXPECT_EQ(t.positives(), 1u);
  EXPECT_EQ(t.actor_id[1], "bob");
  EXPECT_EQ(t.on_target[2], -1);
  EXPECT_EQ(t.numeric("dist")[0], 10.5);
  EXPECT_EQ(t.categorical("body")[1], "head");
  std::remove(path.c_str());
}

TEST(EventTableParse, ErrorsNameTheColumn) {
  std::string path = "test_table_bad.csv";
  write_tmp(path, "outcome,actor_id,body\n1,a,foot\n");
  try {
    parse_event_table(path, small_spec(), Discipline::shot);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("dist"), std::string::npos);
  }
  std::remove(path.c_str());
}

TEST(EventTableParse, RejectsNonBinaryOutcome) {
  std::string path = "test_table_bad2.csv";
  write_tmp(path, "outcome,actor_id,dist,body\n2,a,1,foot\n");
  EXPECT_THROW(parse_event_table(path, small_spec(), Discipline::shot),
               DataError);
  std::remove(path.c_str());
}

TEST(EventTableParse, BasketballOutcomes) {
  std::string path = "test_table_bb.csv";
  write_tmp(path, "outcome,actor_id,dist,body\n2,a,1,x\n3,a,2,x\n0,b,3,y\n");
  EventTable t =
      parse_event_table(path, small_spec(), Discipline::basketball_shot);
  EXPECT_EQ(t.outcome[1], 3.0);
  write_tmp(path, "outcome,actor_id,dist,body\n1,a,1,x\n");
  EXPECT_THROW(
      parse_event_table(path, small_spec(), Discipline::basketball_shot),
      DataError);
  std::remove(path.c_str());
}

TEST(EventTableParse, InjuryTable) {
  std::string path = "test_table_inj.csv";
  write_tmp(path, "time,event,actor_id,age\n12.5,1,a,22\n30,0,b,28\n");
  FeatureSpec s;
  s.columns.push_back({"age", ColumnKind::numeric});
  EventTable t = parse_event_table(path, s, Discipline::injury_spell);
  EXPECT_EQ(t.outcome[0], 12.5);
  EXPECT_EQ(t.event_flag[1], 0.0);
  write_tmp(path, "time,event,actor_id,age\n-1,1,a,22\n");
  EXPECT_THROW(parse_event_table(path, s, Discipline::injury_spell), DataError);
  std::remove(path.c_str());
}

TEST(EventTableParse, WriteReadRoundTrip) {
  std::string path = "test_table_rt.csv";
  write_tmp(path,
            "outcome,actor_id,date,team_for,team_against,on_target,dist,body\n"
            "1,alice,2020-01-01,A,B,1,10.5,foot\n"
            "0,bob,,,,0,22,head\n");
  EventTable t = parse_event_table(path, small_spec(), Discipline::shot);
  write_event_table(path, t);
  EventTable u = parse_event_table(path, small_spec(), Discipline::shot);
  EXPECT_EQ(u.outcome, t.outcome);
  EXPECT_EQ(u.actor_id, t.actor_id);
  EXPECT_EQ(u.numeric("dist"), t.numeric("dist"));
  std::remove(path.c_str());
}

TEST(Cohort, ThresholdFiltering) {
  EventTable t;
  t.discipline = Discipline::shot;
  for (int i = 0; i < 25; ++i) {
    t.actor_id.push_back("many");
    t.outcome.push_back(i == 0 ? 1.0 : 0.0);
  }
  for (int i = 0; i < 25; ++i) {
    t.actor_id.push_back("scoreless");
    t.outcome.push_back(0.0);
  }
  for (int i = 0; i < 5; ++i) {
    t.actor_id.push_back("few");
    t.outcome.push_back(1.0);
  }
  t.date.assign(t.n(), "");
  t.team_for.assign(t.n(), "");
  t.team_against.assign(t.n(), "");
  t.on_target.assign(t.n(), -1);

  auto cohort = filter_cohort(t, 20, 1);
  EXPECT_EQ(cohort.size(), 1u);
  EXPECT_TRUE(cohort.count("many"));
  EXPECT_EQ(filter_cohort(t, 20, 0).size(), 2u);
  EXPECT_EQ(filter_cohort(t, 1, 0).size(), 3u);
  EXPECT_THROW(filter_cohort(t, 0, 0), DataError);
}

TEST(Cohort, ActorIndicator) {
  EventTable t;
  t.actor_id = {"a", "b", "a"};
  t.outcome = {0, 0, 1};
  auto x = actor_indicator(t, "a");
  EXPECT_EQ(x, (std::vector<double>{1, 0, 1}));
  EXPECT_THROW(actor_indicator(t, "zz"), DataError);
}

TEST(OnTarget, EndLocationFrame) {
  EXPECT_TRUE(on_target_from_end_location(0.0, 1.0));
  EXPECT_TRUE(on_target_from_end_location(3.6, 2.4));
  EXPECT_FALSE(on_target_from_end_location(3.7, 1.0));
  EXPECT_FALSE(on_target_from_end_location(0.0, 2.5));
  EXPECT_FALSE(on_target_from_end_location(0.0, -0.1));
}

TEST(MatchTableParse, Basic) {
  std::string path = "test_table_matches.csv";
  write_tmp(path,
            "date,home_team,away_team,home_goals,away_goals\n"
            "2020-01-01,A,B,2,1\n2020-01-08,B,A,0,0\n");
  MatchTable m = parse_match_table(path);
  EXPECT_EQ(m.n(), 2u);
  EXPECT_EQ(m.home_goals[0], 2);
  write_tmp(path, "date,home_team,away_team,home_goals,away_goals\n"
                  "2020-01-01,A,B,-1,0\n");
  EXPECT_THROW(parse_match_table(path), DataError);
  std::remove(path.c_str());
}

TEST(EncoderFit, MedianImputationAndOneHot) {
  EventTable t;
  t.discipline = Discipline::shot;
  t.schema = small_spec().columns;
  t.outcome = {0, 1, 0, 1};
  t.actor_id = {"a", "a", "b", "b"};
  t.date.assign(4, "");
  t.team_for.assign(4, "");
  t.team_against.assign(4, "");
  t.on_target.assign(4, -1);
  t.numeric_cols["dist"] = {1.0, 3.0, std::nan(""), 7.0};
  t.cat_cols["body"] = {"foot", "head", "foot", ""};

  Encoder e = Encoder::fit(t);
  Eigen::MatrixXd z = e.transform(t);
  int dist_col = -1;
  auto names = e.feature_names();
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j] == "dist") dist_col = static_cast<int>(j);
  ASSERT_GE(dist_col, 0);
  EXPECT_EQ(z(2, dist_col), 3.0);  // median of {1,3,7}

  // unseen level at transform time maps to the missing bucket, not a throw
  EventTable u = t;
  u.cat_cols["body"] = {"knee", "foot", "head", "head"};
  Eigen::MatrixXd zu = e.transform(u);
  EXPECT_EQ(zu.rows(), 4);
  EXPECT_EQ(zu.cols(), z.cols());
}

TEST(EncoderFit, JsonRoundTrip) {
  EventTable t;
  t.discipline = Discipline::shot;
  t.schema = small_spec().columns;
  t.outcome = {0, 1};
  t.actor_id = {"a", "b"};
  t.date.assign(2, "");
  t.team_for.assign(2, "");
  t.team_against.assign(2, "");
  t.on_target.assign(2, -1);
  t.numeric_cols["dist"] = {2.0, 4.0};
  t.cat_cols["body"] = {"foot", "head"};

  Encoder e = Encoder::fit(t);
  Encoder e2 = Encoder::from_json(e.to_json());
  EXPECT_EQ(e2.feature_names(), e.feature_names());
  EXPECT_EQ((e.transform(t) - e2.transform(t)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(FeatureSpecDefault, ShotColumns) {
  FeatureSpec s = FeatureSpec::default_shot_features();
  EXPECT_TRUE(s.has("DistToGoal"));
  EXPECT_TRUE(s.has("shot.body_part.name"));
  EXPECT_TRUE(s.has("density.incone"));
  EXPECT_FALSE(s.has("outcome"));
  EXPECT_EQ(s.columns.size(), 17u);
}
