#include <gtest/gtest.h>

#include <cstdio>

#include "resmet/forest.hpp"
#include "resmet/gbt.hpp"
#include "resmet/logistic.hpp"
#include "resmet/model_io.hpp"

using namespace resmet;

namespace {

// y ~ Ber(expit(0.5 + x1 - 0.5*x2)), x standard normal
void make_logistic_data(int n, std::uint64_t seed, Eigen::MatrixXd& X,
                        Eigen::VectorXd& y) {
  Rng rng(seed);
  X.resize(n, 2);
  y.resize(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = rng.normal();
    X(i, 1) = rng.normal();
    double p = expit(0.5 + X(i, 0) - 0.5 * X(i, 1));
    y(i) = rng.uniform() < p ? 1.0 : 0.0;
  }
}

double max_abs_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Logistic, InterceptOnlyIsLogitOfMean) {
  Eigen::MatrixXd X(10, 0);
  Eigen::VectorXd y(10);
  y << 1, 1, 1, 0, 0, 0, 0, 0, 0, 0;
  auto m = fit_logistic(X, y);
  EXPECT_NEAR(m->coefficients()(0), logit(0.3), 1e-8);
  EXPECT_NEAR(m->coefficients()(0), -0.8473, 1e-4);
}

TEST(Logistic, ScoreEquationsHoldAtOptimum) {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  make_logistic_data(500, 11, X, y);
  auto m = fit_logistic(X, y);
  Eigen::VectorXd p = m->predict(X);
  // stationarity: X' (y - p) = 0 including the intercept column
  EXPECT_NEAR((y - p).sum(), 0.0, 1e-6);
  EXPECT_NEAR((X.transpose() * (y - p)).cwiseAbs().maxCoeff(), 0.0, 1e-6);
}

TEST(Logistic, RecoversCoefficients) {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  make_logistic_data(20000, 5, X, y);
  auto m = fit_logistic(X, y);
  EXPECT_NEAR(m->coefficients()(0), 0.5, 0.08);
  EXPECT_NEAR(m->coefficients()(1), 1.0, 0.08);
  EXPECT_NEAR(m->coefficients()(2), -0.5, 0.08);
}

TEST(Logistic, SeparationThrows) {
  Eigen::MatrixXd X(6, 1);
  Eigen::VectorXd y(6);
  X << -3, -2, -1, 1, 2, 3;
  y << 0, 0, 0, 1, 1, 1;
  EXPECT_THROW(fit_logistic(X, y), SeparationError);
}

TEST(Logistic, RankDeficiencyNamesColumn) {
  Eigen::MatrixXd X(8, 2);
  Eigen::VectorXd y(8);
  for (int i = 0; i < 8; ++i) {
    X(i, 0) = i;
    X(i, 1) = 2.0 * i;  // collinear
    y(i) = i % 2;
  }
  try {
    fit_logistic(X, y, {}, {"first", "dup"});
    FAIL() << "expected RankDeficiencyError";
  } catch (const RankDeficiencyError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("dependent columns"), std::string::npos);
    // one of the collinear pair must be named
    EXPECT_TRUE(msg.find("dup") != std::string::npos ||
                msg.find("first") != std::string::npos);
  }
}

TEST(Logistic, RejectsNonBinaryTargets) {
  Eigen::MatrixXd X(3, 1);
  X.setZero();
  Eigen::VectorXd y(3);
  y << 0, 0.5, 1;
  EXPECT_THROW(fit_logistic(X, y), DataError);
}

TEST(Gbt, ConstantTargetCollapses) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(30, 2);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(30);
  auto m = fit_gbt(X, y, GbtGrid{}, BoostLoss::logistic, 1);
  EXPECT_EQ(m->family(), Family::constant);
  EXPECT_EQ(m->predict(X)(0), 1.0);
}

TEST(Gbt, GridDefaultsMatchDocumentedValues) {
  GbtGrid g;
  EXPECT_EQ(g.learning_rates,
            (std::vector<double>{0.001, 0.005, 0.01, 0.1, 0.5, 1.0}));
  EXPECT_EQ(g.max_depths, (std::vector<int>{1, 3, 4, 5, 7, 9}));
  GbtGrid bad;
  bad.learning_rates = {-1.0};
  EXPECT_THROW(bad.validate(), DataError);
}

TEST(Gbt, LearnsAStepFunction) {
  Rng rng(2);
  const int n = 400;
  Eigen::MatrixXd X(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = rng.uniform() * 2.0 - 1.0;
    double p = X(i, 0) > 0.0 ? 0.85 : 0.15;
    y(i) = rng.uniform() < p ? 1.0 : 0.0;
  }
  GbtGrid g;
  g.learning_rates = {0.1, 0.5};
  g.max_depths = {1, 3};
  g.cv_folds = 3;
  g.max_rounds = 100;
  auto m = fit_gbt(X, y, g, BoostLoss::logistic, 3);
  Eigen::MatrixXd probe(2, 1);
  probe << -0.5, 0.5;
  Eigen::VectorXd p = m->predict(probe);
  EXPECT_LT(p(0), 0.3);
  EXPECT_GT(p(1), 0.7);
}

TEST(Gbt, SeedDeterminism) {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  make_logistic_data(200, 8, X, y);
  GbtGrid g;
  g.learning_rates = {0.1};
  g.max_depths = {2};
  g.cv_folds = 3;
  g.max_rounds = 40;
  auto a = fit_gbt(X, y, g, BoostLoss::logistic, 77);
  auto b = fit_gbt(X, y, g, BoostLoss::logistic, 77);
  EXPECT_EQ(a->to_json(), b->to_json());
}

TEST(Forest, DefaultMtryGrid) {
  ForestGrid g;
  EXPECT_EQ(g.mtry_for(9), (std::vector<int>{1, 3, 9}));
  EXPECT_EQ(g.mtry_for(1), (std::vector<int>{1}));
  ForestGrid bad;
  bad.mtry = {0};
  EXPECT_THROW(bad.mtry_for(3), DataError);
}

TEST(Forest, OobPredictionsAndDeterminism) {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  make_logistic_data(120, 4, X, y);
  ForestGrid g;
  g.n_trees = 50;
  g.max_depths = {3};
  g.mtry = {1};
  auto a = fit_forest(X, y, g, true, 10);
  auto b = fit_forest(X, y, g, true, 10);
  EXPECT_TRUE(a->supports_oob());
  Eigen::VectorXd oob = a->oob_predictions();
  ASSERT_EQ(oob.size(), 120);
  for (int i = 0; i < 120; ++i) {
    EXPECT_GE(oob(i), 0.0);
    EXPECT_LE(oob(i), 1.0);
  }
  EXPECT_EQ(max_abs_diff(oob, b->oob_predictions()), 0.0);
  EXPECT_GT(max_abs_diff(oob, a->predict(X)), 0.0);  // OOB is not the in-sample fit
  auto c = fit_forest(X, y, g, true, 11);
  EXPECT_GT(max_abs_diff(oob, c->oob_predictions()), 0.0);
}

TEST(Forest, TooFewTreesLeavesRowsUncovered) {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  make_logistic_data(60, 4, X, y);
  ForestGrid g;
  g.n_trees = 1;
  g.max_depths = {2};
  g.mtry = {1};
  EXPECT_THROW(fit_forest(X, y, g, true, 1), NumericError);
}

TEST(Forest, SmallSampleRejected) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 2);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(5);
  EXPECT_THROW(fit_forest(X, y, ForestGrid{}, true, 1), DataError);
}

TEST(ModelIo, RoundTripAllFamilies) {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  make_logistic_data(120, 14, X, y);

  EventTable t;
  t.discipline = Discipline::shot;
  t.schema = {{"z1", ColumnKind::numeric}, {"z2", ColumnKind::numeric}};
  for (int i = 0; i < 120; ++i) {
    t.outcome.push_back(y(i));
    t.actor_id.push_back("a");
    t.date.emplace_back();
    t.team_for.emplace_back();
    t.team_against.emplace_back();
    t.on_target.push_back(-1);
  }
  t.numeric_cols["z1"] = std::vector<double>(X.col(0).data(), X.col(0).data() + 120);
  t.numeric_cols["z2"] = std::vector<double>(X.col(1).data(), X.col(1).data() + 120);

  Encoder enc = Encoder::fit(t);
  Eigen::MatrixXd Z = enc.transform(t);

  ForestGrid fg;
  fg.n_trees = 30;
  fg.max_depths = {2};
  fg.mtry = {1};
  GbtGrid gg;
  gg.learning_rates = {0.1};
  gg.max_depths = {2};
  gg.cv_folds = 3;
  gg.max_rounds = 20;

  std::vector<FittedModel> models;
  models.push_back({fit_logistic(Z, y), enc});
  models.push_back({std::shared_ptr<const Regressor>(
                        fit_gbt(Z, y, gg, BoostLoss::logistic, 1)),
                    enc});
  models.push_back(
      {std::shared_ptr<const Regressor>(fit_forest(Z, y, fg, true, 1)), enc});

  std::string path = "test_model_rt.json";
  for (const auto& m : models) {
    save_model(path, m);
    FittedModel loaded = load_model(path);
    EXPECT_EQ(loaded.regressor->family(), m.regressor->family());
    EXPECT_EQ(max_abs_diff(loaded.predict(t), m.predict(t)), 0.0);
  }
  std::remove(path.c_str());
}

TEST(ModelIo, CorruptAndVersionMismatch) {
  std::string path = "test_model_bad.json";
  {
    std::ofstream out(path);
    out << "{not json";
  }
  EXPECT_THROW(load_model(path), DataError);
  {
    std::ofstream out(path);
    out << R"({"format_version": 99, "model": {}, "encoder": {}})";
  }
  EXPECT_THROW(load_model(path), DataError);
  EXPECT_THROW(load_model("does_not_exist.json"), DataError);
  std::remove(path.c_str());
}
