#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "resmet/regressor.hpp"
#include "resmet/tree.hpp"
#include "resmet/csv.hpp"

namespace resmet {

enum class BoostLoss { logistic, squared };

inline std::string to_string(BoostLoss l) {
  return l == BoostLoss::logistic ? "logistic" : "squared";
}

struct GbtGrid {
  std::vector<double> learning_rates = {0.001, 0.005, 0.01, 0.1, 0.5, 1.0};
  std::vector<int> max_depths = {1, 3, 4, 5, 7, 9};
  int cv_folds = 5;
  int max_rounds = 300;
  int patience = 10;
  int min_leaf = 5;

  void validate() const {
    if (learning_rates.empty() || max_depths.empty())
      throw DataError("empty tuning grid");
    for (double r : learning_rates)
      if (r <= 0.0) throw DataError("learning rates must be positive");
    for (int d : max_depths)
      if (d <= 0) throw DataError("tree depths must be positive");
    if (cv_folds < 2) throw DataError("cv_folds must be >= 2");
  }
};

class GbtModel final : public Regressor {
 public:
  GbtModel(double base_score, std::vector<RegressionTree> trees,
           double learning_rate, int max_depth, BoostLoss loss,
           Eigen::Index dim, double cv_loss)
      : base_score_(base_score),
        trees_(std::move(trees)),
        learning_rate_(learning_rate),
        max_depth_(max_depth),
        loss_(loss),
        dim_(dim),
        cv_loss_(cv_loss) {}

  Family family() const override { return Family::gbt; }
  Eigen::Index input_dim() const override { return dim_; }
  int rounds() const { return static_cast<int>(trees_.size()); }
  double learning_rate() const { return learning_rate_; }
  int max_depth() const { return max_depth_; }
  double cv_loss() const { return cv_loss_; }
  BoostLoss loss() const { return loss_; }

  Eigen::VectorXd raw_score(const Eigen::MatrixXd& X) const {
    check_dim(X);
    Eigen::VectorXd f = Eigen::VectorXd::Constant(X.rows(), base_score_);
    for (const auto& t : trees_)
      for (Eigen::Index i = 0; i < X.rows(); ++i)
        f(i) += learning_rate_ * t.predict_row(X, i);
    return f;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    Eigen::VectorXd f = raw_score(X);
    if (loss_ == BoostLoss::logistic)
      for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = expit(f(i));
    return f;
  }

  nlohmann::json to_json() const override {
    nlohmann::json jt = nlohmann::json::array();
    for (const auto& t : trees_) jt.push_back(t.to_json());
    return {{"family", "gbt"},
            {"base_score", base_score_},
            {"learning_rate", learning_rate_},
            {"max_depth", max_depth_},
            {"loss", to_string(loss_)},
            {"dim", dim_},
            {"cv_loss", cv_loss_},
            {"trees", jt}};
  }

  static std::unique_ptr<GbtModel> from_json(const nlohmann::json& j) {
    std::vector<RegressionTree> trees;
    for (const auto& t : j.at("trees")) trees.push_back(RegressionTree::from_json(t));
    return std::make_unique<GbtModel>(
        j.at("base_score").get<double>(), std::move(trees),
        j.at("learning_rate").get<double>(), j.at("max_depth").get<int>(),
        j.at("loss").get<std::string>() == "logistic" ? BoostLoss::logistic
                                                      : BoostLoss::squared,
        j.at("dim").get<Eigen::Index>(), j.at("cv_loss").get<double>());
  }

 private:
  double base_score_;
  std::vector<RegressionTree> trees_;
  double learning_rate_;
  int max_depth_;
  BoostLoss loss_;
  Eigen::Index dim_;
  double cv_loss_;
};

namespace detail {

inline double holdout_loss(BoostLoss loss, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& f) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (loss == BoostLoss::logistic) {
      double p = clip_probability(expit(f(i)));
      total += -(y(i) * std::log(p) + (1.0 - y(i)) * std::log(1.0 - p));
    } else {
      double d = y(i) - f(i);
      total += d * d;
    }
  }
  return total / static_cast<double>(y.size());
}

struct BoostRun {
  std::vector<RegressionTree> trees;
  std::vector<double> val_loss;  // per round, empty when no holdout
  int best_round = 0;            // rounds kept after early stopping
};

// Boosts on rows `train`; when `val` is non-empty, tracks holdout loss and
// stops after `patience` rounds without improvement.
inline BoostRun boost(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const std::vector<int>& train, const std::vector<int>& val,
                      double base, double eta, int depth, BoostLoss loss,
                      int max_rounds, int patience, int min_leaf, Rng& rng) {
  const Eigen::Index n = X.rows();
  BoostRun run;
  std::vector<double> f(n, base);
  std::vector<double> g(n, 0.0), h;
  if (loss == BoostLoss::logistic) h.assign(n, 0.0);

  RegressionTree::FitParams params;
  params.max_depth = depth;
  params.min_leaf = min_leaf;

  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int round = 0; round < max_rounds; ++round) {
    for (int r : train) {
      if (loss == BoostLoss::logistic) {
        double p = expit(f[r]);
        g[r] = y(r) - p;
        h[r] = p * (1.0 - p);
      } else {
        g[r] = y(r) - f[r];
      }
    }
    std::vector<int> rows = train;
    RegressionTree tree = RegressionTree::fit(X, g, h, rows, params, rng);
    for (int r : train) f[r] += eta * tree.predict_row(X, r);
    for (int r : val) f[r] += eta * tree.predict_row(X, r);
    run.trees.push_back(std::move(tree));

    if (!val.empty()) {
      Eigen::VectorXd yv(val.size()), fv(val.size());
      for (std::size_t k = 0; k < val.size(); ++k) {
        yv(static_cast<Eigen::Index>(k)) = y(val[k]);
        fv(static_cast<Eigen::Index>(k)) = f[val[k]];
      }
      double vl = holdout_loss(loss, yv, fv);
      run.val_loss.push_back(vl);
      if (vl < best - 1e-12) {
        best = vl;
        run.best_round = round + 1;
        since_best = 0;
      } else if (++since_best >= patience) {
        break;
      }
    } else {
      run.best_round = round + 1;
    }
  }
  return run;
}

}  // namespace detail

// Grid-tuned gradient boosting: per cell, k-fold cross validation with early
// stopping; the winning cell is refit on all rows with the averaged optimal
// round count.
inline std::unique_ptr<Regressor> fit_gbt(const Eigen::MatrixXd& features,
                                          const Eigen::VectorXd& targets,
                                          const GbtGrid& grid, BoostLoss loss,
                                          std::uint64_t seed = 1) {
  grid.validate();
  const Eigen::Index n = features.rows();
  if (targets.size() != n) throw DataError("features/targets length mismatch");
  if (n < 2 * grid.cv_folds)
    throw DataError("need at least 2*cv_folds rows for cross validation");

  // all-constant target: zero-tree model predicting the constant
  bool constant = true;
  for (Eigen::Index i = 1; i < n && constant; ++i)
    constant = targets(i) == targets(0);
  if (constant)
    return std::make_unique<ConstantModel>(targets(0), features.cols());

  double base;
  if (loss == BoostLoss::logistic) {
    double mean = targets.mean();
    base = logit(std::clamp(mean, 1e-6, 1.0 - 1e-6));
  } else {
    base = targets.mean();
  }

  // deterministic fold assignment
  Rng fold_rng(derive_seed(seed, "gbt-folds"));
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (Eigen::Index i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[fold_rng.below(static_cast<std::uint64_t>(i + 1))]);
  std::vector<int> fold_of(n);
  for (Eigen::Index i = 0; i < n; ++i)
    fold_of[perm[i]] = static_cast<int>(i % grid.cv_folds);

  double best_loss = std::numeric_limits<double>::infinity();
  double best_eta = grid.learning_rates.front();
  int best_depth = grid.max_depths.front();
  int best_rounds = 1;
  for (double eta : grid.learning_rates) {
    for (int depth : grid.max_depths) {
      double cell_loss = 0.0;
      double cell_rounds = 0.0;
      for (int fold = 0; fold < grid.cv_folds; ++fold) {
        std::vector<int> train, val;
        for (Eigen::Index i = 0; i < n; ++i)
          (fold_of[i] == fold ? val : train).push_back(static_cast<int>(i));
        Rng rng(derive_seed(seed, "gbt-cell-" + std::to_string(fold) + "-" +
                                      csv::format_double(eta) + "-" +
                                      std::to_string(depth)));
        auto run = detail::boost(features, targets, train, val, base, eta,
                                 depth, loss, grid.max_rounds, grid.patience,
                                 grid.min_leaf, rng);
        double fold_best = *std::min_element(run.val_loss.begin(), run.val_loss.end());
        cell_loss += fold_best;
        cell_rounds += run.best_round;
      }
      cell_loss /= grid.cv_folds;
      cell_rounds /= grid.cv_folds;
      if (cell_loss < best_loss - 1e-12) {
        best_loss = cell_loss;
        best_eta = eta;
        best_depth = depth;
        best_rounds = std::max(1, static_cast<int>(std::lround(cell_rounds)));
      }
    }
  }

  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  Rng rng(derive_seed(seed, "gbt-final"));
  auto run = detail::boost(features, targets, all, {}, base, best_eta,
                           best_depth, loss, best_rounds, grid.patience,
                           grid.min_leaf, rng);
  return std::make_unique<GbtModel>(base, std::move(run.trees), best_eta,
                                    best_depth, loss, features.cols(),
                                    best_loss);
}

}  // namespace resmet
