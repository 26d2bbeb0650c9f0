#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "resmet/regressor.hpp"
#include "resmet/tree.hpp"

namespace resmet {

struct ForestGrid {
  std::vector<int> mtry;        // empty: {1, round(sqrt(p)), p}
  std::vector<int> max_depths = {1, 2, 3, 4, 5};
  int n_trees = 500;
  int min_leaf = 1;

  std::vector<int> mtry_for(Eigen::Index p) const {
    if (!mtry.empty()) {
      for (int m : mtry)
        if (m < 1 || m > p)
          throw DataError("mtry values must lie in [1, feature dimension]");
      return mtry;
    }
    std::vector<int> out = {1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(p)))),
                            static_cast<int>(p)};
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  void validate() const {
    if (max_depths.empty()) throw DataError("empty tuning grid");
    for (int d : max_depths)
      if (d <= 0) throw DataError("tree depths must be positive");
    if (n_trees < 1) throw DataError("n_trees must be positive");
  }
};

// Bagged depth-limited trees with per-split random feature subsets.
// Keeps OOB predictions for its training rows; grid cells are ranked by OOB
// squared-error loss.
class ForestModel final : public Regressor {
 public:
  ForestModel(std::vector<RegressionTree> trees, Eigen::VectorXd oob,
              double oob_loss, int mtry, int max_depth, bool probability,
              Eigen::Index dim)
      : trees_(std::move(trees)),
        oob_(std::move(oob)),
        oob_loss_(oob_loss),
        mtry_(mtry),
        max_depth_(max_depth),
        probability_(probability),
        dim_(dim) {}

  Family family() const override { return Family::forest; }
  Eigen::Index input_dim() const override { return dim_; }
  bool supports_oob() const override { return true; }
  Eigen::VectorXd oob_predictions() const override { return oob_; }
  double oob_loss() const { return oob_loss_; }
  int mtry() const { return mtry_; }
  int max_depth() const { return max_depth_; }
  int n_trees() const { return static_cast<int>(trees_.size()); }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    check_dim(X);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
    for (const auto& t : trees_)
      for (Eigen::Index i = 0; i < X.rows(); ++i)
        out(i) += t.predict_row(X, i);
    out /= static_cast<double>(trees_.size());
    if (probability_)
      for (Eigen::Index i = 0; i < out.size(); ++i)
        out(i) = std::clamp(out(i), 0.0, 1.0);
    return out;
  }

  nlohmann::json to_json() const override {
    nlohmann::json jt = nlohmann::json::array();
    for (const auto& t : trees_) jt.push_back(t.to_json());
    std::vector<double> oob(oob_.data(), oob_.data() + oob_.size());
    return {{"family", "forest"},    {"trees", jt},
            {"oob", oob},            {"oob_loss", oob_loss_},
            {"mtry", mtry_},         {"max_depth", max_depth_},
            {"probability", probability_}, {"dim", dim_}};
  }

  static std::unique_ptr<ForestModel> from_json(const nlohmann::json& j) {
    std::vector<RegressionTree> trees;
    for (const auto& t : j.at("trees")) trees.push_back(RegressionTree::from_json(t));
    auto oobv = j.at("oob").get<std::vector<double>>();
    Eigen::VectorXd oob = Eigen::Map<Eigen::VectorXd>(
        oobv.data(), static_cast<Eigen::Index>(oobv.size()));
    return std::make_unique<ForestModel>(
        std::move(trees), std::move(oob), j.at("oob_loss").get<double>(),
        j.at("mtry").get<int>(), j.at("max_depth").get<int>(),
        j.at("probability").get<bool>(), j.at("dim").get<Eigen::Index>());
  }

 private:
  std::vector<RegressionTree> trees_;
  Eigen::VectorXd oob_;
  double oob_loss_;
  int mtry_;
  int max_depth_;
  bool probability_;
  Eigen::Index dim_;
};

namespace detail {

struct ForestFit {
  std::vector<RegressionTree> trees;
  Eigen::VectorXd oob;
  double oob_loss = 0.0;
};

inline ForestFit fit_forest_cell(const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& y, int mtry, int depth,
                                 int n_trees, int min_leaf,
                                 std::uint64_t seed) {
  const Eigen::Index n = X.rows();
  ForestFit fit;
  std::vector<double> oob_sum(n, 0.0);
  std::vector<int> oob_count(n, 0);
  std::vector<double> targets(y.data(), y.data() + n);

  RegressionTree::FitParams params;
  params.max_depth = depth;
  params.min_leaf = min_leaf;
  params.mtry = mtry;

  std::vector<char> in_bag(n);
  for (int t = 0; t < n_trees; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::fill(in_bag.begin(), in_bag.end(), 0);
    std::vector<int> rows(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      int r = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      rows[i] = r;
      in_bag[r] = 1;
    }
    RegressionTree tree =
        RegressionTree::fit(X, targets, {}, rows, params, rng);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!in_bag[i]) {
        oob_sum[i] += tree.predict_row(X, i);
        ++oob_count[i];
      }
    }
    fit.trees.push_back(std::move(tree));
  }

  fit.oob.resize(n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (oob_count[i] == 0)
      throw NumericError(
          "row never out-of-bag; increase the tree count (n_trees)");
    fit.oob(i) = oob_sum[i] / oob_count[i];
    double d = y(i) - fit.oob(i);
    loss += d * d;
  }
  fit.oob_loss = loss / static_cast<double>(n);
  return fit;
}

}  // namespace detail

inline std::unique_ptr<Regressor> fit_forest(const Eigen::MatrixXd& features,
                                             const Eigen::VectorXd& targets,
                                             const ForestGrid& grid,
                                             bool probability,
                                             std::uint64_t seed = 1) {
  grid.validate();
  const Eigen::Index n = features.rows();
  if (targets.size() != n) throw DataError("features/targets length mismatch");
  if (n < 10) throw DataError("forest fit needs at least 10 rows");

  auto mtry_grid = grid.mtry_for(features.cols());
  std::unique_ptr<ForestModel> best;
  for (int mtry : mtry_grid) {
    for (int depth : grid.max_depths) {
      std::uint64_t cell_seed = derive_seed(
          seed, "forest-" + std::to_string(mtry) + "-" + std::to_string(depth));
      auto fit = detail::fit_forest_cell(features, targets, mtry, depth,
                                         grid.n_trees, grid.min_leaf, cell_seed);
      if (!best || fit.oob_loss < best->oob_loss() - 1e-15) {
        best = std::make_unique<ForestModel>(
            std::move(fit.trees), std::move(fit.oob), fit.oob_loss, mtry, depth,
            probability, features.cols());
      }
    }
  }
  return best;
}

}  // namespace resmet
