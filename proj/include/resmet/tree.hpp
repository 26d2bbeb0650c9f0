#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <nlohmann/json.hpp>
#include <numeric>
#include <vector>

#include "resmet/core.hpp"

namespace resmet {

// Depth-limited axis-aligned regression tree. Splits minimize the squared
// error of the working targets; leaf values come from a caller-supplied rule
// (plain mean, or Newton step for logistic boosting).
class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };

  struct FitParams {
    int max_depth = 3;
    int min_leaf = 1;
    int mtry = 0;  // candidate features per split; 0 means all
  };

  // hessians may be empty; then leaves are target means.
  static RegressionTree fit(const Eigen::MatrixXd& X,
                            const std::vector<double>& targets,
                            const std::vector<double>& hessians,
                            const std::vector<int>& row_index,
                            const FitParams& params, Rng& rng,
                            double leaf_denominator_floor = 1e-6) {
    RegressionTree t;
    std::vector<int> rows = row_index;
    t.build(X, targets, hessians, rows, 0, static_cast<int>(rows.size()), 0,
            params, rng, leaf_denominator_floor);
    return t;
  }

  double predict_row(const Eigen::MatrixXd& X, Eigen::Index i) const {
    int node = 0;
    while (nodes_[node].feature >= 0) {
      node = X(i, nodes_[node].feature) <= nodes_[node].threshold
                 ? nodes_[node].left
                 : nodes_[node].right;
    }
    return nodes_[node].value;
  }

  const std::vector<Node>& nodes() const { return nodes_; }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& nd : nodes_)
      arr.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.value});
    return arr;
  }

  static RegressionTree from_json(const nlohmann::json& j) {
    RegressionTree t;
    for (const auto& e : j) {
      Node nd;
      nd.feature = e[0].get<int>();
      nd.threshold = e[1].get<double>();
      nd.left = e[2].get<int>();
      nd.right = e[3].get<int>();
      nd.value = e[4].get<double>();
      t.nodes_.push_back(nd);
    }
    return t;
  }

 private:
  std::vector<Node> nodes_;

  // Builds the subtree over rows[begin, end); rows is reordered in place.
  int build(const Eigen::MatrixXd& X, const std::vector<double>& g,
            const std::vector<double>& h, std::vector<int>& rows, int begin,
            int end, int depth, const FitParams& params, Rng& rng,
            double denom_floor) {
    const int m = end - begin;
    double sum_g = 0.0, sum_h = 0.0;
    for (int k = begin; k < end; ++k) {
      sum_g += g[rows[k]];
      sum_h += h.empty() ? 1.0 : h[rows[k]];
    }
    int self = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    nodes_[self].value = sum_g / std::max(sum_h, denom_floor);

    if (depth >= params.max_depth || m < 2 * params.min_leaf) return self;

    const Eigen::Index p = X.cols();
    std::vector<int> candidates(p);
    std::iota(candidates.begin(), candidates.end(), 0);
    int n_cand = static_cast<int>(p);
    if (params.mtry > 0 && params.mtry < n_cand) {
      // partial Fisher-Yates draw of mtry features
      for (int i = 0; i < params.mtry; ++i) {
        int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_cand - i)));
        std::swap(candidates[i], candidates[j]);
      }
      n_cand = params.mtry;
      std::sort(candidates.begin(), candidates.begin() + n_cand);
    }

    // best split by squared-error reduction on the targets
    double parent_sum = 0.0;
    for (int k = begin; k < end; ++k) parent_sum += g[rows[k]];
    double best_gain = 1e-12;
    int best_feat = -1;
    double best_thresh = 0.0;
    std::vector<std::pair<double, int>> order(m);
    for (int c = 0; c < n_cand; ++c) {
      int f = candidates[c];
      for (int k = 0; k < m; ++k)
        order[k] = {X(rows[begin + k], f), rows[begin + k]};
      std::sort(order.begin(), order.end());
      double left_sum = 0.0;
      int left_n = 0;
      for (int k = 0; k + 1 < m; ++k) {
        left_sum += g[order[k].second];
        ++left_n;
        if (order[k].first == order[k + 1].first) continue;
        int right_n = m - left_n;
        if (left_n < params.min_leaf || right_n < params.min_leaf) continue;
        double right_sum = parent_sum - left_sum;
        double gain = left_sum * left_sum / left_n +
                      right_sum * right_sum / right_n -
                      parent_sum * parent_sum / m;
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_feat = f;
          best_thresh = 0.5 * (order[k].first + order[k + 1].first);
        }
      }
    }
    if (best_feat < 0) return self;

    auto mid_it = std::partition(rows.begin() + begin, rows.begin() + end,
                                 [&](int r) { return X(r, best_feat) <= best_thresh; });
    int mid = static_cast<int>(mid_it - rows.begin());
    if (mid == begin || mid == end) return self;  // numeric guard

    nodes_[self].feature = best_feat;
    nodes_[self].threshold = best_thresh;
    int left = build(X, g, h, rows, begin, mid, depth + 1, params, rng, denom_floor);
    int right = build(X, g, h, rows, mid, end, depth + 1, params, rng, denom_floor);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
  }
};

}  // namespace resmet
