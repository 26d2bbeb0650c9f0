#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "resmet/table.hpp"

namespace resmet {

// Maps an EventTable's feature columns to a numeric design matrix.
// Numeric columns pass through with training-median imputation; categorical
// columns are one-hot encoded with a dedicated "missing" level that also
// absorbs unseen levels at prediction time.
class Encoder {
 public:
  struct NumericColumn {
    std::string name;
    double median = 0.0;
  };
  struct CategoricalColumn {
    std::string name;
    std::vector<std::string> levels;  // observed levels, sorted
  };

  static Encoder fit(const EventTable& t, bool drop_first_level = false) {
    Encoder e;
    e.drop_first_ = drop_first_level;
    for (const auto& col : t.schema) {
      if (col.kind == ColumnKind::categorical) {
        CategoricalColumn cc;
        cc.name = col.name;
        std::set<std::string> seen;
        for (const auto& v : t.categorical(col.name))
          if (!v.empty()) seen.insert(v);
        cc.levels.assign(seen.begin(), seen.end());
        e.cats_.push_back(std::move(cc));
      } else {
        NumericColumn nc;
        nc.name = col.name;
        std::vector<double> vals;
        for (double v : t.numeric(col.name))
          if (!std::isnan(v)) vals.push_back(v);
        if (!vals.empty()) {
          std::sort(vals.begin(), vals.end());
          std::size_t m = vals.size();
          nc.median = m % 2 ? vals[m / 2]
                            : 0.5 * (vals[m / 2 - 1] + vals[m / 2]);
        }
        e.nums_.push_back(std::move(nc));
      }
    }
    return e;
  }

  std::vector<std::string> feature_names() const {
    std::vector<std::string> out;
    for (const auto& nc : nums_) out.push_back(nc.name);
    for (const auto& cc : cats_) {
      for (std::size_t l = drop_first_ ? 1 : 0; l < cc.levels.size(); ++l)
        out.push_back(cc.name + "=" + cc.levels[l]);
      if (!drop_first_) out.push_back(cc.name + "=<missing>");
    }
    return out;
  }

  std::size_t dim() const {
    std::size_t p = nums_.size();
    for (const auto& cc : cats_)
      p += drop_first_ ? (cc.levels.empty() ? 0 : cc.levels.size() - 1)
                       : cc.levels.size() + 1;
    return p;
  }

  Eigen::MatrixXd transform(const EventTable& t) const {
    for (const auto& nc : nums_)
      if (!t.numeric_cols.count(nc.name))
        throw DataError("schema mismatch: missing numeric column " + nc.name);
    for (const auto& cc : cats_)
      if (!t.cat_cols.count(cc.name))
        throw DataError("schema mismatch: missing categorical column " +
                        cc.name);
    const auto n = static_cast<Eigen::Index>(t.n());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(dim()));
    Eigen::Index j = 0;
    for (const auto& nc : nums_) {
      const auto& col = t.numeric(nc.name);
      for (Eigen::Index i = 0; i < n; ++i) {
        double v = col[static_cast<std::size_t>(i)];
        out(i, j) = std::isnan(v) ? nc.median : v;
      }
      ++j;
    }
    for (const auto& cc : cats_) {
      const auto& col = t.categorical(cc.name);
      Eigen::Index base = j;
      std::size_t width =
          drop_first_ ? (cc.levels.empty() ? 0 : cc.levels.size() - 1)
                      : cc.levels.size() + 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        const std::string& v = col[static_cast<std::size_t>(i)];
        auto it = std::lower_bound(cc.levels.begin(), cc.levels.end(), v);
        long k = (it != cc.levels.end() && *it == v)
                     ? std::distance(cc.levels.begin(), it)
                     : -1;  // missing or unseen
        if (drop_first_) {
          if (k > 0) out(i, base + k - 1) = 1.0;
          // level 0, missing and unseen map to the all-zero baseline
        } else {
          if (k >= 0)
            out(i, base + k) = 1.0;
          else
            out(i, base + static_cast<long>(cc.levels.size())) = 1.0;
        }
      }
      j += static_cast<Eigen::Index>(width);
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["drop_first"] = drop_first_;
    j["numeric"] = nlohmann::json::array();
    for (const auto& nc : nums_)
      j["numeric"].push_back({{"name", nc.name}, {"median", nc.median}});
    j["categorical"] = nlohmann::json::array();
    for (const auto& cc : cats_)
      j["categorical"].push_back({{"name", cc.name}, {"levels", cc.levels}});
    return j;
  }

  static Encoder from_json(const nlohmann::json& j) {
    Encoder e;
    e.drop_first_ = j.at("drop_first").get<bool>();
    for (const auto& jn : j.at("numeric"))
      e.nums_.push_back({jn.at("name").get<std::string>(),
                         jn.at("median").get<double>()});
    for (const auto& jc : j.at("categorical"))
      e.cats_.push_back({jc.at("name").get<std::string>(),
                         jc.at("levels").get<std::vector<std::string>>()});
    return e;
  }

 private:
  std::vector<NumericColumn> nums_;
  std::vector<CategoricalColumn> cats_;
  bool drop_first_ = false;
};

}  // namespace resmet
