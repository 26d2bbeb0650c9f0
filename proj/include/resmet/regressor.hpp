#pragma once

#include <Eigen/Dense>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>

#include "resmet/core.hpp"

namespace resmet {

enum class Family { logistic_linear, gbt, forest, constant };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::logistic_linear: return "logistic-linear";
    case Family::gbt: return "gbt";
    case Family::forest: return "forest";
    case Family::constant: return "constant";
  }
  throw NumericError("unknown family");
}

inline Family family_from_string(const std::string& s) {
  if (s == "logistic-linear" || s == "logistic") return Family::logistic_linear;
  if (s == "gbt") return Family::gbt;
  if (s == "forest") return Family::forest;
  if (s == "constant") return Family::constant;
  throw DataError("unknown model family: " + s);
}

// Immutable fitted prediction function over a numeric design matrix.
class Regressor {
 public:
  virtual ~Regressor() = default;
  virtual Family family() const = 0;
  virtual Eigen::Index input_dim() const = 0;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& X) const = 0;
  virtual bool supports_oob() const { return false; }
  // Training-row predictions using only trees that did not see the row.
  virtual Eigen::VectorXd oob_predictions() const {
    throw NumericError("model has no out-of-bag predictions");
  }
  virtual nlohmann::json to_json() const = 0;

 protected:
  void check_dim(const Eigen::MatrixXd& X) const {
    if (X.cols() != input_dim())
      throw DataError("feature schema mismatch: expected " +
                      std::to_string(input_dim()) + " columns, got " +
                      std::to_string(X.cols()));
  }
};

// Predicts a fixed value everywhere; used for degenerate targets and for the
// residualization-off baseline.
class ConstantModel final : public Regressor {
 public:
  ConstantModel(double value, Eigen::Index dim) : value_(value), dim_(dim) {}

  Family family() const override { return Family::constant; }
  Eigen::Index input_dim() const override { return dim_; }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    check_dim(X);
    return Eigen::VectorXd::Constant(X.rows(), value_);
  }

  nlohmann::json to_json() const override {
    return {{"family", "constant"}, {"value", value_}, {"dim", dim_}};
  }

  static std::unique_ptr<ConstantModel> from_json(const nlohmann::json& j) {
    return std::make_unique<ConstantModel>(j.at("value").get<double>(),
                                           j.at("dim").get<Eigen::Index>());
  }

 private:
  double value_;
  Eigen::Index dim_;
};

}  // namespace resmet
