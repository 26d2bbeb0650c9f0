#pragma once

#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>

#include "resmet/encoder.hpp"
#include "resmet/forest.hpp"
#include "resmet/gbt.hpp"
#include "resmet/logistic.hpp"
#include "resmet/regressor.hpp"

namespace resmet {

inline constexpr int kModelFormatVersion = 1;

inline std::unique_ptr<Regressor> regressor_from_json(const nlohmann::json& j) {
  Family fam = family_from_string(j.at("family").get<std::string>());
  switch (fam) {
    case Family::logistic_linear: return LogisticModel::from_json(j);
    case Family::gbt: return GbtModel::from_json(j);
    case Family::forest: return ForestModel::from_json(j);
    case Family::constant: return ConstantModel::from_json(j);
  }
  throw DataError("unknown model family in file");
}

// A fitted regressor paired with the feature encoding that produced its
// design matrix; the unit stored in model files.
struct FittedModel {
  std::shared_ptr<const Regressor> regressor;
  Encoder encoder;

  Eigen::VectorXd predict(const EventTable& t) const {
    return regressor->predict(encoder.transform(t));
  }
};

inline void save_model(const std::string& path, const FittedModel& model) {
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["model"] = model.regressor->to_json();
  j["encoder"] = model.encoder.to_json();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path);
  out << j.dump();
}

inline FittedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt model file " + path + ": " + e.what());
  }
  int version = j.value("format_version", -1);
  if (version != kModelFormatVersion)
    throw DataError("model file " + path + " has format version " +
                    std::to_string(version) + ", expected " +
                    std::to_string(kModelFormatVersion));
  FittedModel m;
  try {
    m.regressor = regressor_from_json(j.at("model"));
    m.encoder = Encoder::from_json(j.at("encoder"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt model file " + path + ": " + e.what());
  }
  return m;
}

}  // namespace resmet
