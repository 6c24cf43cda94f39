#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "recast/source_models.hpp"

namespace recast {

inline constexpr const char* kModelMagic = "recast-source-model";
inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::json to_json(const Vector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline nlohmann::json to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Vector vector_from_json(const nlohmann::json& a) {
  Vector v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

inline Matrix matrix_from_json(const nlohmann::json& rows) {
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
  return m;
}

}  // namespace detail

/// Versioned text container for a fitted source model: the scoring function
/// travels without any training data.
inline nlohmann::json model_to_json(const SourceModel& m) {
  nlohmann::json j;
  j["magic"] = kModelMagic;
  j["format_version"] = kModelFormatVersion;
  j["kind"] = to_string(m.kind);
  j["response"] = to_string(m.response);
  j["standardizer"] = {{"mean", detail::to_json(m.standardizer.mean)},
                       {"sd", detail::to_json(m.standardizer.sd)},
                       {"skip_first_column", m.standardizer.skip_first_column}};
  if (m.kind == ModelKind::mlp) {
    j["mlp"] = {{"w1", detail::to_json(m.mlp.w1)},
                {"b1", detail::to_json(m.mlp.b1)},
                {"w2", detail::to_json(m.mlp.w2)},
                {"b2", m.mlp.b2}};
  } else {
    j["theta"] = detail::to_json(m.theta);
  }
  nlohmann::json fit;
  if (m.kind == ModelKind::linear) {
    fit["residual_sd"] = m.residual_sd;
    fit["condition_number"] = m.condition_number;
  }
  if (m.kind == ModelKind::logistic) {
    fit["irls_iterations"] = m.irls_iterations;
    fit["quasi_separated"] = m.quasi_separated;
  }
  if (m.kind == ModelKind::mlp) fit["best_epoch"] = m.best_epoch;
  j["fit"] = fit;
  return j;
}

inline SourceModel model_from_json(const nlohmann::json& j) {
  if (!j.contains("magic") || j["magic"] != kModelMagic)
    throw DataError("model file: missing or wrong magic string");
  if (!j.contains("format_version") || j["format_version"].get<int>() != kModelFormatVersion)
    throw DataError("model file: unsupported format version");

  SourceModel m;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "linear")
    m.kind = ModelKind::linear;
  else if (kind == "logistic")
    m.kind = ModelKind::logistic;
  else if (kind == "mlp")
    m.kind = ModelKind::mlp;
  else
    throw DataError("model file: unknown kind '" + kind + "'");

  const std::string resp = j.at("response").get<std::string>();
  if (resp == "continuous")
    m.response = ResponseKind::continuous;
  else if (resp == "binary")
    m.response = ResponseKind::binary;
  else
    throw DataError("model file: unknown response '" + resp + "'");

  const auto& s = j.at("standardizer");
  m.standardizer.mean = detail::vector_from_json(s.at("mean"));
  m.standardizer.sd = detail::vector_from_json(s.at("sd"));
  m.standardizer.skip_first_column = s.at("skip_first_column").get<bool>();

  if (m.kind == ModelKind::mlp) {
    const auto& w = j.at("mlp");
    m.mlp.w1 = detail::matrix_from_json(w.at("w1"));
    m.mlp.b1 = detail::vector_from_json(w.at("b1"));
    m.mlp.w2 = detail::vector_from_json(w.at("w2"));
    m.mlp.b2 = w.at("b2").get<double>();
  } else {
    m.theta = detail::vector_from_json(j.at("theta"));
  }

  const auto& fit = j.at("fit");
  if (fit.contains("residual_sd")) m.residual_sd = fit["residual_sd"].get<double>();
  if (fit.contains("condition_number")) m.condition_number = fit["condition_number"].get<double>();
  if (fit.contains("irls_iterations")) m.irls_iterations = fit["irls_iterations"].get<int>();
  if (fit.contains("quasi_separated")) m.quasi_separated = fit["quasi_separated"].get<bool>();
  if (fit.contains("best_epoch")) m.best_epoch = fit["best_epoch"].get<int>();
  return m;
}

inline void save_model(const SourceModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("save_model: cannot open " + path);
  out << model_to_json(m).dump(1) << '\n';
}

inline SourceModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_model: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("load_model: " + std::string(e.what()));
  }
  return model_from_json(j);
}

}  // namespace recast
