#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace recast {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

template <typename T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

enum class ResponseKind { continuous, binary };

inline const char* to_string(ResponseKind k) {
  return k == ResponseKind::continuous ? "continuous" : "binary";
}

/// Malformed configuration (unknown key, invalid value). CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (CSV parse, shape, labels). CLI exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure (domain violation, divergence, budget exhaustion). CLI exit code 4.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace recast
