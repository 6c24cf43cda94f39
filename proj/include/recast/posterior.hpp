#pragma once

#include <cmath>
#include <limits>

#include "recast/distributions.hpp"
#include "recast/quadrature.hpp"
#include "recast/types.hpp"

namespace recast {

/// Prior hyperparameters: delta ~ N(mean, var); log(gamma) and log(sigma^2)
/// are Gaussian, i.e. gamma and sigma^2 are log-normal.
struct PriorHyper {
  double delta_mean = 1.0;
  double delta_var = 400.0;
  double log_gamma_mean = 0.0;
  double log_gamma_var = 9.0;
  double log_sigma2_mean = 0.0;
  double log_sigma2_var = 9.0;
};

/// Sampling coordinates for the continuous model. The log scales keep
/// random-walk proposals unconstrained; the prior evaluated as Gaussian in
/// these coordinates is exactly the log-normal prior with its Jacobian.
struct ContinuousParams {
  double delta = 1.0;
  double log_gamma = 0.0;
  double log_sigma2 = 0.0;

  double gamma() const { return std::exp(log_gamma); }
  double sigma() const { return std::exp(0.5 * log_sigma2); }
};

struct BinaryParams {
  double delta = 1.0;
  double log_gamma = 0.0;

  double gamma() const { return std::exp(log_gamma); }
};

/// Source-model scores and labels for the target sample.
struct ScoredTarget {
  Vector scores;  // f(theta_S, x_i), pre-link scale
  Vector labels;  // y_i; {0,1} for binary
  ResponseKind kind = ResponseKind::continuous;

  Eigen::Index size() const { return scores.size(); }

  void validate() const {
    if (scores.size() != labels.size())
      throw DataError("ScoredTarget: scores and labels must have equal length");
    if (!scores.allFinite() || !labels.allFinite())
      throw DataError("ScoredTarget: non-finite entries");
    if (kind == ResponseKind::continuous) {
      for (Eigen::Index i = 0; i < scores.size(); ++i)
        if (scores[i] == 0.0)
          throw DataError("ScoredTarget: zero source score at row " + std::to_string(i));
    } else {
      for (Eigen::Index i = 0; i < labels.size(); ++i)
        if (labels[i] != 0.0 && labels[i] != 1.0)
          throw DataError("ScoredTarget: binary labels must be 0 or 1 (row " + std::to_string(i) +
                          ")");
    }
  }
};

/// Running diagnostics accumulated over posterior evaluations.
struct PosteriorCounters {
  long long floor_events = 0;
};

inline double log_prior_continuous(const ContinuousParams& p, const PriorHyper& h = {}) {
  return gaussian_log_pdf(p.delta, h.delta_mean, std::sqrt(h.delta_var)) +
         gaussian_log_pdf(p.log_gamma, h.log_gamma_mean, std::sqrt(h.log_gamma_var)) +
         gaussian_log_pdf(p.log_sigma2, h.log_sigma2_mean, std::sqrt(h.log_sigma2_var));
}

inline double log_prior_binary(const BinaryParams& p, const PriorHyper& h = {}) {
  return gaussian_log_pdf(p.delta, h.delta_mean, std::sqrt(h.delta_var)) +
         gaussian_log_pdf(p.log_gamma, h.log_gamma_mean, std::sqrt(h.log_gamma_var));
}

namespace detail {

// Values below the smallest positive normal are floored before the log so a
// far-outlying observation cannot poison the chain; each event is counted.
inline double log_floored(double v, PosteriorCounters* counters) {
  constexpr double floor = std::numeric_limits<double>::min();
  if (v < floor) {
    if (counters) ++counters->floor_events;
    v = floor;
  }
  return std::log(v);
}

}  // namespace detail

/// Log posterior density (up to the normalizing constant) of the continuous
/// calibration model in sampling coordinates (delta, log gamma, log sigma^2).
/// Per-observation integrals are accumulated in index order so the sum is
/// bit-stable for a given build.
inline double log_posterior_continuous(const ContinuousParams& p, const ScoredTarget& data,
                                       const QuadratureConfig& cfg = {},
                                       const PriorHyper& hyper = {},
                                       PosteriorCounters* counters = nullptr) {
  if (data.kind != ResponseKind::continuous)
    throw DataError("log_posterior_continuous: data is not continuous");
  const double gamma = p.gamma();
  const double sigma = p.sigma();
  double lp = log_prior_continuous(p, hyper);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double v =
        continuous_likelihood_integral(data.labels[i], data.scores[i], p.delta, gamma, sigma, cfg);
    lp += detail::log_floored(v, counters);
  }
  return lp;
}

inline double log_posterior_binary(const BinaryParams& p, const ScoredTarget& data,
                                   const QuadratureConfig& cfg = {}, const PriorHyper& hyper = {},
                                   PosteriorCounters* counters = nullptr) {
  if (data.kind != ResponseKind::binary)
    throw DataError("log_posterior_binary: data is not binary");
  const double gamma = p.gamma();
  double lp = log_prior_binary(p, hyper);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const int y = data.labels[i] != 0.0 ? 1 : 0;
    const double v = binary_likelihood_integral(y, data.scores[i], p.delta, gamma, cfg);
    lp += detail::log_floored(v, counters);
  }
  return lp;
}

}  // namespace recast
