#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "recast/rng.hpp"

namespace recast {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kLogSqrt2Pi = 0.9189385332046727417803297364056;  // log sqrt(2*pi)
inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599344;

/// Cauchy location/scale pair (delta, gamma). gamma = 0 is the degenerate
/// point mass at delta, valid only as a limit object, never for sampling.
struct CauchyParams {
  double delta = 0.0;
  double gamma = 1.0;
};

struct GaussianParams {
  double mean = 0.0;
  double sd = 1.0;
};

// ---------------------------------------------------------------------------
// Gaussian
// ---------------------------------------------------------------------------

inline double gaussian_log_pdf(double x, double mean = 0.0, double sd = 1.0) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

inline double gaussian_pdf(double x, double mean = 0.0, double sd = 1.0) {
  const double z = (x - mean) / sd;
  return kInvSqrt2Pi / sd * std::exp(-0.5 * z * z);
}

inline double gaussian_cdf(double x, double mean = 0.0, double sd = 1.0) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2));
}

/// Standard normal quantile. Abramowitz-Stegun 26.2.23 start polished with
/// Newton steps on erfc; accurate to full double precision over (0, 1).
inline double gaussian_quantile(double p, double mean = 0.0, double sd = 1.0) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("gaussian_quantile: p must lie in (0,1)");
  if (!(sd > 0.0)) throw std::domain_error("gaussian_quantile: sd must be positive");
  if (p == 0.5) return mean;
  const bool upper = p > 0.5;
  const double q = upper ? 1.0 - p : p;  // q in (0, 0.5]
  const double t = std::sqrt(-2.0 * std::log(q));
  // z > 0 solves Phi(-z) = q.
  double z = t - (2.515517 + t * (0.802853 + t * 0.010328)) /
                     (1.0 + t * (1.432788 + t * (0.189269 + t * 0.001308)));
  for (int i = 0; i < 4; ++i) {
    const double cdf = 0.5 * std::erfc(z / std::numbers::sqrt2);
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * z * z);
    if (pdf <= 0.0) break;
    z += (cdf - q) / pdf;
  }
  return mean + sd * (upper ? z : -z);
}

inline double gaussian_sample(Rng& rng, double mean = 0.0, double sd = 1.0) {
  if (!(sd > 0.0)) throw std::domain_error("gaussian_sample: sd must be positive");
  return rng.gaussian(mean, sd);
}

// ---------------------------------------------------------------------------
// Cauchy
// ---------------------------------------------------------------------------

inline void require_cauchy_scale(const CauchyParams& c, const char* who) {
  if (!(c.gamma > 0.0)) throw std::domain_error(std::string(who) + ": gamma must be positive");
}

inline double cauchy_pdf(const CauchyParams& c, double x) {
  require_cauchy_scale(c, "cauchy_pdf");
  const double z = (x - c.delta) / c.gamma;
  return 1.0 / (kPi * c.gamma * (1.0 + z * z));
}

inline double cauchy_log_pdf(const CauchyParams& c, double x) {
  require_cauchy_scale(c, "cauchy_log_pdf");
  const double z = (x - c.delta) / c.gamma;
  return -std::log(kPi * c.gamma) - std::log1p(z * z);
}

inline double cauchy_cdf(const CauchyParams& c, double x) {
  require_cauchy_scale(c, "cauchy_cdf");
  return 0.5 + std::atan((x - c.delta) / c.gamma) / kPi;
}

inline double cauchy_quantile(const CauchyParams& c, double p) {
  require_cauchy_scale(c, "cauchy_quantile");
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("cauchy_quantile: p must lie in (0,1)");
  return c.delta + c.gamma * std::tan(kPi * (p - 0.5));
}

inline double cauchy_sample(Rng& rng, const CauchyParams& c) {
  require_cauchy_scale(c, "cauchy_sample");
  return rng.cauchy(c.delta, c.gamma);
}

// ---------------------------------------------------------------------------
// Log-normal
// ---------------------------------------------------------------------------

inline double lognormal_log_pdf(double x, double log_mean = 0.0, double log_sd = 1.0) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  const double lx = std::log(x);
  return gaussian_log_pdf(lx, log_mean, log_sd) - lx;
}

inline double lognormal_pdf(double x, double log_mean = 0.0, double log_sd = 1.0) {
  if (!(x > 0.0)) return 0.0;
  return gaussian_pdf(std::log(x), log_mean, log_sd) / x;
}

inline double lognormal_sample(Rng& rng, double log_mean = 0.0, double log_sd = 1.0) {
  return rng.lognormal(log_mean, log_sd);
}

// ---------------------------------------------------------------------------
// Ratio law: for x ~ N(0, I), (x'a)/(x'b) is Cauchy with these parameters.
// ---------------------------------------------------------------------------

template <typename DerivedA, typename DerivedB>
CauchyParams cauchy_ratio_params(const Eigen::MatrixBase<DerivedA>& a,
                                 const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size() || a.size() < 1)
    throw std::invalid_argument("cauchy_ratio_params: vectors must share a positive length");
  const double bb = b.squaredNorm();
  if (!(bb > 0.0)) throw std::domain_error("cauchy_ratio_params: degenerate denominator vector");
  const double aa = a.squaredNorm();
  const double ab = a.dot(b);
  // Cancellation can push the radicand slightly negative near collinearity;
  // clamping yields the correct degenerate limit gamma = 0.
  const double radicand = std::max(0.0, bb * aa - ab * ab);
  return CauchyParams{ab / bb, std::sqrt(radicand) / bb};
}

/// Stable logistic function e^z / (1 + e^z).
inline double expit(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace recast
