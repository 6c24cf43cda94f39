#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "recast/distributions.hpp"
#include "recast/types.hpp"

namespace recast {

struct QuadratureConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-12;
  int max_subdivisions = 200;
  double continuous_bound = 39.0;  // truncation half-width for the continuous integral
};

struct QuadratureResult {
  double value = 0.0;
  double err_est = 0.0;
};

/// Subdivision budget exhausted; carries the best estimate so far.
struct QuadratureLimitError : NumericError {
  QuadratureLimitError(double value_, double err_est_)
      : NumericError("integrate_adaptive: subdivision budget exhausted (best estimate " +
                     std::to_string(value_) + ", err_est " + std::to_string(err_est_) + ")"),
        value(value_),
        err_est(err_est_) {}
  double value;
  double err_est;
};

namespace detail {

// 15-point Kronrod nodes with embedded 7-point Gauss rule (QUADPACK dqk15).
inline constexpr double kGk15Nodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kGk15WeightsK[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGk15WeightsG[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double lo, hi;
  double value;    // Kronrod estimate
  double err;      // error estimate
};

// One GK15 evaluation over [lo, hi]; the QUADPACK-style error estimate uses
// the integral of |f - mean| to damp the raw Gauss/Kronrod difference.
template <class F>
Panel gk15(F&& f, double lo, double hi) {
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);

  double fv[15];
  const double fc = f(center);
  double resk = kGk15WeightsK[7] * fc;
  double resg = kGk15WeightsG[3] * fc;
  fv[14] = fc;
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kGk15Nodes[j];
    const double f1 = f(center - dx);
    const double f2 = f(center + dx);
    fv[j] = f1;
    fv[7 + j] = f2;
    resk += kGk15WeightsK[j] * (f1 + f2);
    if (j % 2 == 1) resg += kGk15WeightsG[j / 2] * (f1 + f2);
  }
  if (!std::isfinite(resk)) {
    for (int j = 0; j < 7; ++j) {
      if (!std::isfinite(fv[j]))
        throw NumericError("integrate_adaptive: integrand not finite at x = " +
                           std::to_string(center - half * kGk15Nodes[j]));
      if (!std::isfinite(fv[7 + j]))
        throw NumericError("integrate_adaptive: integrand not finite at x = " +
                           std::to_string(center + half * kGk15Nodes[j]));
    }
    throw NumericError("integrate_adaptive: integrand not finite at x = " +
                       std::to_string(center));
  }

  const double reskh = resk * 0.5;
  double resasc = kGk15WeightsK[7] * std::abs(fc - reskh);
  for (int j = 0; j < 7; ++j)
    resasc += kGk15WeightsK[j] * (std::abs(fv[j] - reskh) + std::abs(fv[7 + j] - reskh));
  resasc *= half;

  double err = std::abs(resk - resg) * half;
  if (resasc != 0.0 && err != 0.0)
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  return Panel{lo, hi, resk * half, err};
}

template <class F>
QuadratureResult integrate_panels(F&& f, const std::vector<double>& breaks,
                                  const QuadratureConfig& cfg) {
  std::vector<Panel> panels;
  panels.reserve(static_cast<std::size_t>(cfg.max_subdivisions) + breaks.size());
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    panels.push_back(gk15(f, breaks[i], breaks[i + 1]));

  auto total = [&panels]() {
    double v = 0.0, e = 0.0;
    for (const Panel& p : panels) {
      v += p.value;
      e += p.err;
    }
    return QuadratureResult{v, e};
  };

  int splits = 0;
  for (;;) {
    QuadratureResult t = total();
    const double tol = std::max(cfg.abs_tol, cfg.rel_tol * std::abs(t.value));
    if (t.err_est <= tol) {
      // Recombine in interval order so the sum is bit-stable regardless of
      // the subdivision history.
      std::sort(panels.begin(), panels.end(),
                [](const Panel& a, const Panel& b) { return a.lo < b.lo; });
      return total();
    }
    if (splits >= cfg.max_subdivisions) throw QuadratureLimitError(t.value, t.err_est);

    std::size_t worst = 0;
    for (std::size_t i = 1; i < panels.size(); ++i)
      if (panels[i].err > panels[worst].err) worst = i;
    const Panel p = panels[worst];
    const double mid = 0.5 * (p.lo + p.hi);
    panels[worst] = gk15(f, p.lo, mid);
    panels.push_back(gk15(f, mid, p.hi));
    ++splits;
  }
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of f over the finite interval [lo, hi].
template <class F>
QuadratureResult integrate_adaptive(F&& f, double lo, double hi, const QuadratureConfig& cfg = {}) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("integrate_adaptive: need finite lo < hi");
  std::vector<double> breaks{lo, hi};
  return detail::integrate_panels(f, breaks, cfg);
}

/// Variant seeded with interior breakpoints (deduplicated, clipped to [lo, hi]).
template <class F>
QuadratureResult integrate_adaptive(F&& f, double lo, double hi, std::vector<double> interior,
                                    const QuadratureConfig& cfg) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("integrate_adaptive: need finite lo < hi");
  std::vector<double> breaks;
  breaks.reserve(interior.size() + 2);
  breaks.push_back(lo);
  std::sort(interior.begin(), interior.end());
  for (double x : interior)
    if (x > breaks.back() && x < hi) breaks.push_back(x);
  breaks.push_back(hi);
  return detail::integrate_panels(f, breaks, cfg);
}

/// Per-observation marginal likelihood factor for a continuous response:
///   integral over u in [-B, B] of N(u | 0, 1) / sigma * Cauchy(u | m, s) du,
/// with m = |f|/sigma * (delta - y/f) and s = |f| gamma / sigma. This is the
/// substituted form of the Gaussian-innovation likelihood with the Cauchy
/// random effect marginalized out; the truncation error is bounded by
/// (phi(B) + phi(B)) / sigma, numerically zero at the default B = 39.
inline double continuous_likelihood_integral(double y, double f_score, double delta, double gamma,
                                             double sigma, const QuadratureConfig& cfg = {}) {
  if (f_score == 0.0)
    throw std::domain_error(
        "continuous_likelihood_integral: zero source score violates a.s. condition");
  if (!(sigma > 0.0)) throw std::domain_error("continuous_likelihood_integral: sigma must be > 0");
  if (!(gamma > 0.0)) throw std::domain_error("continuous_likelihood_integral: gamma must be > 0");

  const double af = std::abs(f_score);
  const double m = af / sigma * (delta - y / f_score);
  const double s = af * gamma / sigma;
  const double bound = cfg.continuous_bound;

  const double inv_pi_s = 1.0 / (kPi * s);
  auto integrand = [m, s, inv_pi_s](double u) {
    const double z = (u - m) / s;
    return kInvSqrt2Pi * std::exp(-0.5 * u * u) * inv_pi_s / (1.0 + z * z);
  };

  // Seed panels around both mass centers: the unit Gaussian at 0 and the
  // Cauchy spike at m with scale s. The geometric ladder lets each panel span
  // one scale octave of the 1/z^2 tail so little refinement remains. A spike
  // beyond |u| = 12 contributes only through its smooth tail, which the
  // Gaussian-side panels resolve.
  std::vector<double> interior;
  interior.reserve(20);
  interior.assign({-8.0, -2.0, 0.0, 2.0, 8.0});
  if (std::abs(m) <= 12.0) {
    const double w = std::max(s, 1e-300);
    interior.push_back(m);
    for (double k = w; k < 32.0; k *= 8.0) {
      if (std::abs(m + k) < 16.0) interior.push_back(m + k);
      if (std::abs(m - k) < 16.0) interior.push_back(m - k);
    }
  }
  const QuadratureResult r = integrate_adaptive(integrand, -bound, bound, std::move(interior), cfg);
  return r.value / sigma;
}

/// Per-observation marginal likelihood factor for a binary response:
///   integral over beta of Bernoulli(y | expit(beta * f)) Cauchy(beta | delta, gamma) d beta,
/// computed after the exact Cauchy-CDF substitution beta(t) = delta + gamma tan(pi(t - 1/2)),
/// which maps the real line onto (0, 1) with a bounded integrand.
inline double binary_likelihood_integral(int y, double f_score, double delta, double gamma,
                                         const QuadratureConfig& cfg = {}) {
  if (!(gamma > 0.0)) throw std::domain_error("binary_likelihood_integral: gamma must be > 0");
  if (y != 0 && y != 1) throw std::invalid_argument("binary_likelihood_integral: y must be 0 or 1");

  const double sign = (y == 1) ? 1.0 : -1.0;
  auto integrand = [delta, gamma, f_score, sign](double t) {
    const double beta = delta + gamma * std::tan(kPi * (t - 0.5));
    return expit(sign * beta * f_score);
  };

  // The integrand transitions where beta(t) * f crosses zero; seed the panels
  // around t* = CauchyCDF(0 | delta, gamma) at a few dyadic widths.
  std::vector<double> interior;
  interior.reserve(8);
  interior.push_back(0.5);
  if (f_score != 0.0) {
    const double t_star = 0.5 + std::atan(-delta / gamma) / kPi;
    const double slope = kPi * gamma * (1.0 + (delta / gamma) * (delta / gamma));
    const double width = std::min(0.25, 16.0 / (std::abs(f_score) * slope));
    for (double k : {-8.0, -1.0, 0.0, 1.0, 8.0}) {
      const double t = t_star + k * width;
      if (t > 0.0 && t < 1.0) interior.push_back(t);
    }
  }
  const QuadratureResult r = integrate_adaptive(integrand, 0.0, 1.0, std::move(interior), cfg);
  return r.value;
}

}  // namespace recast
