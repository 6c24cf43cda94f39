#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "recast/distributions.hpp"
#include "recast/types.hpp"

namespace recast {

/// Monte Carlo sample from the posterior predictive law at one test point.
/// Continuous: n_post * n_beta * n_y response draws. Binary: one expit
/// probability per random-effect draw (n_post * n_beta values), which has the
/// same mean as the literal Bernoulli sampling with strictly less variance;
/// the literal path is kept for testing.
struct PredictiveDraws {
  std::vector<double> values;
  int n_post = 0;
  int n_beta = 0;
  int n_y = 0;
  ResponseKind kind = ResponseKind::continuous;
  bool rao_blackwellized = true;

  double p_tilde() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
  }
};

/// Either a real interval (continuous) or a subset of {0,1} (binary) meant to
/// contain a new response with probability 1 - alpha.
struct PredictionSet {
  enum class Kind { interval, label_set };
  Kind kind = Kind::interval;
  double lo = 0.0;
  double hi = 0.0;
  bool has_zero = false;
  bool has_one = false;
  double nominal_level = 0.95;

  bool contains(double y) const {
    if (kind == Kind::interval) return lo <= y && y <= hi;
    return y == 0.0 ? has_zero : has_one;
  }
};

/// Posterior predictive sampling for a continuous response. posterior_sample
/// holds one (delta, gamma, sigma) triple per row in natural scale. For each
/// triple, n_beta random effects are drawn from Cauchy(delta, gamma) and each
/// spawns n_y draws from N(beta * f_tilde, sigma^2).
inline PredictiveDraws predict_continuous(const Matrix& posterior_sample, double f_tilde,
                                          int n_beta, int n_y, Rng& rng) {
  const int n_post = static_cast<int>(posterior_sample.rows());
  if (n_post == 0) throw std::invalid_argument("predict_continuous: empty posterior sample");
  if (posterior_sample.cols() != 3)
    throw std::invalid_argument("predict_continuous: expected columns (delta, gamma, sigma)");
  if (n_beta <= 0 || n_y <= 0)
    throw std::invalid_argument("predict_continuous: sample sizes must be positive");

  PredictiveDraws out;
  out.kind = ResponseKind::continuous;
  out.n_post = n_post;
  out.n_beta = n_beta;
  out.n_y = n_y;
  out.values.resize(static_cast<std::size_t>(n_post) * n_beta * n_y);

  std::size_t k = 0;
  for (int i = 0; i < n_post; ++i) {
    const double delta = posterior_sample(i, 0);
    const double gamma = posterior_sample(i, 1);
    const double sigma = posterior_sample(i, 2);
    if (!(gamma > 0.0)) throw std::domain_error("predict_continuous: gamma must be positive");
    for (int j = 0; j < n_beta; ++j) {
      const double beta = rng.cauchy(delta, gamma);
      const double mean = beta * f_tilde;
      for (int l = 0; l < n_y; ++l) out.values[k++] = mean + sigma * rng.gaussian();
    }
  }
  return out;
}

/// Posterior predictive sampling for a binary response. posterior_sample has
/// rows (delta, gamma). By default stores expit(beta * f_tilde) per random
/// effect; with rao_blackwell = false it draws the n_y Bernoulli variates
/// literally and stores the 0/1 outcomes.
inline PredictiveDraws predict_binary(const Matrix& posterior_sample, double f_tilde, int n_beta,
                                      Rng& rng, bool rao_blackwell = true, int n_y = 1) {
  const int n_post = static_cast<int>(posterior_sample.rows());
  if (n_post == 0) throw std::invalid_argument("predict_binary: empty posterior sample");
  if (posterior_sample.cols() < 2)
    throw std::invalid_argument("predict_binary: expected columns (delta, gamma)");
  if (n_beta <= 0 || n_y <= 0)
    throw std::invalid_argument("predict_binary: sample sizes must be positive");

  PredictiveDraws out;
  out.kind = ResponseKind::binary;
  out.n_post = n_post;
  out.n_beta = n_beta;
  out.n_y = n_y;
  out.rao_blackwellized = rao_blackwell;
  out.values.reserve(static_cast<std::size_t>(n_post) * n_beta * (rao_blackwell ? 1 : n_y));

  for (int i = 0; i < n_post; ++i) {
    const double delta = posterior_sample(i, 0);
    const double gamma = posterior_sample(i, 1);
    if (!(gamma > 0.0)) throw std::domain_error("predict_binary: gamma must be positive");
    for (int j = 0; j < n_beta; ++j) {
      const double p = expit(rng.cauchy(delta, gamma) * f_tilde);
      if (rao_blackwell) {
        out.values.push_back(p);
      } else {
        for (int l = 0; l < n_y; ++l) out.values.push_back(rng.bernoulli(p) ? 1.0 : 0.0);
      }
    }
  }
  return out;
}

namespace detail {

// Hazen (midpoint) empirical quantile on sorted data: rank h = n*p + 0.5
// (1-based), linear interpolation between adjacent order statistics, clamped
// to [min, max].
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  const double h = static_cast<double>(n) * p + 0.5;
  if (h <= 1.0) return sorted.front();
  if (h >= static_cast<double>(n)) return sorted.back();
  const std::size_t i = static_cast<std::size_t>(h);  // 1-based lower rank
  const double frac = h - static_cast<double>(i);
  return sorted[i - 1] + frac * (sorted[i] - sorted[i - 1]);
}

// Extracts several quantiles in one recursive multi-rank selection pass
// (divide and conquer over nth_element); reorders scratch. Total work is
// O(n log k) for k requested ranks.
class QuantileScratch {
 public:
  explicit QuantileScratch(std::vector<double>& scratch) : data_(scratch) {}

  std::vector<double> quantiles(const std::vector<double>& probs) {
    const std::size_t n = data_.size();
    std::vector<std::ptrdiff_t> ranks;  // 0-based order statistics needed
    for (double p : probs) {
      const double h = static_cast<double>(n) * p + 0.5;
      if (h <= 1.0) {
        ranks.push_back(0);
      } else if (h >= static_cast<double>(n)) {
        ranks.push_back(static_cast<std::ptrdiff_t>(n) - 1);
      } else {
        const std::size_t i = static_cast<std::size_t>(h);
        ranks.push_back(static_cast<std::ptrdiff_t>(i) - 1);
        ranks.push_back(static_cast<std::ptrdiff_t>(i));
      }
    }
    std::sort(ranks.begin(), ranks.end());
    ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
    select(0, static_cast<std::ptrdiff_t>(n), ranks, 0, ranks.size());

    std::vector<double> out;
    out.reserve(probs.size());
    for (double p : probs) {
      const double h = static_cast<double>(n) * p + 0.5;
      if (h <= 1.0) {
        out.push_back(data_[0]);
      } else if (h >= static_cast<double>(n)) {
        out.push_back(data_[n - 1]);
      } else {
        const std::size_t i = static_cast<std::size_t>(h);
        const double frac = h - static_cast<double>(i);
        out.push_back(data_[i - 1] + frac * (data_[i] - data_[i - 1]));
      }
    }
    return out;
  }

 private:
  void select(std::ptrdiff_t lo, std::ptrdiff_t hi, const std::vector<std::ptrdiff_t>& ranks,
              std::size_t rlo, std::size_t rhi) {
    if (rlo >= rhi || lo >= hi) return;
    const std::size_t rmid = rlo + (rhi - rlo) / 2;
    const std::ptrdiff_t r = ranks[rmid];
    std::nth_element(data_.begin() + lo, data_.begin() + r, data_.begin() + hi);
    select(lo, r, ranks, rlo, rmid);
    select(r + 1, hi, ranks, rmid + 1, rhi);
  }

  std::vector<double>& data_;
};

}  // namespace detail

/// Equal-tailed interval [q(alpha/2), q(1 - alpha/2)] from empirical
/// quantiles of the draws.
inline PredictionSet interval_from_draws(const PredictiveDraws& draws, double alpha) {
  if (draws.values.empty()) throw std::invalid_argument("interval_from_draws: no draws");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("interval_from_draws: alpha must lie in (0,1)");
  std::vector<double> scratch = draws.values;
  const auto q = detail::QuantileScratch(scratch).quantiles({alpha / 2.0, 1.0 - alpha / 2.0});
  PredictionSet set;
  set.kind = PredictionSet::Kind::interval;
  set.lo = q[0];
  set.hi = q[1];
  set.nominal_level = 1.0 - alpha;
  return set;
}

/// Label set at level 1 - alpha from the predictive probability p_tilde:
/// {0} when 0 is the more likely label and covers the level on its own,
/// {1} symmetrically, otherwise both labels.
inline PredictionSet binary_prediction_set(double p_tilde, double alpha) {
  if (!(p_tilde >= 0.0 && p_tilde <= 1.0))
    throw std::invalid_argument("binary_prediction_set: p_tilde must lie in [0,1]");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("binary_prediction_set: alpha must lie in (0,1)");
  PredictionSet set;
  set.kind = PredictionSet::Kind::label_set;
  set.nominal_level = 1.0 - alpha;
  const double q = 1.0 - p_tilde;
  if (p_tilde < q && 1.0 - alpha <= q) {
    set.has_zero = true;
  } else if (q <= p_tilde && 1.0 - alpha <= p_tilde) {
    set.has_one = true;
  } else {
    set.has_zero = true;
    set.has_one = true;
  }
  return set;
}

/// Point prediction: the empirical median for continuous draws (the
/// predictive law is a Cauchy-scale mixture with no finite mean), the
/// predictive probability for binary draws.
inline double point_prediction(const PredictiveDraws& draws) {
  if (draws.values.empty()) throw std::invalid_argument("point_prediction: no draws");
  if (draws.kind == ResponseKind::binary) return draws.p_tilde();
  std::vector<double> scratch = draws.values;
  return detail::QuantileScratch(scratch).quantiles({0.5})[0];
}

/// Point prediction plus prediction sets at several levels, sharing one
/// quantile-extraction pass over the draws. Matches point_prediction,
/// interval_from_draws and binary_prediction_set exactly.
struct PredictiveSummary {
  double point = 0.0;
  double p_tilde = 0.0;  // binary only
  std::vector<PredictionSet> sets;  // one per alpha, in input order
};

inline PredictiveSummary summarize_draws(const PredictiveDraws& draws,
                                         const std::vector<double>& alphas) {
  if (draws.values.empty()) throw std::invalid_argument("summarize_draws: no draws");
  PredictiveSummary out;
  if (draws.kind == ResponseKind::binary) {
    out.p_tilde = draws.p_tilde();
    out.point = out.p_tilde;
    for (double a : alphas) out.sets.push_back(binary_prediction_set(out.p_tilde, a));
    return out;
  }
  std::vector<double> probs{0.5};
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0))
      throw std::invalid_argument("summarize_draws: alpha must lie in (0,1)");
    probs.push_back(a / 2.0);
    probs.push_back(1.0 - a / 2.0);
  }
  std::vector<double> scratch = draws.values;
  const auto q = detail::QuantileScratch(scratch).quantiles(probs);
  out.point = q[0];
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    PredictionSet set;
    set.kind = PredictionSet::Kind::interval;
    set.lo = q[1 + 2 * i];
    set.hi = q[2 + 2 * i];
    set.nominal_level = 1.0 - alphas[i];
    out.sets.push_back(set);
  }
  return out;
}

/// Closed-form MLEs of the calibration parameters given the latent standard
/// Cauchy variates v_i and the fixed score s: ordinary least squares of y/s
/// on v.
inline std::pair<double, double> mle_delta_gamma(const Vector& y, const Vector& v, double s) {
  if (y.size() != v.size() || y.size() < 2)
    throw std::invalid_argument("mle_delta_gamma: need matching lengths >= 2");
  if (s == 0.0) throw std::domain_error("mle_delta_gamma: score s must be nonzero");
  if (v.maxCoeff() == v.minCoeff())
    throw std::domain_error("mle_delta_gamma: degenerate latent sample");
  const double v_bar = v.mean();
  const double y_bar = y.mean();
  const double svv = (v.array() - v_bar).square().sum();
  if (!(svv > 0.0)) throw std::domain_error("mle_delta_gamma: degenerate latent sample");
  const double svy = ((v.array() - v_bar) * (y.array() - y_bar)).sum();
  const double gamma_hat = svy / (s * svv);
  const double delta_hat = y_bar / s - v_bar * gamma_hat;
  return {delta_hat, gamma_hat};
}

/// Plugin-MLE prediction interval: one random effect drawn from
/// Cauchy(delta_hat, |gamma_hat|) shifts the fixed-width Gaussian interval
/// [z_{a/2} sigma, z_{1-a/2} sigma] by beta * s. gamma_hat = 0 degenerates to
/// beta = delta_hat.
inline PredictionSet mle_plugin_interval(double delta_hat, double gamma_hat, double sigma, double s,
                                         double alpha, Rng& rng) {
  if (!(sigma > 0.0)) throw std::domain_error("mle_plugin_interval: sigma must be positive");
  if (s == 0.0) throw std::domain_error("mle_plugin_interval: score s must be nonzero");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("mle_plugin_interval: alpha must lie in (0,1)");
  const double g = std::abs(gamma_hat);
  const double beta = g > 0.0 ? rng.cauchy(delta_hat, g) : delta_hat;
  const double z = gaussian_quantile(1.0 - alpha / 2.0);
  PredictionSet set;
  set.kind = PredictionSet::Kind::interval;
  set.lo = -z * sigma + beta * s;
  set.hi = z * sigma + beta * s;
  set.nominal_level = 1.0 - alpha;
  return set;
}

}  // namespace recast
