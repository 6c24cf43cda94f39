#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/QR>

#include "recast/distributions.hpp"
#include "recast/rng.hpp"
#include "recast/types.hpp"

namespace recast {

struct Dataset {
  Matrix X;  // n x p design; column 0 may be an all-ones intercept
  Vector y;
  ResponseKind kind = ResponseKind::continuous;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }

  void validate() const {
    if (X.rows() < 1 || X.rows() != y.size()) throw DataError("Dataset: shape mismatch");
    if (!X.allFinite() || !y.allFinite()) throw DataError("Dataset: non-finite entries");
    if (kind == ResponseKind::binary) {
      for (Eigen::Index i = 0; i < y.size(); ++i)
        if (y[i] != 0.0 && y[i] != 1.0)
          throw DataError("Dataset: binary labels must be 0 or 1 (row " + std::to_string(i) + ")");
    }
  }
};

/// Per-feature (mean, sd) pairs; an intercept column is passed through.
struct Standardizer {
  Vector mean;
  Vector sd;
  bool skip_first_column = false;

  static Standardizer identity(Eigen::Index p) {
    return Standardizer{Vector::Zero(p), Vector::Ones(p), false};
  }

  bool is_identity() const {
    return mean.isZero(0.0) && (sd.array() == 1.0).all();
  }
};

/// Column means and sample standard deviations of the fit set. Columns must
/// have positive variance; the intercept column (if flagged) is skipped.
inline Standardizer standardize_fit(const Matrix& X, bool has_intercept = false) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (n < 2) throw DataError("standardize_fit: need at least two rows");
  Standardizer s;
  s.mean = X.colwise().mean();
  s.sd.resize(p);
  s.skip_first_column = has_intercept;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (has_intercept && j == 0) {
      s.mean[j] = 0.0;
      s.sd[j] = 1.0;
      continue;
    }
    const double var = (X.col(j).array() - s.mean[j]).square().sum() / static_cast<double>(n - 1);
    if (!(var > 0.0))
      throw DataError("standardize_fit: zero-variance column " + std::to_string(j));
    s.sd[j] = std::sqrt(var);
  }
  return s;
}

inline Matrix standardize_apply(const Standardizer& s, const Matrix& X) {
  if (X.cols() != s.mean.size()) throw DataError("standardize_apply: column count mismatch");
  Matrix out(X.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (s.skip_first_column && j == 0)
      out.col(j) = X.col(j);
    else
      out.col(j) = (X.col(j).array() - s.mean[j]) / s.sd[j];
  }
  return out;
}

inline Vector standardize_apply(const Standardizer& s, const Vector& x) {
  if (x.size() != s.mean.size()) throw DataError("standardize_apply: length mismatch");
  Vector out = (x - s.mean).cwiseQuotient(s.sd);
  if (s.skip_first_column && x.size() > 0) out[0] = x[0];
  return out;
}

enum class ModelKind { linear, logistic, mlp };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::linear: return "linear";
    case ModelKind::logistic: return "logistic";
    default: return "mlp";
  }
}

struct MlpConfig {
  int hidden = 25;
  int epochs = 2500;
  double calibration_fraction = 0.2;
  double adam_step = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

/// Two-layer network p -> hidden (ReLU) -> 1. For a binary response the
/// stored score is the pre-sigmoid output so that downstream calibration acts
/// on the natural-parameter scale.
struct MlpParams {
  Matrix w1;  // hidden x p
  Vector b1;  // hidden
  Vector w2;  // hidden
  double b2 = 0.0;
};

/// A fitted source predictor exposing a scalar pre-link score per feature
/// vector: x' theta for linear and logistic models (the logit), the final
/// pre-sigmoid activation for the network.
struct SourceModel {
  ModelKind kind = ModelKind::linear;
  ResponseKind response = ResponseKind::continuous;
  Standardizer standardizer;
  Vector theta;             // linear / logistic
  double residual_sd = 0.0; // linear
  double condition_number = 0.0;
  int irls_iterations = 0;
  bool quasi_separated = false;  // logistic fit returned at the iteration cap
  MlpParams mlp;
  int best_epoch = 0;
  std::vector<double> calibration_trace;

  double score_standardized(const Vector& x) const {
    switch (kind) {
      case ModelKind::linear:
      case ModelKind::logistic:
        if (x.size() != theta.size()) throw DataError("score: feature dimension mismatch");
        return theta.dot(x);
      default: {
        if (x.size() != mlp.w1.cols()) throw DataError("score: feature dimension mismatch");
        const Vector h = ((mlp.w1 * x + mlp.b1).array().max(0.0)).matrix();
        return mlp.w2.dot(h) + mlp.b2;
      }
    }
  }

  double score(const Vector& x) const {
    if (standardizer.mean.size() == 0 || standardizer.is_identity())
      return score_standardized(x);
    return score_standardized(standardize_apply(standardizer, x));
  }

  Vector score_all(const Matrix& X) const {
    Vector out(X.rows());
    if (standardizer.mean.size() != 0 && !standardizer.is_identity()) {
      const Matrix Xs = standardize_apply(standardizer, X);
      for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = score_standardized(Xs.row(i));
    } else {
      for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = score_standardized(X.row(i));
    }
    return out;
  }
};

/// Ordinary least squares via column-pivoted QR; stores the residual sd.
inline SourceModel fit_ols(const Dataset& data) {
  data.validate();
  if (data.kind != ResponseKind::continuous) throw DataError("fit_ols: response must be continuous");
  const Eigen::Index n = data.n(), p = data.p();
  if (n < p) throw NumericError("fit_ols: fewer rows than columns");

  Eigen::ColPivHouseholderQR<Matrix> qr(data.X);
  if (qr.rank() < p) throw NumericError("fit_ols: rank-deficient design");

  SourceModel m;
  m.kind = ModelKind::linear;
  m.response = ResponseKind::continuous;
  m.standardizer = Standardizer::identity(p);
  m.theta = qr.solve(data.y);

  const Vector r_diag = qr.matrixR().diagonal().cwiseAbs();
  m.condition_number = r_diag.maxCoeff() / r_diag.minCoeff();

  const Vector resid = data.y - data.X * m.theta;
  const Eigen::Index dof = std::max<Eigen::Index>(1, n - p);
  m.residual_sd = std::sqrt(resid.squaredNorm() / static_cast<double>(dof));
  return m;
}

/// Logistic regression by iteratively reweighted least squares with step
/// halving. Converges when every score-gradient component is below 1e-8, or
/// stops after 100 iterations. Complete separation (a parameter norm above
/// 1e4 during iteration, or a fit carrying every label with probability
/// within 1e-8 of certainty) is an error unless allow_separation is set, in
/// which case the capped quasi-MLE is returned with the flag recorded: the
/// score direction is still a usable pre-link scorer, and the downstream
/// calibration absorbs the scale.
inline SourceModel fit_logistic(const Dataset& data, bool allow_separation = false) {
  data.validate();
  if (data.kind != ResponseKind::binary) throw DataError("fit_logistic: response must be binary");
  const double label_sum = data.y.sum();
  if (label_sum == 0.0 || label_sum == static_cast<double>(data.n()))
    throw DataError("fit_logistic: both classes must be present");

  const Eigen::Index n = data.n(), p = data.p();
  Vector theta = Vector::Zero(p);
  bool separated = false;

  auto log_lik = [&](const Vector& t) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double eta = data.X.row(i).dot(t);
      // log Bernoulli(y | expit(eta)) = y*eta - log(1 + e^eta)
      ll += data.y[i] * eta - (eta > 0.0 ? eta + std::log1p(std::exp(-eta))
                                         : std::log1p(std::exp(eta)));
    }
    return ll;
  };

  double ll = log_lik(theta);
  int iter = 0;
  for (; iter < 100 && !separated; ++iter) {
    const Vector eta = data.X * theta;
    Vector prob(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = expit(eta[i]);
      w[i] = std::max(prob[i] * (1.0 - prob[i]), 1e-10);
    }
    const Vector grad = data.X.transpose() * (data.y - prob);
    if (grad.cwiseAbs().maxCoeff() < 1e-8) break;

    const Matrix xtwx = data.X.transpose() * w.asDiagonal() * data.X;
    Vector step = xtwx.ldlt().solve(grad);
    if (!step.allFinite()) throw NumericError("fit_logistic: singular weighted system");

    double scale = 1.0;
    Vector trial = theta + step;
    double trial_ll = log_lik(trial);
    for (int h = 0; h < 6 && !(trial_ll >= ll); ++h) {
      scale *= 0.5;
      trial = theta + scale * step;
      trial_ll = log_lik(trial);
    }
    theta = trial;
    ll = trial_ll;
    if (theta.cwiseAbs().maxCoeff() > 1e4) {
      if (!allow_separation) throw NumericError("fit_logistic: separation");
      separated = true;
    }
  }
  // Every fitted probability within 1e-8 of its label means the classes are
  // completely separated and the MLE does not exist; the smallest margin is
  // then at least -log(1e-8).
  {
    const Vector eta = data.X * theta;
    double min_margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i)
      min_margin = std::min(min_margin, (data.y[i] == 1.0 ? eta[i] : -eta[i]));
    if (min_margin >= -std::log(1e-8)) {
      if (!allow_separation) throw NumericError("fit_logistic: separation");
      separated = true;
    }
  }

  SourceModel m;
  m.kind = ModelKind::logistic;
  m.response = ResponseKind::binary;
  m.standardizer = Standardizer::identity(p);
  m.theta = theta;
  m.irls_iterations = iter;
  m.quasi_separated = separated;
  return m;
}

namespace detail {

struct MlpWorkspace {
  Matrix h_pre, h;   // n x hidden
  Vector out;        // n
};

inline void mlp_forward(const MlpParams& w, const Matrix& X, MlpWorkspace& ws) {
  ws.h_pre = (X * w.w1.transpose()).rowwise() + w.b1.transpose();
  ws.h = ws.h_pre.array().max(0.0).matrix();
  ws.out = ws.h * w.w2 + Vector::Constant(X.rows(), w.b2);
}

inline double mlp_loss(const MlpParams& w, const Matrix& X, const Vector& y, bool binary) {
  MlpWorkspace ws;
  mlp_forward(w, X, ws);
  if (!binary) return (ws.out - y).squaredNorm() / static_cast<double>(X.rows());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double d = expit(ws.out[i]) - y[i];
    loss += d * d;
  }
  return loss / static_cast<double>(X.rows());
}

struct AdamState {
  Matrix m_w1, v_w1;
  Vector m_b1, v_b1, m_w2, v_w2;
  double m_b2 = 0.0, v_b2 = 0.0;
  long long t = 0;

  explicit AdamState(const MlpParams& w)
      : m_w1(Matrix::Zero(w.w1.rows(), w.w1.cols())),
        v_w1(Matrix::Zero(w.w1.rows(), w.w1.cols())),
        m_b1(Vector::Zero(w.b1.size())),
        v_b1(Vector::Zero(w.b1.size())),
        m_w2(Vector::Zero(w.w2.size())),
        v_w2(Vector::Zero(w.w2.size())) {}
};

template <typename T>
void adam_update(T& param, T& m, T& v, const T& grad, const MlpConfig& cfg, double bc1,
                 double bc2) {
  m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * grad;
  v = (cfg.adam_beta2 * v.array() + (1.0 - cfg.adam_beta2) * grad.array().square()).matrix();
  param -= (cfg.adam_step * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.adam_eps)).matrix();
}

inline void adam_update_scalar(double& param, double& m, double& v, double grad,
                               const MlpConfig& cfg, double bc1, double bc2) {
  m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * grad;
  v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * grad * grad;
  param -= cfg.adam_step * (m / bc1) / (std::sqrt(v / bc2) + cfg.adam_eps);
}

// Full-batch MSE training with Adam and min-calibration-loss snapshotting.
// With train_first_layer = false the first layer stays bit-identical.
inline void mlp_train(MlpParams& w, const Matrix& X_train, const Vector& y_train,
                      const Matrix& X_cal, const Vector& y_cal, bool binary, const MlpConfig& cfg,
                      bool train_first_layer, int& best_epoch, std::vector<double>& trace) {
  AdamState adam(w);
  MlpWorkspace ws;
  const double n_inv = 1.0 / static_cast<double>(X_train.rows());

  MlpParams best = w;
  trace.clear();
  trace.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
  trace.push_back(mlp_loss(w, X_cal, y_cal, binary));  // pre-training state is a candidate
  best_epoch = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    mlp_forward(w, X_train, ws);
    Vector d_out(X_train.rows());
    if (binary) {
      for (Eigen::Index i = 0; i < X_train.rows(); ++i) {
        const double prob = expit(ws.out[i]);
        d_out[i] = 2.0 * (prob - y_train[i]) * prob * (1.0 - prob) * n_inv;
      }
    } else {
      d_out = 2.0 * n_inv * (ws.out - y_train);
    }
    if (!d_out.allFinite())
      throw NumericError("fit_mlp: non-finite loss gradient at epoch " + std::to_string(epoch));

    const Vector g_w2 = ws.h.transpose() * d_out;
    const double g_b2 = d_out.sum();

    ++adam.t;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam.t));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam.t));

    if (train_first_layer) {
      const Matrix d_h =
          ((d_out * w.w2.transpose()).array() * (ws.h_pre.array() > 0.0).cast<double>()).matrix();
      const Matrix g_w1 = d_h.transpose() * X_train;
      const Vector g_b1 = d_h.colwise().sum();
      adam_update(w.w1, adam.m_w1, adam.v_w1, g_w1, cfg, bc1, bc2);
      adam_update(w.b1, adam.m_b1, adam.v_b1, g_b1, cfg, bc1, bc2);
    }
    adam_update(w.w2, adam.m_w2, adam.v_w2, g_w2, cfg, bc1, bc2);
    adam_update_scalar(w.b2, adam.m_b2, adam.v_b2, g_b2, cfg, bc1, bc2);

    const double cal_loss = mlp_loss(w, X_cal, y_cal, binary);
    if (!std::isfinite(cal_loss))
      throw NumericError("fit_mlp: non-finite loss at epoch " + std::to_string(epoch));
    trace.push_back(cal_loss);
    if (cal_loss < trace[static_cast<std::size_t>(best_epoch)]) {
      best_epoch = epoch;
      best = w;
    }
  }
  w = best;
}

inline void split_calibration(Eigen::Index n, double fraction, Rng& rng,
                              std::vector<Eigen::Index>& train_idx,
                              std::vector<Eigen::Index>& cal_idx) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.next_u64() % i)]);
  const auto n_cal = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                  std::llround(fraction * static_cast<double>(n))));
  cal_idx.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_cal));
  train_idx.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_cal), idx.end());
}

inline Matrix take_rows(const Matrix& X, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  return out;
}

inline Vector take(const Vector& y, const std::vector<Eigen::Index>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[rows[i]];
  return out;
}

}  // namespace detail

/// Xavier-initialized two-layer network trained full-batch with Adam and MSE
/// loss; for a binary response the loss is taken on the post-sigmoid
/// probability and the score stays on the logit scale. Parameters are the
/// snapshot from the epoch with the lowest calibration loss, the calibration
/// split being drawn once from the provided stream.
inline SourceModel fit_mlp(const Dataset& data, const MlpConfig& cfg, Rng& rng) {
  data.validate();
  if (data.n() < 10) throw DataError("fit_mlp: need at least 10 rows for a calibration split");
  if (cfg.hidden < 1 || cfg.epochs < 1) throw ConfigError("MlpConfig: hidden and epochs must be >= 1");
  if (!(cfg.calibration_fraction > 0.0 && cfg.calibration_fraction < 1.0))
    throw ConfigError("MlpConfig: calibration_fraction must lie in (0,1)");

  const Eigen::Index p = data.p();
  const bool binary = data.kind == ResponseKind::binary;

  SourceModel m;
  m.kind = ModelKind::mlp;
  m.response = data.kind;
  m.standardizer = Standardizer::identity(p);

  const double limit1 = std::sqrt(6.0 / static_cast<double>(p + cfg.hidden));
  const double limit2 = std::sqrt(6.0 / static_cast<double>(cfg.hidden + 1));
  m.mlp.w1.resize(cfg.hidden, p);
  for (Eigen::Index i = 0; i < m.mlp.w1.rows(); ++i)
    for (Eigen::Index j = 0; j < m.mlp.w1.cols(); ++j)
      m.mlp.w1(i, j) = rng.uniform(-limit1, limit1);
  m.mlp.b1 = Vector::Zero(cfg.hidden);
  m.mlp.w2.resize(cfg.hidden);
  for (Eigen::Index i = 0; i < cfg.hidden; ++i) m.mlp.w2[i] = rng.uniform(-limit2, limit2);
  m.mlp.b2 = 0.0;

  std::vector<Eigen::Index> train_idx, cal_idx;
  detail::split_calibration(data.n(), cfg.calibration_fraction, rng, train_idx, cal_idx);
  const Matrix X_train = detail::take_rows(data.X, train_idx);
  const Vector y_train = detail::take(data.y, train_idx);
  const Matrix X_cal = detail::take_rows(data.X, cal_idx);
  const Vector y_cal = detail::take(data.y, cal_idx);

  detail::mlp_train(m.mlp, X_train, y_train, X_cal, y_cal, binary, cfg, true, m.best_epoch,
                    m.calibration_trace);
  return m;
}

/// Retrains the output layer on the target data with the same optimizer and
/// early-stopping protocol; first-layer weights stay bit-identical.
inline SourceModel unfreeze_last_layer(const SourceModel& src, const Dataset& target,
                                       const MlpConfig& cfg, Rng& rng) {
  if (src.kind != ModelKind::mlp) throw DataError("unfreeze_last_layer: source must be an mlp");
  target.validate();
  if (target.kind != src.response)
    throw DataError("unfreeze_last_layer: response kind mismatch");
  if (target.n() < 10)
    throw DataError("unfreeze_last_layer: need at least 10 rows for a calibration split");

  SourceModel m = src;
  m.best_epoch = 0;
  m.calibration_trace.clear();

  Matrix X = target.X;
  if (src.standardizer.mean.size() != 0 && !src.standardizer.is_identity())
    X = standardize_apply(src.standardizer, target.X);

  std::vector<Eigen::Index> train_idx, cal_idx;
  detail::split_calibration(target.n(), cfg.calibration_fraction, rng, train_idx, cal_idx);
  const Matrix X_train = detail::take_rows(X, train_idx);
  const Vector y_train = detail::take(target.y, train_idx);
  const Matrix X_cal = detail::take_rows(X, cal_idx);
  const Vector y_cal = detail::take(target.y, cal_idx);

  detail::mlp_train(m.mlp, X_train, y_train, X_cal, y_cal,
                    target.kind == ResponseKind::binary, cfg, false, m.best_epoch,
                    m.calibration_trace);
  return m;
}

}  // namespace recast
