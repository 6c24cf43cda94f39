#pragma once

#include <cmath>
#include <utility>

#include "recast/mcmc.hpp"
#include "recast/posterior.hpp"
#include "recast/quadrature.hpp"
#include "recast/source_models.hpp"

namespace recast {

/// Calibration output: the retained chain in sampling coordinates plus the
/// thinned posterior sample converted to natural scale, one row per draw with
/// columns (delta, gamma, sigma) for continuous data and (delta, gamma) for
/// binary data.
struct CalibrationResult {
  Chain chain;
  Matrix posterior_sample;
  ResponseKind kind = ResponseKind::continuous;
};

inline Matrix to_natural_scale(const Matrix& sampling_coords, ResponseKind kind) {
  if (kind == ResponseKind::continuous) {
    if (sampling_coords.cols() != 3)
      throw DataError("to_natural_scale: continuous sample needs 3 columns");
    Matrix out(sampling_coords.rows(), 3);
    out.col(0) = sampling_coords.col(0);
    out.col(1) = sampling_coords.col(1).array().exp();
    out.col(2) = (0.5 * sampling_coords.col(2).array()).exp();
    return out;
  }
  if (sampling_coords.cols() != 2)
    throw DataError("to_natural_scale: binary sample needs 2 columns");
  Matrix out(sampling_coords.rows(), 2);
  out.col(0) = sampling_coords.col(0);
  out.col(1) = sampling_coords.col(1).array().exp();
  return out;
}

/// Runs the full posterior estimation stage on scored target data:
/// random-walk MH over the calibration parameters followed by equally spaced
/// thinning to cfg.n_post draws.
inline CalibrationResult calibrate(const ScoredTarget& data, const MhConfig& mh_cfg,
                                   const QuadratureConfig& quad_cfg, const PriorHyper& hyper,
                                   Rng& rng) {
  data.validate();
  CalibrationResult result;
  result.kind = data.kind;
  PosteriorCounters counters;

  if (data.kind == ResponseKind::continuous) {
    auto log_target = [&](const Vector& v) {
      ContinuousParams p{v[0], v[1], v[2]};
      return log_posterior_continuous(p, data, quad_cfg, hyper, &counters);
    };
    Vector init(3);
    if (mh_cfg.init.size() == 3)
      init = mh_cfg.init;
    else
      init << hyper.delta_mean, hyper.log_gamma_mean, hyper.log_sigma2_mean;
    result.chain = run_rwmh(log_target, init, mh_cfg, rng);
  } else {
    auto log_target = [&](const Vector& v) {
      BinaryParams p{v[0], v[1]};
      return log_posterior_binary(p, data, quad_cfg, hyper, &counters);
    };
    Vector init(2);
    if (mh_cfg.init.size() == 2)
      init = mh_cfg.init;
    else
      init << hyper.delta_mean, hyper.log_gamma_mean;
    result.chain = run_rwmh(log_target, init, mh_cfg, rng);
  }

  result.chain.floor_events = counters.floor_events;
  result.posterior_sample = to_natural_scale(thin_chain(result.chain, mh_cfg.n_post), data.kind);
  return result;
}

}  // namespace recast
