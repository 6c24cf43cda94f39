#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "recast/rng.hpp"
#include "recast/types.hpp"

namespace recast {

/// Random-walk Metropolis-Hastings schedule. Defaults reproduce the reference
/// pipeline: 100k iterations, the first 20k as burn-in for proposal tuning,
/// the final 50k retained, thinned to 300 equally spaced draws.
struct MhConfig {
  long long total_iters = 100000;
  long long burn_in = 20000;
  long long keep_last = 50000;
  int n_post = 300;
  Vector init;             // starting state; defaults to prior means if empty
  Vector init_proposal_sd; // per-coordinate proposal scales at iteration 0
  double target_accept = 0.30;
  long long adapt_interval = 100;
  double adapt_gain = 1.0;

  void validate(int dim) const {
    if (burn_in < 0 || keep_last <= 0 || total_iters <= 0)
      throw ConfigError("MhConfig: iteration counts must be positive");
    if (burn_in + keep_last > total_iters)
      throw ConfigError("MhConfig: burn_in + keep_last must not exceed total_iters");
    if (n_post <= 0 || n_post > keep_last)
      throw ConfigError("MhConfig: need 0 < n_post <= keep_last");
    if (init.size() != 0 && init.size() != dim)
      throw ConfigError("MhConfig: init has wrong dimension");
    if (init_proposal_sd.size() != 0 && init_proposal_sd.size() != dim)
      throw ConfigError("MhConfig: init_proposal_sd has wrong dimension");
    if (!(target_accept > 0.0 && target_accept < 1.0))
      throw ConfigError("MhConfig: target_accept must lie in (0,1)");
    if (adapt_interval <= 0) throw ConfigError("MhConfig: adapt_interval must be positive");
  }
};

struct Chain {
  Matrix samples;       // keep_last x d, in sampling coordinates
  Vector log_target;    // log target at each retained state
  double accept_rate = 0.0;    // over the retained (post-adaptation) segment
  Vector proposal_sds;         // frozen per-coordinate scales
  long long floor_events = 0;  // filled by the caller from posterior counters
  bool low_acceptance_warning = false;
};

/// Random-walk MH with independent Gaussian proposals per coordinate.
/// During burn-in, every adapt_interval iterations all proposal sds are
/// multiplied by exp(gain * (window acceptance - target)); the scales are
/// frozen afterwards, so the retained chain comes from a fixed kernel.
template <class LogTarget>
Chain run_rwmh(LogTarget&& log_target, const Vector& init, const MhConfig& cfg, Rng& rng) {
  const int d = static_cast<int>(init.size());
  cfg.validate(d);

  Vector x = init;
  double lx = log_target(x);
  if (!std::isfinite(lx))
    throw NumericError("run_rwmh: log target is not finite at the initial state");

  Vector sds = cfg.init_proposal_sd.size() == d ? cfg.init_proposal_sd
                                                : Vector::Constant(d, 0.1);

  Chain chain;
  chain.samples.resize(cfg.keep_last, d);
  chain.log_target.resize(cfg.keep_last);

  const long long keep_from = cfg.total_iters - cfg.keep_last;  // 0-based iteration index
  long long window_accepts = 0;
  long long kept_accepts = 0;
  Vector proposal(d);

  for (long long iter = 0; iter < cfg.total_iters; ++iter) {
    for (int j = 0; j < d; ++j) proposal[j] = x[j] + sds[j] * rng.gaussian();
    const double lp = log_target(proposal);
    bool accept = false;
    if (lp >= lx) {
      accept = true;
    } else if (std::isfinite(lp)) {
      accept = std::log(rng.uniform()) < lp - lx;
    }
    if (accept) {
      x = proposal;
      lx = lp;
      ++window_accepts;
      if (iter >= keep_from) ++kept_accepts;
    }

    if (iter < cfg.burn_in && (iter + 1) % cfg.adapt_interval == 0) {
      const double rate = static_cast<double>(window_accepts) / cfg.adapt_interval;
      const double factor = std::exp(cfg.adapt_gain * (rate - cfg.target_accept));
      sds *= factor;
      window_accepts = 0;
    }
    if (iter == cfg.burn_in - 1) window_accepts = 0;

    if (iter >= keep_from) {
      chain.samples.row(iter - keep_from) = x;
      chain.log_target[iter - keep_from] = lx;
    }
  }

  chain.accept_rate = static_cast<double>(kept_accepts) / cfg.keep_last;
  chain.proposal_sds = sds;
  chain.low_acceptance_warning = chain.accept_rate < 0.01;
  return chain;
}

template <class LogTarget>
Chain run_rwmh(LogTarget&& log_target, const MhConfig& cfg, Rng& rng) {
  if (cfg.init.size() == 0) throw ConfigError("run_rwmh: cfg.init is empty");
  return run_rwmh(log_target, cfg.init, cfg, rng);
}

/// Equally spaced posterior sample: rows i * floor(keep_last / n_post) for
/// i = 1..n_post (1-based), so n_post = keep_last is the identity and
/// n_post = 1 picks the last retained state.
inline Matrix thin_chain(const Chain& chain, int n_post) {
  const long long kept = chain.samples.rows();
  if (n_post <= 0 || n_post > kept)
    throw std::invalid_argument("thin_chain: need 0 < n_post <= retained length");
  const long long stride = kept / n_post;
  Matrix out(n_post, chain.samples.cols());
  for (int i = 1; i <= n_post; ++i) out.row(i - 1) = chain.samples.row(i * stride - 1);
  return out;
}

}  // namespace recast
