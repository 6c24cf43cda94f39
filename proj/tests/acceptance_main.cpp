// Acceptance suite: one pass/fail line per criterion, exit code 0 only if
// every criterion passes. Run a single criterion with --criterion N.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "recast/calibration.hpp"
#include "recast/config.hpp"
#include "recast/metrics.hpp"
#include "recast/predictive.hpp"
#include "recast/quadrature.hpp"
#include "recast/sim_harness.hpp"
#include "stat_utils.hpp"

using namespace recast;

namespace {

struct Criterion {
  int id;
  std::string name;
  std::function<bool(std::string&)> body;
};

// ---------------------------------------------------------------------------
// 1. Ratio-law check: simulated Gaussian-projection ratios against the mapped
//    Cauchy distribution, two-sample KS < 0.005 for 20 random direction pairs.
// ---------------------------------------------------------------------------
bool criterion_ratio_law(std::string& detail) {
  const int n_pairs = 20;
  const int n_draws = 1000000;
  const int p = 50;
  std::vector<double> ks_stats(n_pairs, 0.0);

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int pair = next.fetch_add(1);
      if (pair >= n_pairs) return;
      Rng rng(Rng::derive_seed(1001, {static_cast<std::uint64_t>(pair)}));
      Vector a(p), b(p);
      for (int j = 0; j < p; ++j) a[j] = rng.uniform(-5.0, 5.0);
      for (int j = 0; j < p; ++j) b[j] = rng.uniform(-5.0, 5.0);
      const CauchyParams params = cauchy_ratio_params(a, b);

      std::vector<double> ratios(n_draws), cauchy_draws(n_draws);
      Vector x(p);
      for (int i = 0; i < n_draws; ++i) {
        double num = 0.0, den = 0.0;
        for (int j = 0; j < p; ++j) {
          const double g = rng.gaussian();
          num += a[j] * g;
          den += b[j] * g;
        }
        ratios[i] = num / den;
      }
      for (int i = 0; i < n_draws; ++i) cauchy_draws[i] = rng.cauchy(params.delta, params.gamma);
      ks_stats[pair] = testutil::ks_statistic_two_sample(std::move(ratios), std::move(cauchy_draws));
    }
  };
  std::thread t(worker);
  worker();
  t.join();

  double worst = 0.0;
  for (double d : ks_stats) worst = std::max(worst, d);
  std::ostringstream os;
  os << "worst two-sample KS over " << n_pairs << " pairs = " << worst << " (limit 0.005)";
  detail = os.str();
  return worst < 0.005;
}

// ---------------------------------------------------------------------------
// 2. Truncation bound: the continuous likelihood integral over [-39, 39]
//    agrees with [-100, 100] to 1e-12 relative on a 50-point parameter grid,
//    and the analytic bound phi(39)/sigma is numerically zero.
// ---------------------------------------------------------------------------
bool criterion_truncation(std::string& detail) {
  if (gaussian_pdf(39.0) != 0.0 || gaussian_pdf(-39.0) != 0.0) {
    detail = "phi(39) did not underflow to zero";
    return false;
  }
  QuadratureConfig tight;
  tight.rel_tol = 1e-13;
  tight.abs_tol = 1e-15;
  tight.max_subdivisions = 2000;
  QuadratureConfig wide = tight;
  wide.continuous_bound = 100.0;

  Rng rng(1002);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double f = rng.uniform(0.3, 20.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    const double delta = rng.uniform(-2.0, 3.0);
    const double gamma = rng.uniform(1e-3, 5.0);
    const double sigma = rng.uniform(0.1, 3.0);
    const double y = delta * f + rng.uniform(-2.0, 2.0) * sigma;
    const double narrow_v = continuous_likelihood_integral(y, f, delta, gamma, sigma, tight);
    const double wide_v = continuous_likelihood_integral(y, f, delta, gamma, sigma, wide);
    worst = std::max(worst, std::abs(narrow_v - wide_v) / std::abs(narrow_v));
  }
  std::ostringstream os;
  os << "worst relative difference = " << worst << " (limit 1e-12); phi(39) underflows to 0";
  detail = os.str();
  return worst < 1e-12;
}

// ---------------------------------------------------------------------------
// 3. Quadrature vs Monte Carlo duality on 50 + 50 random configurations with
//    1e7-draw oracles, agreement within 3 MC standard errors.
// ---------------------------------------------------------------------------
bool criterion_mc_duality(std::string& detail) {
  const int n_configs = 50;
  const int n_draws = 10000000;
  std::vector<double> deviations(2 * n_configs, 0.0);
  std::atomic<int> next{0};

  auto run_config = [&](int idx) {
    const bool binary = idx >= n_configs;
    Rng rng(Rng::derive_seed(1003, {static_cast<std::uint64_t>(idx)}));
    double quad = 0.0, mean = 0.0, se = 0.0;
    if (!binary) {
      const double f = rng.uniform(0.5, 5.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
      const double delta = rng.uniform(-2.0, 2.0);
      const double gamma = rng.uniform(0.05, 2.0);
      const double sigma = rng.uniform(0.3, 2.0);
      const double y = delta * f + rng.uniform(-2.0, 2.0) * sigma;
      double sum = 0.0, sumsq = 0.0;
      for (int i = 0; i < n_draws; ++i) {
        const double v = gaussian_pdf(y, rng.cauchy(delta, gamma) * f, sigma);
        sum += v;
        sumsq += v * v;
      }
      mean = sum / n_draws;
      se = std::sqrt((sumsq / n_draws - mean * mean) / (n_draws - 1.0));
      quad = continuous_likelihood_integral(y, f, delta, gamma, sigma);
    } else {
      const double f = rng.uniform(0.2, 5.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
      const double delta = rng.uniform(-2.0, 2.0);
      const double gamma = rng.uniform(0.05, 2.0);
      const int y = rng.bernoulli(0.5) ? 1 : 0;
      const double sign = y == 1 ? 1.0 : -1.0;
      double sum = 0.0, sumsq = 0.0;
      for (int i = 0; i < n_draws; ++i) {
        const double v = expit(sign * rng.cauchy(delta, gamma) * f);
        sum += v;
        sumsq += v * v;
      }
      mean = sum / n_draws;
      se = std::sqrt((sumsq / n_draws - mean * mean) / (n_draws - 1.0));
      quad = binary_likelihood_integral(y, f, delta, gamma);
    }
    deviations[static_cast<std::size_t>(idx)] = std::abs(quad - mean) / se;
  };

  auto worker = [&]() {
    for (;;) {
      const int idx = next.fetch_add(1);
      if (idx >= 2 * n_configs) return;
      run_config(idx);
    }
  };
  std::thread t(worker);
  worker();
  t.join();

  double worst_cont = 0.0, worst_bin = 0.0;
  for (int i = 0; i < n_configs; ++i) worst_cont = std::max(worst_cont, deviations[i]);
  for (int i = n_configs; i < 2 * n_configs; ++i) worst_bin = std::max(worst_bin, deviations[i]);
  std::ostringstream os;
  os << "worst |quad - MC| / se over 50+50 configurations: continuous " << worst_cont
     << ", binary " << worst_bin << " (limit 3)";
  detail = os.str();
  return worst_cont < 3.0 && worst_bin < 3.0;
}

// ---------------------------------------------------------------------------
// 4. Closed-form calibration MLEs match a numerical maximizer of the joint
//    likelihood within 1e-6 on 100 random instances.
// ---------------------------------------------------------------------------
bool criterion_mle_closed_form(std::string& detail) {
  Rng rng(1004);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 30 + static_cast<int>(rng.next_u64() % 50);
    const double s = rng.uniform(0.5, 4.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    const double sigma = rng.uniform(0.3, 2.0);
    Vector v(n), y(n);
    for (int i = 0; i < n; ++i) {
      v[i] = rng.cauchy(0.0, 1.0);
      y[i] = rng.gaussian(rng.uniform(0.5, 1.5) * s, sigma);
    }
    const auto [delta_hat, gamma_hat] = mle_delta_gamma(y, v, s);
    auto nll = [&](const std::vector<double>& dg) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        acc -= gaussian_log_pdf(y[i], (dg[0] + dg[1] * v[i]) * s, sigma) +
               cauchy_log_pdf({0.0, 1.0}, v[i]);
      return acc;
    };
    const auto opt = testutil::nelder_mead(nll, {0.0, 0.1}, 0.5, 5000, 1e-15);
    worst = std::max({worst, std::abs(delta_hat - opt[0]), std::abs(gamma_hat - opt[1])});
  }
  std::ostringstream os;
  os << "worst |closed form - optimizer| = " << worst << " over 100 instances (limit 1e-6)";
  detail = os.str();
  return worst < 1e-6;
}

// ---------------------------------------------------------------------------
// 5. Empirical asymptotics of the plugin MLEs and the interval coverage.
// ---------------------------------------------------------------------------
bool criterion_plugin_asymptotics(std::string& detail) {
  Rng setup(1005);
  const Vector theta_s = make_theta_source(setup, 50);
  Vector theta_t = theta_s;
  for (int j = 0; j < 50; ++j) theta_t[j] += setup.gaussian();  // sigma_tl2 = 1
  Vector x_tilde(50);
  for (int j = 0; j < 50; ++j) x_tilde[j] = setup.gaussian();
  const double s = x_tilde.dot(theta_s);
  const double target_mean = x_tilde.dot(theta_t);
  const double beta_star = target_mean / s;
  const double sigma = 1.0;

  const std::vector<int> sizes{100, 1000, 10000};
  std::vector<double> med_delta_err, med_gamma;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    std::vector<double> delta_errs, gammas;
    for (int rep = 0; rep < 50; ++rep) {
      Rng rng(Rng::derive_seed(1006, {k, static_cast<std::uint64_t>(rep)}));
      const int n = sizes[k];
      Vector v(n), y(n);
      for (int i = 0; i < n; ++i) {
        v[i] = rng.cauchy(0.0, 1.0);
        y[i] = rng.gaussian(target_mean, sigma);
      }
      const auto [delta_hat, gamma_hat] = mle_delta_gamma(y, v, s);
      delta_errs.push_back(std::abs(delta_hat - beta_star));
      gammas.push_back(std::abs(gamma_hat));
    }
    med_delta_err.push_back(testutil::median(delta_errs));
    med_gamma.push_back(testutil::median(gammas));
  }
  const bool monotone = med_delta_err[0] > med_delta_err[1] && med_delta_err[1] > med_delta_err[2] &&
                        med_gamma[0] > med_gamma[1] && med_gamma[1] > med_gamma[2];

  // Interval coverage at n_T = 1e4 over 2000 fresh response draws, each with
  // its own random-effect draw.
  Rng rng(1007);
  const int n = 10000;
  Vector v(n), y(n);
  for (int i = 0; i < n; ++i) {
    v[i] = rng.cauchy(0.0, 1.0);
    y[i] = rng.gaussian(target_mean, sigma);
  }
  const auto [delta_hat, gamma_hat] = mle_delta_gamma(y, v, s);
  int hits = 0;
  const int n_draws = 2000;
  for (int i = 0; i < n_draws; ++i) {
    const PredictionSet set = mle_plugin_interval(delta_hat, gamma_hat, sigma, s, 0.05, rng);
    const double fresh = rng.gaussian(target_mean, sigma);
    hits += set.contains(fresh) ? 1 : 0;
  }
  const double coverage = static_cast<double>(hits) / n_draws;

  std::ostringstream os;
  os << "median |delta err| " << med_delta_err[0] << " > " << med_delta_err[1] << " > "
     << med_delta_err[2] << "; median |gamma| " << med_gamma[0] << " > " << med_gamma[1] << " > "
     << med_gamma[2] << "; interval coverage " << coverage << " (range [0.93, 0.97])";
  detail = os.str();
  return monotone && coverage >= 0.93 && coverage <= 0.97;
}

// ---------------------------------------------------------------------------
// 6-8. Desk-scale anchors against the reported synthetic-benchmark values.
// ---------------------------------------------------------------------------
struct AnchorResult {
  double rmse_observed = 0.0;
  double rmse_structural = 0.0;
  double auc_value = 0.0;
  double cov95 = 0.0;
  int ok_rows = 0;
  int failed_rows = 0;
};

AnchorResult run_anchor(ResponseKind kind, int n_target, double sigma_tl2, Method method,
                        const std::string& out_name) {
  RunConfig rc;
  rc.apply_desk_scale();
  rc.grid.coverage_levels = {0.80, 0.95};

  GridSpec spec;
  spec.n_target = {n_target};
  spec.sigma_tl2 = {sigma_tl2};
  spec.replicates = 30;
  spec.kind = kind;
  spec.methods = {method};
  spec.master_seed = 31415;

  HarnessConfig harness = rc.harness_config(kind);
  harness.coverage_levels = rc.grid.coverage_levels;

  std::filesystem::create_directories("acceptance_out");
  const GridResult grid = run_grid(spec, harness, 2, "acceptance_out/" + out_name);

  AnchorResult res;
  for (const MetricsRow& r : grid.rows) {
    if (r.status != "ok") {
      ++res.failed_rows;
      continue;
    }
    ++res.ok_rows;
    if (kind == ResponseKind::continuous) {
      res.rmse_observed += r.rmse_observed;
      res.rmse_structural += r.rmse_structural;
    } else {
      res.auc_value += r.auc_value;
    }
    res.cov95 += r.coverage.at(0.95);
  }
  if (res.ok_rows > 0) {
    res.rmse_observed /= res.ok_rows;
    res.rmse_structural /= res.ok_rows;
    res.auc_value /= res.ok_rows;
    res.cov95 /= res.ok_rows;
  }
  return res;
}

bool criterion_rmse_anchor(std::string& detail) {
  const AnchorResult res =
      run_anchor(ResponseKind::continuous, 250, 0.0, Method::recast_lm, "anchor_rmse.csv");
  std::ostringstream os;
  os << "mean RMSE over 30 replicates: observed-label convention " << res.rmse_observed
     << ", structural convention " << res.rmse_structural
     << " (reference value 0.517; acceptance range [0.42, 0.65] for the matching convention); "
     << res.failed_rows << " failed rows";
  detail = os.str();
  const bool in_range = (res.rmse_observed >= 0.42 && res.rmse_observed <= 0.65) ||
                        (res.rmse_structural >= 0.42 && res.rmse_structural <= 0.65);
  return res.ok_rows == 30 && in_range;
}

bool criterion_coverage_anchor(std::string& detail) {
  const AnchorResult res =
      run_anchor(ResponseKind::continuous, 100, 0.25, Method::recast_lm, "anchor_coverage.csv");
  std::ostringstream os;
  os << "mean 95% empirical coverage over 30 replicates = " << res.cov95
     << " (reference 0.960; acceptance range [0.93, 0.99]); " << res.failed_rows << " failed rows";
  detail = os.str();
  return res.ok_rows == 30 && res.cov95 >= 0.93 && res.cov95 <= 0.99;
}

bool criterion_binary_anchor(std::string& detail) {
  const AnchorResult res =
      run_anchor(ResponseKind::binary, 250, 0.0, Method::recast_glm, "anchor_binary.csv");
  std::ostringstream os;
  os << "mean AUC over 30 replicates = " << res.auc_value
     << " (reference 0.978; acceptance floor 0.94), mean 95% coverage = " << res.cov95
     << " (reference 0.954; acceptance range [0.93, 0.98]); " << res.failed_rows << " failed rows";
  detail = os.str();
  return res.ok_rows == 30 && res.auc_value >= 0.94 && res.cov95 >= 0.93 && res.cov95 <= 0.98;
}

// ---------------------------------------------------------------------------
// 9. Exhaustive check of the three-case label-set rule and its monotonicity
//    in alpha.
// ---------------------------------------------------------------------------
bool criterion_label_set_cases(std::string& detail) {
  long long checked = 0;
  for (int pi = 0; pi <= 1000; ++pi) {
    const double p = static_cast<double>(pi) / 1000.0;
    bool prev_zero = true, prev_one = true;
    bool first = true;
    for (int ai = 1; ai <= 999; ai += 2) {
      const double alpha = static_cast<double>(ai) / 1000.0;
      const PredictionSet set = binary_prediction_set(p, alpha);

      // Literal transcription of the three cases.
      const double q = 1.0 - p;
      bool expect_zero, expect_one;
      if (p < q && 1.0 - alpha <= q) {
        expect_zero = true;
        expect_one = false;
      } else if (q <= p && 1.0 - alpha <= p) {
        expect_zero = false;
        expect_one = true;
      } else {
        expect_zero = true;
        expect_one = true;
      }
      if (set.has_zero != expect_zero || set.has_one != expect_one) {
        std::ostringstream os;
        os << "case mismatch at p_tilde=" << p << " alpha=" << alpha;
        detail = os.str();
        return false;
      }
      // Monotonicity: the set can only shrink as alpha grows.
      if (!first && ((set.has_zero && !prev_zero) || (set.has_one && !prev_one))) {
        std::ostringstream os;
        os << "coverage monotonicity violated at p_tilde=" << p << " alpha=" << alpha;
        detail = os.str();
        return false;
      }
      prev_zero = set.has_zero;
      prev_one = set.has_one;
      first = false;
      ++checked;
    }
  }
  std::ostringstream os;
  os << checked << " (p_tilde, alpha) pairs match the three-case rule exactly, sets shrink in alpha";
  detail = os.str();
  return true;
}

// ---------------------------------------------------------------------------
// 10. Draw-count fidelity: the n_post * n_beta * n_y product rule, verified
//     with reduced sizes and pinned to 27,000,000 at the reference settings.
// ---------------------------------------------------------------------------
bool criterion_draw_count(std::string& detail) {
  Rng rng(1010);
  Matrix post(30, 3);
  for (int i = 0; i < 30; ++i) {
    post(i, 0) = 1.0;
    post(i, 1) = 0.5;
    post(i, 2) = 1.0;
  }
  const PredictiveDraws a = predict_continuous(post, 2.0, 20, 45, rng);
  const bool a_ok = a.values.size() == 30u * 20u * 45u && a.n_post == 30 && a.n_beta == 20 &&
                    a.n_y == 45;

  Matrix small = post.topRows(3);
  const PredictiveDraws b = predict_continuous(small, 2.0, 4, 5, rng);
  const bool b_ok = b.values.size() == 60u;

  const long long reference = 300LL * 300LL * 300LL;
  std::ostringstream os;
  os << "30*20*45 -> " << a.values.size() << " draws, 3*4*5 -> " << b.values.size()
     << " draws, reference settings give " << reference << " per test point";
  detail = os.str();
  return a_ok && b_ok && reference == 27000000LL;
}

// ---------------------------------------------------------------------------
// 11. Full-scale replication is a documented mode, not an acceptance gate.
// ---------------------------------------------------------------------------
bool criterion_full_scale_mode(std::string& detail) {
  RunConfig full;
  const auto grid = full.grid_spec().enumerate();
  RunConfig desk;
  desk.apply_desk_scale();
  const auto desk_grid = desk.grid_spec().enumerate();
  std::ostringstream os;
  os << "full-scale mode enumerates " << grid.size() << " tasks (4 sigma x 5 n x 300 reps) vs "
     << desk_grid.size() << " at desk scale; not executed here by design";
  detail = os.str();
  return grid.size() == 6000 && desk_grid.size() == 600;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) only = std::atoi(argv[++i]);
  }

  std::vector<Criterion> criteria{
      {1, "ratio-law KS distance", criterion_ratio_law},
      {2, "integral truncation bound", criterion_truncation},
      {3, "quadrature vs Monte Carlo duality", criterion_mc_duality},
      {4, "closed-form MLEs vs numerical optimizer", criterion_mle_closed_form},
      {5, "plugin MLE asymptotics and interval coverage", criterion_plugin_asymptotics},
      {6, "continuous RMSE anchor (n_T=250, sigma_tl2=0)", criterion_rmse_anchor},
      {7, "continuous coverage anchor (n_T=100, sigma_tl2=0.25)", criterion_coverage_anchor},
      {8, "binary AUC and coverage anchor (n_T=250, sigma_tl2=0)", criterion_binary_anchor},
      {9, "label-set three-case rule", criterion_label_set_cases},
      {10, "predictive draw-count product rule", criterion_draw_count},
      {11, "full-scale replication available as a documented mode", criterion_full_scale_mode},
  };

  bool all_pass = true;
  for (const Criterion& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool pass = false;
    try {
      pass = c.body(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %2d: %s — %s (%.1fs)\n", pass ? "PASS" : "FAIL", c.id,
                c.name.c_str(), detail.c_str(), secs);
    std::fflush(stdout);
    all_pass = all_pass && pass;
  }
  return all_pass ? 0 : 1;
}
