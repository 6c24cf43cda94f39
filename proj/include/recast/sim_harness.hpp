#pragma once

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "recast/calibration.hpp"
#include "recast/format.hpp"
#include "recast/metrics.hpp"
#include "recast/predictive.hpp"
#include "recast/source_models.hpp"

namespace recast {

/// One synthetic experiment cell: dimensions, dissimilarity dial sigma_tl2,
/// response kind and the replicate's own seed.
struct Scenario {
  int p = 50;  // intercept included
  int n_source = 1000;
  int n_target = 100;
  double sigma_tl2 = 0.0;
  ResponseKind kind = ResponseKind::continuous;
  int n_test = 250;
  int replicate_id = 1;
  std::uint64_t seed = 0;
};

enum class Method { recast_lm, recast_glm, recast_dnn, dnn, unfreeze_dnn };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::recast_lm: return "recast-lm";
    case Method::recast_glm: return "recast-glm";
    case Method::recast_dnn: return "recast-dnn";
    case Method::dnn: return "dnn";
    default: return "unfreeze-dnn";
  }
}

inline Method method_from_string(const std::string& s) {
  if (s == "recast-lm") return Method::recast_lm;
  if (s == "recast-glm") return Method::recast_glm;
  if (s == "recast-dnn") return Method::recast_dnn;
  if (s == "dnn") return Method::dnn;
  if (s == "unfreeze-dnn") return Method::unfreeze_dnn;
  throw ConfigError("unknown method '" + s + "'");
}

/// Everything a replicate needs besides the scenario itself.
struct HarnessConfig {
  MhConfig mh;
  QuadratureConfig quad;
  PriorHyper prior;
  MlpConfig mlp;
  int n_beta = 300;
  int n_y = 300;
  double noise_sd = 0.5;  // innovation sd for synthetic continuous responses
  std::vector<double> coverage_levels{0.50, 0.80, 0.90, 0.95, 0.99};
};

struct MetricsRow {
  Scenario scenario;
  std::string method;
  std::string status = "ok";  // "ok" or "error: ..."
  double rmse_observed = std::numeric_limits<double>::quiet_NaN();    // vs noisy labels
  double rmse_structural = std::numeric_limits<double>::quiet_NaN();  // vs noiseless mean
  double auc_value = std::numeric_limits<double>::quiet_NaN();
  std::map<double, double> coverage;  // nominal level -> empirical
  long long floor_events = 0;
  double accept_rate = std::numeric_limits<double>::quiet_NaN();
  double runtime_sec = 0.0;
};

/// Source coefficients: first half negative, second half positive, magnitudes
/// uniform on [0.75, 5]. Drawn once per experiment suite and reused.
inline Vector make_theta_source(Rng& rng, int p = 50) {
  if (p < 2 || p % 2 != 0) throw ConfigError("make_theta_source: p must be even and >= 2");
  Vector theta(p);
  for (int j = 0; j < p / 2; ++j) theta[j] = -rng.uniform(0.75, 5.0);
  for (int j = p / 2; j < p; ++j) theta[j] = rng.uniform(0.75, 5.0);
  return theta;
}

/// theta_T = theta_S + eps with eps ~ N(0, sigma_tl2 I); sigma_tl2 = 0
/// returns theta_S verbatim.
inline Vector make_theta_target(const Vector& theta_source, double sigma_tl2, Rng& rng) {
  if (sigma_tl2 < 0.0) throw ConfigError("make_theta_target: sigma_tl2 must be >= 0");
  if (sigma_tl2 == 0.0) return theta_source;
  const double sd = std::sqrt(sigma_tl2);
  Vector theta = theta_source;
  for (Eigen::Index j = 0; j < theta.size(); ++j) theta[j] += sd * rng.gaussian();
  return theta;
}

/// Design matrix [1 | standard Gaussian block]; continuous responses get
/// Gaussian noise with sd noise_sd, binary responses are Bernoulli(expit(X theta)).
inline Dataset gen_data(const Vector& theta, int n, ResponseKind kind, Rng& rng,
                        double noise_sd = 0.5) {
  const auto p = theta.size();
  Dataset data;
  data.kind = kind;
  data.X.resize(n, p);
  data.X.col(0).setOnes();
  for (int i = 0; i < n; ++i)
    for (Eigen::Index j = 1; j < p; ++j) data.X(i, j) = rng.gaussian();
  const Vector mean = data.X * theta;
  data.y.resize(n);
  if (kind == ResponseKind::continuous) {
    for (int i = 0; i < n; ++i) data.y[i] = mean[i] + noise_sd * rng.gaussian();
  } else {
    for (int i = 0; i < n; ++i) data.y[i] = rng.bernoulli(expit(mean[i])) ? 1.0 : 0.0;
  }
  return data;
}

namespace detail {

struct ReplicateData {
  Dataset source, target, test;
  Vector test_structural_mean;  // X_test * theta_T
};

inline std::vector<double> alphas_from_levels(const std::vector<double>& levels) {
  std::vector<double> alphas;
  for (double l : levels) alphas.push_back(1.0 - l);
  return alphas;
}

// RECaST pipeline on a fitted source model: score, calibrate, predict every
// test point, evaluate.
inline void run_recast_method(MetricsRow& row, const SourceModel& source_model,
                              const ReplicateData& d, const HarnessConfig& cfg, Rng& mh_rng,
                              Rng& pred_rng) {
  ScoredTarget scored;
  scored.scores = source_model.score_all(d.target.X);
  scored.labels = d.target.y;
  scored.kind = d.target.kind;

  const CalibrationResult cal = calibrate(scored, cfg.mh, cfg.quad, cfg.prior, mh_rng);
  row.floor_events = cal.chain.floor_events;
  row.accept_rate = cal.chain.accept_rate;

  const Vector test_scores = source_model.score_all(d.test.X);
  const std::vector<double> alphas = alphas_from_levels(cfg.coverage_levels);
  const int n_test = static_cast<int>(d.test.n());

  Vector points(n_test);
  Vector p_tildes(n_test);
  std::map<double, std::vector<PredictionSet>> sets_by_level;
  for (double l : cfg.coverage_levels) sets_by_level[l].reserve(n_test);

  for (int i = 0; i < n_test; ++i) {
    Rng point_rng = pred_rng.split(static_cast<std::uint64_t>(i));
    PredictiveDraws draws;
    if (d.test.kind == ResponseKind::continuous) {
      draws = predict_continuous(cal.posterior_sample, test_scores[i], cfg.n_beta, cfg.n_y,
                                 point_rng);
    } else {
      draws = predict_binary(cal.posterior_sample, test_scores[i], cfg.n_beta, point_rng);
    }
    const PredictiveSummary summary = summarize_draws(draws, alphas);
    points[i] = summary.point;
    p_tildes[i] = summary.p_tilde;
    for (std::size_t a = 0; a < alphas.size(); ++a)
      sets_by_level[cfg.coverage_levels[a]].push_back(summary.sets[a]);
  }

  if (d.test.kind == ResponseKind::continuous) {
    row.rmse_observed = rmse(points, d.test.y);
    row.rmse_structural = rmse(points, d.test_structural_mean);
  } else {
    row.auc_value = auc(p_tildes, d.test.y);
  }
  row.coverage = empirical_coverage(sets_by_level, d.test.y);
}

// Plain network predictions; binary label sets come from the same
// probability-threshold rule so their coverage is comparable.
inline void run_network_method(MetricsRow& row, const SourceModel& model, const ReplicateData& d,
                               const HarnessConfig& cfg) {
  const Vector scores = model.score_all(d.test.X);
  if (d.test.kind == ResponseKind::continuous) {
    row.rmse_observed = rmse(scores, d.test.y);
    row.rmse_structural = rmse(scores, d.test_structural_mean);
    return;  // a bare point predictor carries no uncertainty quantification
  }
  Vector probs(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) probs[i] = expit(scores[i]);
  row.auc_value = auc(probs, d.test.y);
  std::map<double, std::vector<PredictionSet>> sets_by_level;
  for (double l : cfg.coverage_levels) {
    auto& sets = sets_by_level[l];
    sets.reserve(probs.size());
    for (Eigen::Index i = 0; i < probs.size(); ++i)
      sets.push_back(binary_prediction_set(probs[i], 1.0 - l));
  }
  row.coverage = empirical_coverage(sets_by_level, d.test.y);
}

}  // namespace detail

/// Runs one full replicate: generate source/target/test data, fit the
/// requested source models, run the RECaST pipeline and the baselines, and
/// emit one row per method. All methods see the identical test set. A method
/// failure is recorded in its row rather than aborting the replicate.
inline std::vector<MetricsRow> run_replicate(const Scenario& sc, const Vector& theta_source,
                                             const std::vector<Method>& methods,
                                             const HarnessConfig& cfg) {
  Rng rep_rng(sc.seed);
  Rng theta_rng = rep_rng.split(1);
  Rng source_rng = rep_rng.split(2);
  Rng target_rng = rep_rng.split(3);
  Rng test_rng = rep_rng.split(4);
  Rng fit_rng = rep_rng.split(5);
  Rng mh_rng = rep_rng.split(6);
  Rng pred_rng = rep_rng.split(7);

  const Vector theta_target = make_theta_target(theta_source, sc.sigma_tl2, theta_rng);

  detail::ReplicateData d;
  d.source = gen_data(theta_source, sc.n_source, sc.kind, source_rng, cfg.noise_sd);
  d.target = gen_data(theta_target, sc.n_target, sc.kind, target_rng, cfg.noise_sd);
  d.test = gen_data(theta_target, sc.n_test, sc.kind, test_rng, cfg.noise_sd);
  d.test_structural_mean = d.test.X * theta_target;

  // The network source fit is shared by recast-dnn and unfreeze-dnn.
  std::optional<SourceModel> source_mlp;
  auto get_source_mlp = [&]() -> const SourceModel& {
    if (!source_mlp) {
      Rng r = fit_rng.split(0);
      source_mlp = fit_mlp(d.source, cfg.mlp, r);
    }
    return *source_mlp;
  };

  std::vector<MetricsRow> rows;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const Method method = methods[mi];
    MetricsRow row;
    row.scenario = sc;
    row.method = to_string(method);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      Rng method_mh = mh_rng.split(mi);
      Rng method_pred = pred_rng.split(mi);
      switch (method) {
        case Method::recast_lm: {
          if (sc.kind != ResponseKind::continuous)
            throw ConfigError("recast-lm needs a continuous response");
          const SourceModel m = fit_ols(d.source);
          detail::run_recast_method(row, m, d, cfg, method_mh, method_pred);
          break;
        }
        case Method::recast_glm: {
          if (sc.kind != ResponseKind::binary)
            throw ConfigError("recast-glm needs a binary response");
          // Synthetic source data with strongly saturated logits is often
          // perfectly separable; the capped quasi-MLE is still a valid
          // pre-link scorer because the calibration absorbs its scale.
          const SourceModel m = fit_logistic(d.source, /*allow_separation=*/true);
          detail::run_recast_method(row, m, d, cfg, method_mh, method_pred);
          break;
        }
        case Method::recast_dnn:
          detail::run_recast_method(row, get_source_mlp(), d, cfg, method_mh, method_pred);
          break;
        case Method::dnn: {
          Rng r = fit_rng.split(1);
          const SourceModel m = fit_mlp(d.target, cfg.mlp, r);
          detail::run_network_method(row, m, d, cfg);
          break;
        }
        case Method::unfreeze_dnn: {
          Rng r = fit_rng.split(2);
          const SourceModel m = unfreeze_last_layer(get_source_mlp(), d.target, cfg.mlp, r);
          detail::run_network_method(row, m, d, cfg);
          break;
        }
      }
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
    row.runtime_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Grid orchestration
// ---------------------------------------------------------------------------

struct GridSpec {
  std::vector<int> n_target{20, 40, 60, 100, 250};
  std::vector<double> sigma_tl2{0.0, 0.25, 1.0, 4.0};
  int replicates = 300;
  int p = 50;
  int n_source = 1000;
  int n_test = 250;
  ResponseKind kind = ResponseKind::continuous;
  std::vector<Method> methods;
  std::uint64_t master_seed = 20240101;

  std::vector<Method> effective_methods() const {
    if (!methods.empty()) return methods;
    if (kind == ResponseKind::continuous)
      return {Method::recast_lm, Method::recast_dnn, Method::dnn, Method::unfreeze_dnn};
    return {Method::recast_glm, Method::recast_dnn, Method::dnn, Method::unfreeze_dnn};
  }

  std::uint64_t scenario_seed(int n_t, double s_tl2, int replicate) const {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(double));
    std::memcpy(&bits, &s_tl2, sizeof(bits));
    return Rng::derive_seed(master_seed,
                            {static_cast<std::uint64_t>(kind == ResponseKind::binary ? 2 : 1),
                             static_cast<std::uint64_t>(n_t), bits,
                             static_cast<std::uint64_t>(replicate)});
  }

  std::vector<Scenario> enumerate() const {
    std::vector<Scenario> out;
    for (double s : sigma_tl2)
      for (int n_t : n_target)
        for (int rep = 1; rep <= replicates; ++rep) {
          Scenario sc;
          sc.p = p;
          sc.n_source = n_source;
          sc.n_target = n_t;
          sc.sigma_tl2 = s;
          sc.kind = kind;
          sc.n_test = n_test;
          sc.replicate_id = rep;
          sc.seed = scenario_seed(n_t, s, rep);
          out.push_back(sc);
        }
    return out;
  }

  /// Suite-level source coefficients, fixed across every scenario.
  Vector theta_source() const {
    Rng rng(Rng::derive_seed(master_seed, {0x7e7a50a1ceULL}));
    return make_theta_source(rng, p);
  }
};

namespace detail {

using recast::format_double;

inline std::string results_header(const std::vector<double>& levels) {
  std::string h =
      "response,p,n_source,n_target,sigma_tl2,n_test,replicate,method,status,"
      "rmse_observed,rmse_structural,auc";
  for (double l : levels) h += ",coverage_" + format_double(l);
  return h + ",floor_events,accept_rate,runtime_sec";
}

inline std::string results_line(const MetricsRow& r, const std::vector<double>& levels) {
  std::ostringstream os;
  std::string status = r.status;
  for (char& c : status)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  os << to_string(r.scenario.kind) << ',' << r.scenario.p << ',' << r.scenario.n_source << ','
     << r.scenario.n_target << ',' << format_double(r.scenario.sigma_tl2) << ','
     << r.scenario.n_test << ',' << r.scenario.replicate_id << ',' << r.method << ',' << status
     << ',' << format_double(r.rmse_observed) << ',' << format_double(r.rmse_structural) << ','
     << format_double(r.auc_value);
  for (double l : levels) {
    auto it = r.coverage.find(l);
    os << ',' << (it == r.coverage.end() ? "" : format_double(it->second));
  }
  os << ',' << r.floor_events << ',' << format_double(r.accept_rate) << ','
     << format_double(r.runtime_sec);
  return os.str();
}

}  // namespace detail

struct GridResult {
  std::vector<MetricsRow> rows;
  int tasks_run = 0;
  int tasks_skipped = 0;
};

/// Runs the scenario grid with a thread pool. Results are deterministic for a
/// given master seed regardless of the parallelism degree: every replicate
/// derives its own seed from (scenario, replicate_id), completed rows are
/// appended as they finish, and the final file is rewritten in canonical
/// order. With resume = true, (scenario, replicate) keys already present in
/// out_path are skipped.
inline GridResult run_grid(const GridSpec& spec, const HarnessConfig& cfg, int parallelism,
                           const std::string& out_path, bool resume = false) {
  namespace fs = std::filesystem;
  const std::vector<Method> methods = spec.effective_methods();
  const std::vector<Scenario> scenarios = spec.enumerate();
  const Vector theta_source = spec.theta_source();
  const std::string header = detail::results_header(cfg.coverage_levels);

  // Resume: a task is complete when all its method rows are present.
  std::map<std::string, std::vector<std::string>> done_lines;
  auto task_key = [](const Scenario& sc) {
    std::ostringstream os;
    os << to_string(sc.kind) << '|' << sc.n_target << '|' << detail::format_double(sc.sigma_tl2)
       << '|' << sc.replicate_id;
    return os.str();
  };
  if (resume && fs::exists(out_path)) {
    std::ifstream in(out_path);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (first) {
        first = false;
        if (line != header) break;  // schema changed; recompute everything
        continue;
      }
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string kind_s, p_s, ns_s, nt_s, stl_s, ntest_s, rep_s;
      std::getline(ls, kind_s, ',');
      std::getline(ls, p_s, ',');
      std::getline(ls, ns_s, ',');
      std::getline(ls, nt_s, ',');
      std::getline(ls, stl_s, ',');
      std::getline(ls, ntest_s, ',');
      std::getline(ls, rep_s, ',');
      done_lines[kind_s + "|" + nt_s + "|" + stl_s + "|" + rep_s].push_back(line);
    }
  }

  GridResult result;
  std::vector<const Scenario*> pending;
  std::vector<std::string> kept_lines;
  for (const Scenario& sc : scenarios) {
    auto it = done_lines.find(task_key(sc));
    if (it != done_lines.end() && it->second.size() == methods.size()) {
      for (const auto& l : it->second) kept_lines.push_back(l);
      ++result.tasks_skipped;
    } else {
      pending.push_back(&sc);
    }
  }

  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw DataError("run_grid: cannot open output file " + out_path);
  out << header << '\n';
  for (const auto& l : kept_lines) out << l << '\n';
  out.flush();

  std::mutex io_mutex;
  std::vector<std::string> new_lines;
  std::atomic<std::size_t> next_task{0};
  const int n_threads = std::max(1, parallelism);

  auto worker = [&]() {
    for (;;) {
      const std::size_t t = next_task.fetch_add(1);
      if (t >= pending.size()) return;
      const Scenario& sc = *pending[t];
      std::vector<MetricsRow> rows = run_replicate(sc, theta_source, methods, cfg);
      std::lock_guard<std::mutex> lock(io_mutex);
      for (const MetricsRow& r : rows) {
        const std::string line = detail::results_line(r, cfg.coverage_levels);
        new_lines.push_back(line);
        out << line << '\n';
        result.rows.push_back(r);
      }
      out.flush();
      ++result.tasks_run;
    }
  };

  std::vector<std::thread> threads;
  for (int i = 0; i < n_threads - 1; ++i) threads.emplace_back(worker);
  worker();
  for (auto& th : threads) th.join();
  out.close();

  // Canonical rewrite: one deterministic byte stream no matter the thread
  // interleaving or resume history.
  std::vector<std::string> all_lines = kept_lines;
  all_lines.insert(all_lines.end(), new_lines.begin(), new_lines.end());
  auto line_key = [&methods](const std::string& line) {
    std::istringstream ls(line);
    std::string kind_s, p_s, ns_s, nt_s, stl_s, ntest_s, rep_s, method_s;
    std::getline(ls, kind_s, ',');
    std::getline(ls, p_s, ',');
    std::getline(ls, ns_s, ',');
    std::getline(ls, nt_s, ',');
    std::getline(ls, stl_s, ',');
    std::getline(ls, ntest_s, ',');
    std::getline(ls, rep_s, ',');
    std::getline(ls, method_s, ',');
    int method_rank = 0;
    for (std::size_t i = 0; i < methods.size(); ++i)
      if (to_string(methods[i]) == method_s) method_rank = static_cast<int>(i);
    return std::make_tuple(kind_s, std::stod(stl_s.empty() ? "0" : stl_s), std::stoi(nt_s),
                           std::stoi(rep_s), method_rank);
  };
  std::stable_sort(all_lines.begin(), all_lines.end(),
                   [&](const std::string& a, const std::string& b) {
                     return line_key(a) < line_key(b);
                   });
  std::ofstream final_out(out_path, std::ios::trunc);
  final_out << header << '\n';
  for (const auto& l : all_lines) final_out << l << '\n';
  return result;
}

/// Aggregated reliability rows (method, nominal, mean empirical, se) over the
/// successful rows of a grid result, written as CSV.
inline void write_reliability_csv(const std::vector<MetricsRow>& rows,
                                  const std::string& out_path) {
  std::map<std::pair<std::string, double>, std::vector<double>> buckets;
  for (const MetricsRow& r : rows) {
    if (r.status != "ok") continue;
    for (const auto& [level, cov] : r.coverage) buckets[{r.method, level}].push_back(cov);
  }
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw DataError("write_reliability_csv: cannot open " + out_path);
  out << "method,nominal,empirical,se,n\n";
  for (const auto& [key, values] : buckets) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double se = values.size() > 1
                          ? std::sqrt(var / static_cast<double>(values.size() - 1) /
                                      static_cast<double>(values.size()))
                          : 0.0;
    out << key.first << ',' << detail::format_double(key.second) << ','
        << detail::format_double(mean) << ',' << detail::format_double(se) << ','
        << values.size() << '\n';
  }
}

}  // namespace recast
