#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "recast/calibration.hpp"
#include "recast/config.hpp"
#include "recast/csv.hpp"
#include "recast/metrics.hpp"
#include "recast/model_io.hpp"
#include "recast/sim_harness.hpp"

namespace recast::cli {

namespace detail {

inline int hardware_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Reconciles a feature CSV with the model's input dimension: a model fit
/// with a leading intercept accepts a feature file without one.
inline Matrix features_for_model(const SourceModel& model, const CsvTable& table,
                                 Eigen::Index drop_column = -1) {
  Eigen::Index p_model = model.kind == ModelKind::mlp ? model.mlp.w1.cols() : model.theta.size();
  const Eigen::Index n_cols =
      static_cast<Eigen::Index>(table.header.size()) - (drop_column >= 0 ? 1 : 0);
  bool add_intercept;
  if (n_cols + 1 == p_model)
    add_intercept = true;
  else if (n_cols == p_model)
    add_intercept = false;
  else
    throw DataError("feature csv has " + std::to_string(n_cols) + " columns but the model expects " +
                    std::to_string(p_model) + " (or one less plus an intercept)");

  const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
  if (n == 0) throw DataError("csv: no data rows");
  Matrix X(n, p_model);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index out_j = 0;
    if (add_intercept) X(i, out_j++) = 1.0;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      if (static_cast<Eigen::Index>(j) == drop_column) continue;
      X(i, out_j++) = recast::detail::parse_double(table.rows[static_cast<std::size_t>(i)][j],
                                                   static_cast<long long>(i) + 2,
                                                   table.header[j]);
    }
  }
  return X;
}

inline void write_posterior_csv(const Matrix& sample, ResponseKind kind, const std::string& path) {
  const std::vector<std::string> header =
      kind == ResponseKind::continuous ? std::vector<std::string>{"delta", "gamma", "sigma"}
                                       : std::vector<std::string>{"delta", "gamma"};
  write_matrix_csv(sample, header, path);
}

inline std::pair<Matrix, ResponseKind> read_posterior_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  if (table.header == std::vector<std::string>{"delta", "gamma", "sigma"})
    return {matrix_from_csv(table), ResponseKind::continuous};
  if (table.header == std::vector<std::string>{"delta", "gamma"})
    return {matrix_from_csv(table), ResponseKind::binary};
  throw DataError("posterior csv: unexpected header in " + path);
}

inline void write_chain_csv(const Chain& chain, ResponseKind kind, long long total_iters,
                            const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write chain csv " + path);
  const bool continuous = kind == ResponseKind::continuous;
  out << (continuous ? "iteration,delta,gamma,sigma,log_target"
                     : "iteration,delta,gamma,log_target")
      << '\n';
  const long long first_iter = total_iters - chain.samples.rows() + 1;
  for (Eigen::Index i = 0; i < chain.samples.rows(); ++i) {
    out << (first_iter + i) << ',' << format_double(chain.samples(i, 0)) << ','
        << format_double(std::exp(chain.samples(i, 1)));
    if (continuous) out << ',' << format_double(std::exp(0.5 * chain.samples(i, 2)));
    out << ',' << format_double(chain.log_target[i]) << '\n';
  }
}

struct PredictionOutput {
  Matrix scores_points;  // columns: score, point, p_tilde(binary)
  std::map<double, std::vector<PredictionSet>> sets_by_level;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommand implementations
// ---------------------------------------------------------------------------

inline int cmd_fit_source(const std::string& data_csv, const std::string& label_col,
                          const std::string& kind, const std::string& response_flag,
                          const std::string& out_path, bool standardize, bool add_intercept,
                          const RunConfig& cfg) {
  ResponseKind response;
  if (kind == "linear")
    response = ResponseKind::continuous;
  else if (kind == "logistic")
    response = ResponseKind::binary;
  else if (kind == "mlp")
    response = response_flag == "binary" ? ResponseKind::binary : ResponseKind::continuous;
  else
    throw ConfigError("--kind must be linear, logistic or mlp");
  if (!response_flag.empty() && response_flag != "continuous" && response_flag != "binary")
    throw ConfigError("--response must be continuous or binary");
  if (kind == "linear" && response_flag == "binary")
    throw ConfigError("--kind linear requires a continuous response");
  if (kind == "logistic" && response_flag == "continuous")
    throw ConfigError("--kind logistic requires a binary response");

  const CsvTable table = read_csv(data_csv);
  if (!table.has_column(label_col))
    throw DataError("--label-col '" + label_col + "' not found in " + data_csv);
  Dataset data = dataset_from_csv(table, label_col, response, add_intercept);

  Standardizer standardizer = Standardizer::identity(data.p());
  if (standardize) {
    standardizer = standardize_fit(data.X, add_intercept);
    data.X = standardize_apply(standardizer, data.X);
  }

  SourceModel model;
  if (kind == "linear") {
    model = fit_ols(data);
  } else if (kind == "logistic") {
    model = fit_logistic(data);
  } else {
    MlpConfig mlp_cfg;
    mlp_cfg.hidden = cfg.mlp.hidden;
    mlp_cfg.epochs = cfg.mlp.epochs;
    mlp_cfg.calibration_fraction = cfg.mlp.calibration_fraction;
    mlp_cfg.adam_step = cfg.mlp.adam_step;
    mlp_cfg.adam_beta1 = cfg.mlp.adam_beta1;
    mlp_cfg.adam_beta2 = cfg.mlp.adam_beta2;
    mlp_cfg.adam_eps = cfg.mlp.adam_eps;
    Rng rng(cfg.seed);
    model = fit_mlp(data, mlp_cfg, rng);
  }
  model.standardizer = standardizer;

  save_model(model, out_path);
  write_effective_config(cfg, out_path);
  std::cout << "fit-source: wrote " << to_string(model.kind) << " model ("
            << to_string(model.response) << ", p=" << data.p() << ", n=" << data.n() << ") to "
            << out_path << '\n';
  return 0;
}

inline int cmd_calibrate(const std::string& model_path, const std::string& target_csv,
                         const std::string& label_col, const std::string& out_path,
                         const RunConfig& cfg) {
  const SourceModel model = load_model(model_path);
  const CsvTable table = read_csv(target_csv);
  if (!table.has_column(label_col))
    throw DataError("--label-col '" + label_col + "' not found in " + target_csv);
  const Eigen::Index label_idx = table.column(label_col);
  const Matrix X = detail::features_for_model(model, table, label_idx);

  ScoredTarget scored;
  scored.kind = model.response;
  scored.labels.resize(static_cast<Eigen::Index>(table.rows.size()));
  for (Eigen::Index i = 0; i < scored.labels.size(); ++i)
    scored.labels[i] = recast::detail::parse_double(
        table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(label_idx)], i + 2,
        label_col);
  scored.scores = model.score_all(X);

  if (model.response == ResponseKind::continuous) {
    std::string zero_rows;
    for (Eigen::Index i = 0; i < scored.scores.size(); ++i)
      if (scored.scores[i] == 0.0) zero_rows += (zero_rows.empty() ? "" : ", ") + std::to_string(i + 2);
    if (!zero_rows.empty())
      throw DataError("calibrate: zero source score on target csv line(s) " + zero_rows);
  }
  scored.validate();

  Rng rng(cfg.seed);
  const CalibrationResult result =
      calibrate(scored, cfg.mh_config(model.response), cfg.quadrature, cfg.prior, rng);

  detail::write_posterior_csv(result.posterior_sample, model.response, out_path);
  write_effective_config(cfg, out_path);
  if (cfg.mcmc.dump_chain)
    detail::write_chain_csv(result.chain, model.response, cfg.mcmc.total_iters,
                            out_path + ".chain.csv");

  std::cout << "calibrate: " << result.posterior_sample.rows() << " posterior draws to "
            << out_path << " (accept rate " << format_double(result.chain.accept_rate)
            << ", floor events " << result.chain.floor_events << ")\n";
  if (result.chain.low_acceptance_warning)
    std::cerr << "warning: acceptance rate below 1%; the chain is likely stuck\n";
  return 0;
}

inline int cmd_predict(const std::string& model_path, const std::string& posterior_path,
                       const std::string& test_csv, const std::string& label_col,
                       const std::vector<double>& alpha_override, const std::string& out_path,
                       const RunConfig& cfg) {
  const SourceModel model = load_model(model_path);
  const auto [posterior, posterior_kind] = detail::read_posterior_csv(posterior_path);
  if (posterior_kind != model.response)
    throw DataError("predict: posterior sample and model response kinds disagree");

  const CsvTable table = read_csv(test_csv);
  Eigen::Index label_idx = -1;
  Vector labels;
  if (!label_col.empty()) {
    label_idx = table.column(label_col);
    labels.resize(static_cast<Eigen::Index>(table.rows.size()));
    for (Eigen::Index i = 0; i < labels.size(); ++i)
      labels[i] = recast::detail::parse_double(
          table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(label_idx)], i + 2,
          label_col);
  }
  const Matrix X = detail::features_for_model(model, table, label_idx);
  const Vector scores = model.score_all(X);

  const std::vector<double> alphas =
      alpha_override.empty() ? cfg.predictive.alphas : alpha_override;
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha values must lie in (0,1)");

  const Eigen::Index n = X.rows();
  const bool continuous = model.response == ResponseKind::continuous;
  std::vector<PredictiveSummary> summaries(static_cast<std::size_t>(n));

  const int n_threads = detail::hardware_threads(cfg.threads);
  std::atomic<Eigen::Index> next{0};
  auto worker = [&]() {
    for (;;) {
      const Eigen::Index i = next.fetch_add(1);
      if (i >= n) return;
      Rng rng = Rng(cfg.seed).split(static_cast<std::uint64_t>(i));
      PredictiveDraws draws;
      if (continuous) {
        draws = predict_continuous(posterior, scores[i], cfg.predictive.n_beta,
                                   cfg.predictive.n_y, rng);
      } else {
        draws = predict_binary(posterior, scores[i], cfg.predictive.n_beta, rng,
                               cfg.predictive.rao_blackwell, cfg.predictive.n_y);
      }
      summaries[static_cast<std::size_t>(i)] = summarize_draws(draws, alphas);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads - 1; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + out_path);
  out << "row,score,point";
  if (!continuous) out << ",p_tilde";
  for (double a : alphas) {
    const std::string tag = format_double(a);
    if (continuous)
      out << ",lo_" << tag << ",hi_" << tag;
    else
      out << ",set_" << tag;
  }
  out << '\n';
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = summaries[static_cast<std::size_t>(i)];
    out << (i + 1) << ',' << format_double(scores[i]) << ',' << format_double(s.point);
    if (!continuous) out << ',' << format_double(s.p_tilde);
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      if (continuous) {
        out << ',' << format_double(s.sets[a].lo) << ',' << format_double(s.sets[a].hi);
      } else {
        out << ',';
        if (s.sets[a].has_zero) out << '0';
        if (s.sets[a].has_one) out << '1';
      }
    }
    out << '\n';
  }
  out.close();
  write_effective_config(cfg, out_path);

  if (labels.size() > 0) {
    std::map<double, std::vector<PredictionSet>> by_level;
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      auto& sets = by_level[1.0 - alphas[a]];
      for (Eigen::Index i = 0; i < n; ++i)
        sets.push_back(summaries[static_cast<std::size_t>(i)].sets[a]);
    }
    const auto coverage = empirical_coverage(by_level, labels);
    std::ofstream cov(out_path + ".coverage.csv", std::ios::trunc);
    cov << "nominal,empirical\n";
    std::cout << "coverage summary (" << n << " labeled rows):\n";
    for (const auto& [level, emp] : coverage) {
      cov << format_double(level) << ',' << format_double(emp) << '\n';
      std::cout << "  nominal " << format_double(level) << " -> empirical " << format_double(emp)
                << '\n';
    }
  }
  std::cout << "predict: wrote " << n << " rows to " << out_path << '\n';
  return 0;
}

inline int cmd_replicate(const std::string& out_path, bool resume, bool dry_run,
                         const std::string& reliability_path, const RunConfig& cfg) {
  const GridSpec spec = cfg.grid_spec();
  HarnessConfig harness = cfg.harness_config(spec.kind);
  if (!reliability_path.empty()) {
    // Reliability curves evaluate on the dense nominal grid in addition to
    // the configured levels.
    std::vector<double> levels = harness.coverage_levels;
    for (double l : default_reliability_grid()) levels.push_back(l);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    harness.coverage_levels = levels;
  }

  if (dry_run) {
    const auto scenarios = spec.enumerate();
    std::cout << "replicate plan: " << scenarios.size() << " tasks ("
              << spec.sigma_tl2.size() << " sigma_tl2 x " << spec.n_target.size()
              << " n_target x " << spec.replicates << " replicates), methods:";
    for (Method m : spec.effective_methods()) std::cout << ' ' << to_string(m);
    std::cout << '\n';
    for (const auto& sc : scenarios)
      std::cout << "  " << to_string(sc.kind) << " n_target=" << sc.n_target
                << " sigma_tl2=" << format_double(sc.sigma_tl2) << " replicate="
                << sc.replicate_id << " seed=" << sc.seed << '\n';
    return 0;
  }

  const GridResult result =
      run_grid(spec, harness, detail::hardware_threads(cfg.threads), out_path, resume);
  write_effective_config(cfg, out_path);
  if (!reliability_path.empty()) write_reliability_csv(result.rows, reliability_path);

  int failures = 0;
  for (const auto& r : result.rows)
    if (r.status != "ok") ++failures;
  std::cout << "replicate: " << result.tasks_run << " tasks run, " << result.tasks_skipped
            << " resumed, " << failures << " failed rows, results in " << out_path << '\n';
  return 0;
}

inline int cmd_diagnostics(const std::string& input) {
  namespace fs = std::filesystem;
  if (!fs::exists(input)) throw DataError("diagnostics: no such file " + input);

  if (input.size() > 5 && input.substr(input.size() - 5) == ".json") {
    const SourceModel m = load_model(input);
    std::cout << "model: kind=" << to_string(m.kind) << " response=" << to_string(m.response)
              << " p="
              << (m.kind == ModelKind::mlp ? m.mlp.w1.cols() : m.theta.size())
              << " standardized=" << (m.standardizer.is_identity() ? "no" : "yes") << '\n';
    if (m.kind == ModelKind::linear)
      std::cout << "  residual_sd=" << format_double(m.residual_sd)
                << " condition_number=" << format_double(m.condition_number) << '\n';
    if (m.kind == ModelKind::logistic)
      std::cout << "  irls_iterations=" << m.irls_iterations << '\n';
    if (m.kind == ModelKind::mlp) std::cout << "  best_epoch=" << m.best_epoch << '\n';
    return 0;
  }

  const CsvTable table = read_csv(input);
  std::cout << input << ": " << table.rows.size() << " rows, " << table.header.size()
            << " columns\n";
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    std::vector<double> numeric;
    numeric.reserve(table.rows.size());
    bool all_numeric = true;
    for (const auto& row : table.rows) {
      double v = 0.0;
      const auto res = std::from_chars(row[j].data(), row[j].data() + row[j].size(), v);
      if (res.ec != std::errc{} || res.ptr != row[j].data() + row[j].size()) {
        all_numeric = false;
        break;
      }
      numeric.push_back(v);
    }
    if (!all_numeric || numeric.empty()) continue;
    std::sort(numeric.begin(), numeric.end());
    double mean = 0.0;
    for (double v : numeric) mean += v;
    mean /= static_cast<double>(numeric.size());
    std::cout << "  " << table.header[j] << ": mean=" << format_double(mean)
              << " median=" << format_double(numeric[numeric.size() / 2])
              << " min=" << format_double(numeric.front())
              << " max=" << format_double(numeric.back()) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Parses and dispatches; returns the process exit code. Exit codes: 0 on
/// success, 2 for configuration/usage errors, 3 for data errors, 4 for
/// numerical failures.
inline int run(const std::vector<std::string>& args) {
  CLI::App app{"Cauchy random-effect calibration of a pre-trained source model to a small "
               "target sample, with posterior predictive prediction sets and a synthetic "
               "benchmark harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> threads_flag;
  bool desk_scale_flag = false;
  app.add_option("--config", config_path, "JSON configuration file (defaults apply otherwise)");
  app.add_option("--seed", seed_flag, "override the master seed");
  app.add_option("--threads", threads_flag, "worker threads (0 = all hardware threads)");
  app.add_flag("--desk-scale", desk_scale_flag,
               "shrink replicates/chain/predictive sampling to the desk-scale preset");

  auto* fit = app.add_subcommand("fit-source", "fit and export a source model from a labeled CSV");
  std::string fit_data, fit_label = "label", fit_kind = "linear", fit_response, fit_out;
  bool fit_no_standardize = false, fit_no_intercept = false;
  fit->add_option("--data", fit_data, "training CSV with a header row")->required();
  fit->add_option("--label-col", fit_label, "name of the response column")->required();
  fit->add_option("--kind", fit_kind, "linear | logistic | mlp")->required();
  fit->add_option("--response", fit_response, "continuous | binary (mlp only; inferred otherwise)");
  fit->add_option("--out", fit_out, "output model file (json)")->required();
  fit->add_flag("--no-standardize", fit_no_standardize, "skip feature standardization");
  fit->add_flag("--no-intercept", fit_no_intercept, "do not prepend an intercept column");

  auto* cal = app.add_subcommand("calibrate", "estimate the calibration posterior on target data");
  std::string cal_model, cal_target, cal_label = "label", cal_out;
  bool cal_dump_chain = false;
  cal->add_option("--model", cal_model, "fitted source model (json)")->required();
  cal->add_option("--target", cal_target, "target CSV with a header row")->required();
  cal->add_option("--label-col", cal_label, "name of the response column")->required();
  cal->add_option("--out", cal_out, "output posterior sample CSV")->required();
  cal->add_flag("--dump-chain", cal_dump_chain, "also write the retained chain as <out>.chain.csv");

  auto* pred = app.add_subcommand("predict", "posterior predictive summaries for test rows");
  std::string pred_model, pred_posterior, pred_test, pred_label, pred_out;
  std::vector<double> pred_alphas;
  pred->add_option("--model", pred_model, "fitted source model (json)")->required();
  pred->add_option("--posterior", pred_posterior, "posterior sample CSV from calibrate")->required();
  pred->add_option("--test", pred_test, "test CSV with a header row")->required();
  pred->add_option("--label-col", pred_label, "optional response column for a coverage summary");
  pred->add_option("--alpha", pred_alphas, "prediction-set level(s); overrides the config list");
  pred->add_option("--out", pred_out, "output prediction CSV")->required();

  auto* rep = app.add_subcommand("replicate", "run the synthetic benchmark grid");
  std::string rep_out, rep_reliability;
  bool rep_resume = false, rep_dry = false;
  rep->add_option("--out", rep_out, "results CSV path")->required();
  rep->add_option("--reliability", rep_reliability, "also write an aggregated reliability CSV");
  rep->add_flag("--resume", rep_resume, "skip (scenario, replicate) keys already in the results");
  rep->add_flag("--dry-run", rep_dry, "list the planned tasks without running them");

  auto* diag = app.add_subcommand("diagnostics", "summarize a model file or output CSV");
  std::string diag_input;
  diag->add_option("input", diag_input, "model json, posterior/chain/results CSV")->required();

  std::vector<const char*> argv;
  argv.push_back("recast");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (desk_scale_flag) cfg.apply_desk_scale();
    if (seed_flag) cfg.seed = *seed_flag;
    if (threads_flag) cfg.threads = *threads_flag;
    if (cal_dump_chain) cfg.mcmc.dump_chain = true;

    if (fit->parsed())
      return cmd_fit_source(fit_data, fit_label, fit_kind, fit_response, fit_out,
                            !fit_no_standardize, !fit_no_intercept, cfg);
    if (cal->parsed()) return cmd_calibrate(cal_model, cal_target, cal_label, cal_out, cfg);
    if (pred->parsed())
      return cmd_predict(pred_model, pred_posterior, pred_test, pred_label, pred_alphas, pred_out,
                         cfg);
    if (rep->parsed()) return cmd_replicate(rep_out, rep_resume, rep_dry, rep_reliability, cfg);
    if (diag->parsed()) return cmd_diagnostics(diag_input);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 4;
  }
}

}  // namespace recast::cli
